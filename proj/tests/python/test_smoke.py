import json
import math

import pytest

import innosurv


def test_auc_and_cutoff():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [0, 0, 1, 1]
    assert innosurv.auc(scores, labels) == pytest.approx(0.75)
    points, area = innosurv.roc(scores, labels)
    assert points[0][1:] == (0.0, 0.0)
    assert points[-1][1:] == (1.0, 1.0)
    assert area == pytest.approx(0.75)
    assert innosurv.select_cutoff([0.5] * 4, labels) == 1.0


def test_mixture_and_abstention():
    assert innosurv.mix([0.2, 0.9], [0.6, 0.1], 0.4) == pytest.approx([0.44, 0.42])
    alpha, trace = innosurv.optimize_weight([0, 1, 0, 1], [0.3, 0.2, 0.9, 0.4], [0, 1, 0, 1], 0.25)
    assert alpha == 1.0
    assert len(trace) == 5
    assert innosurv.classify([0.1, 0.2, 0.5, 0.9]) == ["NOINN", "UNCLASSIFIED", "UNCLASSIFIED", "INN"]


def test_kaplan_meier_and_logrank():
    curve = innosurv.kaplan_meier([1, 1, 2, 5, 5, 5, 5, 5, 5, 5], [1] * 10)
    assert curve["survival"][:2] == pytest.approx([0.8, 0.7])
    assert curve["variance"][0] == pytest.approx(0.016)
    chi, p = innosurv.logrank([1, 3, 2, 4], [1, 0, 1, 0], [0, 0, 1, 1])
    assert chi == pytest.approx(1 / 17)
    assert 0 < p < 1
    assert round(innosurv.hazard_ratio(-0.428), 4) == 0.6518


def test_errors_map_to_exceptions():
    with pytest.raises(innosurv.DomainError):
        innosurv.classify([0.5], 0.5, 0.5)
    with pytest.raises(innosurv.Error):
        innosurv.logrank([1, 2], [1, 1], [0, 0])


def test_cli_and_pipeline(tmp_path):
    code, out, _ = innosurv.run_cli(["--help"])
    assert code == 0 and "pipeline" in out
    code, _, err = innosurv.run_cli(["km", "--data", str(tmp_path / "absent.csv")])
    assert code == 2
    report = json.loads(innosurv.run_pipeline({
        "output.dir": str(tmp_path / "run"),
        "synthetic.rows": "1500",
        "synthetic.predict_rows": "1500",
        "ctree.permutations": "99",
    }))
    assert report["status"] == "ok"
    assert 0.0 <= report["stages"]["mix"]["alpha"] <= 1.0
    assert math.isfinite(report["stages"]["mix"]["auc"])
