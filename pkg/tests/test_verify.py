import json

import pytest

from schatten_recovery import verify
from schatten_recovery.verify import prox_oracle, verify_suite, write_report


def test_suite_passes_and_is_deterministic(tmp_path):
    a = verify_suite(0)
    assert a["passed"]
    names = [p["name"] for p in a["properties"]]
    assert names == ["block_additivity", "rank_restricted_holder", "restricted_triangle",
                     "orthogonal_inner_product", "prox_oracle", "perturbation_scaling",
                     "operator_linearity", "svd_roundtrip", "feasibility_coupling"]
    inner = a["properties"][3]
    assert not inner["hard"] and inner["detail"]["max_ratio"] > 0
    path1, path2 = tmp_path / "a.json", tmp_path / "b.json"
    write_report(path1, a)
    write_report(path2, verify_suite(0))
    assert path1.read_bytes() == path2.read_bytes()
    assert json.loads(path1.read_text())["seed"] == 0


def test_failures_are_report_content():
    res = verify._result("x", [1.0, -2.0, 0.5], 0.0)
    assert res.violations == 1 and res.worst_margin == -2.0 and not res.passed
    assert res.to_dict()["passed"] is False


def test_prox_oracle_basic():
    # ternary search pins the objective, the minimizer only to ~sqrt(eps)
    w, f = prox_oracle(3.0, 1.0, 1.0)
    assert w == pytest.approx(2.0, abs=1e-6) and f == pytest.approx(2.5, abs=1e-12)
    assert prox_oracle(-0.5, 1.0, 0.5) == (0.0, 0.125)
    assert prox_oracle(0.0, 1.0, 0.5) == (0.0, 0.0)
