import csv
import math
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schatten_recovery.matcore import low_rank_product
from schatten_recovery.theory import (InfeasibleConditionError, MatrixStats, TheoryInputs,
                                      _denominator, alpha, check_head_tail_condition, ric_admissible_level,
                                      constants, error_bounds, evaluate, format_report, hat_delta,
                                      kappa, matrix_stats, rank_limit_rhs, total_noise,
                                      write_reports_csv)

P_GRID = np.linspace(0.1, 0.9, 50)


def test_hat_delta_examples():
    assert hat_delta(0.05, 0.0) == 0.05
    assert hat_delta(0.05, 0.1) == pytest.approx(0.2705, abs=1e-15)
    assert hat_delta(0.0, 0.0) == 0.0


@given(st.floats(0, 0.99), st.floats(0, 2), st.floats(1e-6, 0.5))
def test_hat_delta_strictly_increasing(d, e, h):
    assert hat_delta(min(d + h, 0.999), e) > hat_delta(d, e) or d + h >= 0.999
    assert hat_delta(d, e + h) > hat_delta(d, e)


def test_ric_level_examples():
    assert ric_admissible_level(1.0, 2.0, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert abs(ric_admissible_level(1e-6, 2.0, 0.0) - 1.0) < 1e-3
    assert ric_admissible_level(0.5, 2.0, 10.0) < 0
    assert rank_limit_rhs(0.0) == 1.0
    assert ric_admissible_level(1e-6, 3.0, 0.2) == pytest.approx(rank_limit_rhs(0.2), abs=1e-9)


@given(st.floats(1.01, 50), st.floats(0, 1))
def test_ric_level_nonincreasing_in_p(a, eps):
    vals = [ric_admissible_level(p, a, eps) for p in np.linspace(0.01, 1.0, 100)]
    assert all(b <= x + 1e-15 for x, b in zip(vals, vals[1:]))


def test_head_tail_examples():
    assert check_head_tail_condition(0.0, 0.0, 5.0)
    k = kappa(0.1)
    assert k == pytest.approx(math.sqrt(1.1 / 0.9))
    assert check_head_tail_condition(0.3, 0.3, k)
    assert not check_head_tail_condition(0.5, 0.5 / 1.0, 1.0)  # t + s == 1 / kappa exactly


def test_total_noise_examples():
    inp = TheoryInputs.uniform(0.5, 2.0, 6, 0.1, eps_A=0.05, eps_y=0.01)
    stats = MatrixStats(0.0, 0.0, 10.0, 0.0)
    assert total_noise(inp, stats) == pytest.approx((0.05 * kappa(0.1) + 0.01) * 10)
    assert total_noise(inp, stats) == pytest.approx(0.65277, abs=1e-5)
    zero = TheoryInputs.uniform(0.5, 2.0, 6, 0.1)
    assert total_noise(zero, stats) == 0.0
    with pytest.raises(InfeasibleConditionError) as err:
        total_noise(inp, MatrixStats(0.6, 0.6, 1.0, 0.0))
    assert err.value.condition == "head_tail"


def test_total_noise_tail_term_uses_alpha():
    inp = TheoryInputs.uniform(0.5, 2.0, 6, 0.1, eps_A=0.05, op_norm=3.0)
    stats = MatrixStats(0.2, 0.1, 1.0, 0.0)
    k, al = kappa(0.1), alpha(3.0, 0.1)
    assert al == pytest.approx(3.0 / math.sqrt(0.9))
    expected = (0.05 * k + 0.05 * al * 0.2) / (1 - k * 0.3)
    assert total_noise(inp, stats) == pytest.approx(expected)


def test_constants_examples():
    C1, C2, C1p, C2p = constants(TheoryInputs.uniform(1.0, 4.0, 3, 0.0))
    assert (C1, C2) == pytest.approx((3.0, 1.0))
    assert C1p == pytest.approx(4 * math.sqrt(5))
    assert C2p == pytest.approx(2.0)
    # variants coincide at zero hats
    assert constants(TheoryInputs.uniform(1.0, 4.0, 3, 0.0), "power_half_p") == pytest.approx((C1, C2, C1p, C2p))


@pytest.mark.parametrize("variant", ["power_p", "power_half_p"])
def test_constants_monotone_in_p(variant):
    r = 6
    c = np.array([constants(TheoryInputs.uniform(p, 5.0, r, 0.05), variant) for p in P_GRID])
    assert np.all(np.diff(c[:, 0]) >= 0)
    assert np.all(np.diff(c[:, 1] / r ** (1 - P_GRID / 2)) >= 0)


def test_half_power_variant_has_larger_denominator():
    inp = TheoryInputs.uniform(0.5, 3.0, 2, 0.1, eps_A=0.05)
    assert constants(inp, "power_half_p")[0] < constants(inp, "power_p")[0]


def test_constants_infeasible():
    inp = TheoryInputs.uniform(0.9, 1.1, 2, 0.6, eps_A=0.3)
    with pytest.raises(InfeasibleConditionError) as err:
        constants(inp)
    assert err.value.condition == "ric_level"


valid = st.tuples(st.floats(0.01, 1.0), st.floats(1.01, 30), st.floats(0, 0.999),
                  st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))


@given(valid)
def test_ric_level_implies_positive_denominator(args):
    p, a, d2, frac_d, e2, frac_e = args
    d1, e1 = d2 * frac_d, e2 * frac_e  # RICs and ratios ordered by rank
    if d2 < ric_admissible_level(p, a, e2):
        for variant in ("power_p", "power_half_p"):
            assert _denominator(p, a, hat_delta(d1, e1), hat_delta(d2, e2), variant) > 0


def test_feasibility_coupling_bulk():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(10_000):
        p = rng.uniform(0.01, 1)
        a = 1 + 10 ** rng.uniform(-2, 1.5)
        d2 = rng.uniform(0, 1)
        d1 = rng.uniform(0, d2)
        e2 = rng.uniform(0, 0.5)
        e1 = rng.uniform(0, e2)
        if d2 < ric_admissible_level(p, a, e2):
            hits += 1
            assert _denominator(p, a, hat_delta(d1, e1), hat_delta(d2, e2), "power_p") > 0
    assert hits > 1000


def test_matrix_stats_examples():
    st_ = matrix_stats(np.diag([2.0, 1.0, 1.0]), 1, 0.5, np.array([3.0, 4.0]))
    assert st_.t_r == pytest.approx(math.sqrt(2) / 2)
    assert st_.s_r == pytest.approx(1.0)
    assert st_.y_norm == 5.0
    assert st_.tail_schatten_p == pytest.approx(2.0)
    X = low_rank_product(10, 9, 3, 1)
    exact = matrix_stats(X, 3, 0.3, np.ones(2))
    assert (exact.t_r, exact.s_r, exact.tail_schatten_p) == (0.0, 0.0, 0.0)
    scaled = matrix_stats(7.5 * (X + 0.1 * np.eye(10, 9)), 3, 0.3, np.ones(2))
    base = matrix_stats(X + 0.1 * np.eye(10, 9), 3, 0.3, np.ones(2))
    assert scaled.t_r == pytest.approx(base.t_r) and scaled.s_r == pytest.approx(base.s_r)
    with pytest.raises(ValueError):
        matrix_stats(np.zeros((3, 3)), 1, 0.5, np.ones(1))


def test_error_bounds_exact_rank_noiseless_is_zero():
    inp = TheoryInputs.uniform(0.5, 2.0, 6, 0.1)
    assert error_bounds(inp, MatrixStats(0, 0, 10.0, 0)) == (0.0, 0.0)


def test_error_bounds_closed_form_and_affinity():
    inp = TheoryInputs.uniform(0.4, 2.0, 6, 0.1, eps_A=0.02)
    C1, C2, C1p, _ = constants(inp)
    stats = MatrixStats(0, 0, 10.0, 0)
    eps = total_noise(inp, stats)
    bf, bs = error_bounds(inp, stats)
    assert bf == pytest.approx(C1 * eps**0.4)
    assert bs == pytest.approx(C1p * 6 ** 0.8 * eps**0.4)
    bf2, _ = error_bounds(inp, MatrixStats(0, 0, 20.0, 0))  # doubles eps'
    assert bf2 - bf == pytest.approx(C1 * ((2 * eps) ** 0.4 - eps**0.4))


def test_error_bounds_compressible_term():
    inp = TheoryInputs.uniform(0.5, 2.0, 4, 0.1)
    C1, C2, C1p, C2p = constants(inp)
    bf, bs = error_bounds(inp, MatrixStats(0.0, 0.0, 1.0, 3.0))
    assert bf == pytest.approx(C2 * 3.0 / 4 ** 0.75)
    assert bs == pytest.approx(C2p * 3.0)


def test_evaluate_reports_infeasible_as_nan():
    rep = evaluate(TheoryInputs.uniform(0.9, 1.1, 2, 0.6, eps_A=0.3), MatrixStats(0, 0, 1, 0))
    assert not rep.ric_level_holds and math.isnan(rep.bound_frobenius_p) and math.isnan(rep.C1)
    rep = evaluate(TheoryInputs.uniform(0.5, 2, 2, 0.1), MatrixStats(0.7, 0.7, 1, 0.1))
    assert not rep.head_tail_holds and math.isnan(rep.total_noise)
    rep = evaluate(TheoryInputs.uniform(0.5, 2, 6, 0.1, eps_A=0.01), MatrixStats(0, 0, 10, 0))
    assert rep.ric_level_holds and rep.head_tail_holds
    assert all(math.isfinite(getattr(rep, k)) and getattr(rep, k) > 0 for k in ("C1", "C2", "C1p", "C2p"))


@pytest.mark.parametrize("kw", [dict(p=0), dict(p=1.1), dict(a=1.0), dict(r=0), dict(delta=1.0),
                                dict(delta=-0.1), dict(eps_A=-1)])
def test_inputs_validation(kw):
    args = dict(p=0.5, a=2.0, r=2, delta=0.1)
    args.update(kw)
    with pytest.raises(ValueError):
        TheoryInputs.uniform(**args)


def test_report_outputs(tmp_path):
    rep = evaluate(TheoryInputs.uniform(0.5, 2, 6, 0.1, eps_A=0.01), MatrixStats(0, 0, 10, 0))
    text = format_report(rep)
    assert "bound_frobenius_p" in text and re.search(r"^ric_level_holds +yes$", text, re.M)
    path = tmp_path / "t.csv"
    write_reports_csv(path, [rep, rep])
    rows = list(csv.reader(open(path)))
    assert rows[0][:3] == ["p", "a", "r"] and len(rows) == 3
    assert float(rows[1][rows[0].index("C1")]) == rep.C1
