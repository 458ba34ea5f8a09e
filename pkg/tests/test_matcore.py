import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from schatten_recovery.matcore import (as_matrix, best_rank_r, derive_seed, frobenius,
                                       gaussian_matrix, low_rank_product, max_abs, schatten_p,
                                       singular_values, svd, unvec, vec)
from schatten_recovery.verify import block_orthogonal_pair

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda shape: arrays(np.float64, shape, elements=finite))


def eig_singular_values(M):
    # independent route: square roots of the eigenvalues of M^T M or M M^T
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    return np.sqrt(np.clip(np.sort(np.linalg.eigvalsh(G))[::-1], 0.0, None))


@given(matrices)
def test_svd_reconstructs_and_is_orthogonal(M):
    f = svd(M)
    scale = max(1.0, max_abs(M))
    assert np.allclose(f.reconstruct(), M, atol=1e-11 * scale)
    assert np.allclose(f.U.T @ f.U, np.eye(M.shape[0]), atol=1e-12)
    assert np.allclose(f.V.T @ f.V, np.eye(M.shape[1]), atol=1e-12)
    assert np.all(np.diff(f.singular_values) <= 0)
    assert np.all(f.singular_values >= 0)


def test_singular_values_match_gram_eigenvalues(rng):
    for shape in [(5, 3), (3, 5), (6, 6), (1, 4)]:
        M = rng.standard_normal(shape)
        assert np.allclose(singular_values(M), eig_singular_values(M), atol=1e-10)


def test_svd_signs_are_canonical(rng):
    M = rng.standard_normal((5, 4))
    f = svd(M)
    g = svd(-M)
    for U in (f.U, g.U):
        for j in range(U.shape[1]):
            col = U[:, j]
            assert col[np.flatnonzero(np.abs(col) > 1e-14)[0]] > 0
    assert np.array_equal(svd(M).U, f.U)


def test_svd_of_zero_and_diagonal():
    f = svd(np.zeros((3, 2)))
    assert np.all(f.singular_values == 0)
    assert np.allclose(svd(np.diag([3.0, 1.0, 2.0])).singular_values, [3, 2, 1])


@pytest.mark.parametrize("bad", [np.array([1.0, 2.0]), np.array([[np.nan, 1.0]]),
                                 np.array([[np.inf]]), np.zeros((0, 3))])
def test_as_matrix_rejects(bad):
    with pytest.raises(ValueError):
        as_matrix(bad)


def test_vec_is_column_major():
    M = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert vec(M).tolist() == [1, 3, 5, 2, 4, 6]
    assert np.array_equal(unvec(vec(M), 3, 2), M)


@given(matrices, st.sampled_from([0.1, 0.3, 0.5, 0.7, 1.0]))
def test_schatten_p_matches_trace_form(M, p):
    # trace((M^T M)^{p/2}) from an eigendecomposition
    ev = np.linalg.eigvalsh(M.T @ M)
    cutoff = max(M.shape) * np.finfo(float).eps * max(np.sqrt(max(ev.max(), 0.0)), 0.0)
    s = np.sqrt(np.clip(ev, 0.0, None))
    s = s[s > max(cutoff, 1e-7 * max(s.max(), 1e-300))]
    ref = float(np.sum(s**p))
    got = schatten_p(M, p)
    # singular values near the cutoff can only move the sum by a cutoff-sized term
    assert got == pytest.approx(ref, rel=1e-6, abs=len(ev) * (1e-7 * max(s.max(initial=0), 1.0)) ** p)


def test_schatten_p_examples():
    assert schatten_p(np.diag([4.0, 1.0]), 0.5) == pytest.approx(3.0)
    assert schatten_p(np.diag([3.0, -2.0]), 1.0) == pytest.approx(5.0)
    assert schatten_p(np.zeros((2, 3)), 0.3) == 0.0
    with pytest.raises(ValueError):
        schatten_p(np.eye(2), 1.5)
    with pytest.raises(ValueError):
        schatten_p(np.eye(2), 0.0)


def test_schatten_p_ignores_rounding_singular_values(rng):
    B = low_rank_product(8, 8, 2, 3)
    s = singular_values(B)
    assert schatten_p(B, 0.1) == pytest.approx(np.sum(s[:2] ** 0.1), rel=1e-12)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7, 1.0])
def test_block_orthogonal_additivity(p, rng):
    for _ in range(50):
        X, Y = block_orthogonal_pair(7, 6, 2, 2, rng)
        assert np.allclose(X.T @ Y, 0, atol=1e-12) and np.allclose(X @ Y.T, 0, atol=1e-12)
        assert abs(schatten_p(X + Y, p) - schatten_p(X, p) - schatten_p(Y, p)) < 1e-10


@given(st.integers(2, 8), st.integers(2, 8), st.integers(1, 8), st.sampled_from(np.arange(1, 11) / 10),
       st.integers(0, 2**32 - 1))
def test_rank_restricted_holder(m, n, r, p, seed):
    r = min(r, m, n)
    B = low_rank_product(m, n, r, seed)
    assert schatten_p(B, p) <= r ** (1 - p / 2) * frobenius(B) ** p + 1e-10


def test_best_rank_r_is_eckart_young(rng):
    M = rng.standard_normal((6, 5))
    s = singular_values(M)
    for r in range(1, 5):
        B = best_rank_r(M, r)
        assert np.linalg.matrix_rank(B) == r
        assert frobenius(M - B) == pytest.approx(np.sqrt(np.sum(s[r:] ** 2)), rel=1e-10)
        # never beaten by random rank-r candidates
        for _ in range(20):
            C = rng.standard_normal((6, r)) @ rng.standard_normal((r, 5))
            assert frobenius(M - C) >= frobenius(M - B) - 1e-12
    assert np.array_equal(best_rank_r(M, 5), M)
    assert best_rank_r(M, 9) is not M
    with pytest.raises(ValueError):
        best_rank_r(M, 0)


def test_low_rank_product_rank_and_determinism():
    X = low_rank_product(30, 30, 6, 7)
    assert np.linalg.matrix_rank(X) == 6
    assert np.array_equal(X, low_rank_product(30, 30, 6, 7))
    assert not np.array_equal(X, low_rank_product(30, 30, 6, 8))
    with pytest.raises(ValueError):
        low_rank_product(3, 3, 4, 0)


def test_gaussian_matrix_moments_and_seed():
    G = gaussian_matrix(400, 500, mean=1.0, stddev=2.0, seed=5)
    assert G.mean() == pytest.approx(1.0, abs=0.02)
    assert G.std() == pytest.approx(2.0, rel=0.01)
    assert np.array_equal(G, gaussian_matrix(400, 500, 1.0, 2.0, seed=5))
    assert np.all(gaussian_matrix(2, 3, mean=4.0, stddev=0.0) == 4.0)
    with pytest.raises(ValueError):
        gaussian_matrix(2, 2, stddev=-1.0)


def test_derive_seed_is_deterministic_and_key_sensitive():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, 2), derive_seed(1, 3), derive_seed(2, 2), derive_seed(1, 2, 0)}) == 4
    assert 0 <= derive_seed(0) < 2**64
