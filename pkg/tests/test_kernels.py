import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schatten_recovery import _kernels as K

values = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=40)
lams = st.floats(1e-4, 10.0)
ps = st.sampled_from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])


@given(values, lams, ps)
def test_backends_agree(v, lam, p):
    a = K.gst_numba(np.array(v), lam, p)
    b = K.gst_numpy(np.array(v), lam, p)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@given(values, lams, ps)
def test_output_sign_and_shrinkage(v, lam, p):
    v = np.array(v)
    w = K.gst(v, lam, p)
    assert np.all(np.abs(w) <= np.abs(v))
    assert np.all(w * v >= 0)
    assert np.all(w[np.abs(v) <= K.gst_threshold(lam, p)] == 0)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_threshold_is_the_zero_boundary(p):
    lam = 0.7
    tau = K.gst_threshold(lam, p)
    assert K.gst_scalar(tau * (1 - 1e-9), lam, p) == 0.0
    w = K.gst_scalar(tau * (1 + 1e-6), lam, p)
    assert w > 0
    # at the threshold the nonzero stationary point ties with zero
    obj = lam * w**p + 0.5 * (w - tau * (1 + 1e-6)) ** 2
    assert obj <= 0.5 * (tau * (1 + 1e-6)) ** 2


def test_known_values():
    assert K.gst_scalar(3.0, 1.0, 1.0) == 2.0
    assert K.gst_scalar(-3.0, 1.0, 1.0) == -2.0
    assert K.gst_scalar(0.5, 1.0, 1.0) == 0.0
    assert K.gst_scalar(0.0, 1.0, 0.5) == 0.0
    # p = 1/2 stationary point solves w + lam/(2 sqrt(w)) = v
    w = K.gst_scalar(2.0, 1.0, 0.5)
    assert w + 1.0 / (2.0 * np.sqrt(w)) == pytest.approx(2.0, abs=1e-12)
    assert K.gst_threshold(1.0, 1.0) == 1.0
    # p = 1/2: tau = 1.5 * lam**(2/3)
    assert K.gst_threshold(1.0, 0.5) == pytest.approx(1.5)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_golden_section_matches_fixed_point(p):
    lam, a = 0.3, 4.0
    w_fp = K.gst_scalar(a, lam, p)
    w_gs = K.golden_section(a, lam, p)
    assert w_gs == pytest.approx(w_fp, abs=1e-7)


def test_fixed_point_cap_falls_back_to_golden_section():
    # one fixed-point step cannot converge; the bracketed search takes over
    lam, p, a = 0.5, 0.5, 3.0
    w_capped = K.gst_scalar(a, lam, p, max_iter=1)
    assert w_capped == pytest.approx(K.gst_scalar(a, lam, p), abs=1e-7)
    vec = K.gst_numpy(np.array([a, -a]), lam, p, max_iter=1)
    assert vec == pytest.approx([w_capped, -w_capped], abs=1e-7)


@pytest.mark.parametrize("flag,expected", [("numpy", "numpy"), ("nojit", "numpy"),
                                           ("numba", "numba"), ("", "numba")])
def test_backend_env_flag(flag, expected):
    env = dict(os.environ, SCHATTEN_RECOVERY_BACKEND=flag)
    out = subprocess.run([sys.executable, "-c",
                          "from schatten_recovery import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_unknown_backend_is_rejected():
    env = dict(os.environ, SCHATTEN_RECOVERY_BACKEND="cuda")
    out = subprocess.run([sys.executable, "-c", "import schatten_recovery"], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0 and "SCHATTEN_RECOVERY_BACKEND" in out.stderr
