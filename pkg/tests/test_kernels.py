"""Compiled and numpy kernels must agree; both are importable regardless of backend."""
import numpy as np
import pytest

from fdtclosure import kernels
from fdtclosure.model import ModelParams

P = ModelParams(N_x=6, J=3, a=0.5, b=-0.4, c=0.3, d=-0.2, xbar=2.0, beta_x=2.8, ybar=2.8,
                beta_y=5.1)


def test_public_names_follow_backend():
    ref = kernels._full_rhs_nb if kernels.USE_NUMBA else kernels._full_rhs_np
    assert kernels.full_rhs is ref
    assert kernels.BACKEND in ("numba", "numpy")


def test_full_model(rng):
    u = rng.normal(size=P.N_x + P.N_y)
    pk = P.packed()
    d1, d2 = np.empty_like(u), np.empty_like(u)
    kernels._full_rhs_nb(u, pk, P.N_x, P.J, d1, np.empty(u.size + 6))
    kernels._full_rhs_np(u, pk, P.N_x, P.J, d2)
    np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-12)
    v1, v2 = u.copy(), u.copy()
    kernels._advance_full_nb(v1, pk, P.N_x, P.J, 1e-4, 200)
    kernels._advance_full_np(v2, pk, P.N_x, P.J, 1e-4, 200)
    np.testing.assert_allclose(v1, v2, rtol=1e-10, atol=1e-12)


def test_fast_limiting(rng):
    z = rng.normal(size=P.N_y)
    coef, off = rng.normal(size=(2, P.N_y))
    args = (coef, off, P.ybar, P.beta_y, P.F_y)
    d1, d2 = np.empty_like(z), np.empty_like(z)
    kernels._fast_rhs_nb(z, *args, d1, np.empty(z.size + 3))
    kernels._fast_rhs_np(z, *args, d2)
    np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-12)
    v1, v2 = z.copy(), z.copy()
    kernels._advance_fast_nb(v1, *args, 5e-3, 200)
    kernels._advance_fast_np(v2, *args, 5e-3, 200)
    np.testing.assert_allclose(v1, v2, rtol=1e-9, atol=1e-11)


def test_single_scale(rng):
    v = rng.normal(size=9)
    d1, d2 = np.empty_like(v), np.empty_like(v)
    kernels._l96_rhs_nb(v, 6.0, d1, np.empty(v.size + 3))
    kernels._l96_rhs_np(v, 6.0, d2)
    np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-12)
    w1, w2 = v.copy(), v.copy()
    kernels._advance_l96_nb(w1, 6.0, 5e-3, 200)
    kernels._advance_l96_np(w2, 6.0, 5e-3, 200)
    np.testing.assert_allclose(w1, w2, rtol=1e-9, atol=1e-11)


@pytest.mark.parametrize("corrected", [True, False])
def test_closure(rng, corrected):
    n = P.N_y
    zs, hs, Hs = rng.normal(size=(3, n))
    ss = rng.uniform(0.01, 0.2, n)  # small so that some variances get clamped
    mats = [0.3 * rng.normal(size=(n, n)) for _ in range(4)]
    x = rng.normal(size=P.N_x)
    args = (P.packed(), P.J, zs, ss, hs, Hs, *mats, corrected)
    bufs1 = [np.empty(n) for _ in range(4)]
    bufs2 = [np.empty(n) for _ in range(4)]
    d1, d2 = np.empty_like(x), np.empty_like(x)
    c1 = kernels._closure_rhs_nb(x, *args, *bufs1, d1, np.empty(x.size + 3))
    c2 = kernels._closure_rhs_np(x, *args, *bufs2, d2)
    assert c1 == c2
    if corrected:
        assert c1 > 0
    np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-12)
    y1, y2 = x.copy(), x.copy()
    k1 = kernels._advance_closure_nb(y1, *args, 5e-3, 100)
    k2 = kernels._advance_closure_np(y2, *args, 5e-3, 100)
    assert k1 == k2
    np.testing.assert_allclose(y1, y2, rtol=1e-9, atol=1e-11)


def test_lag_sums(rng):
    a, b = rng.normal(size=(2, 300, 4))
    s1 = kernels._lag_sums_nb(a, b, 20)
    s2 = kernels._lag_sums_np(a, b, 20)
    np.testing.assert_allclose(s1, s2, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(s2[3], (a[:-3] * b[3:]).sum(0), rtol=1e-12)


def test_ring_update(rng):
    nl1, k = 6, 3
    rings = [np.zeros((nl1, k)) for _ in range(2)]
    sums = [np.zeros((nl1, k)) for _ in range(2)]
    a, b = rng.normal(size=(2, 15, k))
    for t in range(15):
        kernels._ring_update_nb(rings[0], t % nl1, t, a[t], b[t], sums[0])
        kernels._ring_update_np(rings[1], t % nl1, t, a[t], b[t], sums[1])
    np.testing.assert_allclose(sums[0], sums[1], rtol=1e-12)
    np.testing.assert_allclose(sums[1], kernels._lag_sums_np(a, b, nl1 - 1), rtol=1e-12)
