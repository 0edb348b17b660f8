import numpy as np
import pytest
from hypothesis import given, strategies as st

from _util import synthetic_cal
from fdtclosure.calibrate import predict_fast_stats, symmetrize_blocks
from fdtclosure.closure import ClosureKind, ClosureSystem, reduced_rhs, zero_order_rhs
from fdtclosure.integrate import rk4_step
from fdtclosure.model import (ModelParams, averaged_coupling_term, coupling_fields,
                              rescaled_slow_rhs)

P = ModelParams(N_x=5, J=3, a=0.4, b=0.8, c=-0.3, d=0.3, xbar=2.0, beta_x=2.8, ybar=2.8,
                beta_y=5.1)
seeds = st.integers(0, 2 ** 31)


def test_kind_parse():
    assert ClosureKind.parse("reduced") is ClosureKind.Reduced
    assert ClosureKind.parse("ZeroOrder") is ClosureKind.ZeroOrder
    with pytest.raises(ValueError):
        ClosureKind.parse("quadratic")


@given(seeds)
def test_no_slow_coupling_gives_uncoupled(seed):
    rng = np.random.default_rng(seed)
    p = P.with_(lambda_y=0.0)
    cal = synthetic_cal(p, rng)
    x = rng.normal(size=p.N_x)
    assert np.array_equal(reduced_rhs(x, cal, p), rescaled_slow_rhs(x, p))
    assert np.array_equal(zero_order_rhs(x, cal, p), rescaled_slow_rhs(x, p))


@given(seeds)
def test_zero_perturbation_collapses(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=P.N_x)
    cal = synthetic_cal(P, rng, fields=coupling_fields(x, P, fast_time=True))
    assert np.array_equal(reduced_rhs(x, cal, P), zero_order_rhs(x, cal, P))


@given(seeds)
def test_unit_reference_statistics_vanish(seed):
    rng = np.random.default_rng(seed)
    cal = synthetic_cal(P, rng, zbar=np.zeros(P.N_y), sigma_diag=np.ones(P.N_y))
    x = rng.normal(size=P.N_x)
    assert np.array_equal(zero_order_rhs(x, cal, P), rescaled_slow_rhs(x, P))


def test_zero_order_closure_independent_of_x(rng):
    # with b = d = 0 the prefactors (a + b x), (c + d x) do not depend on x
    p = P.with_(b=0.0, d=0.0)
    cal = synthetic_cal(p, rng)
    x1, x2 = rng.normal(size=(2, p.N_x))
    t1 = zero_order_rhs(x1, cal, p) - rescaled_slow_rhs(x1, p)
    t2 = zero_order_rhs(x2, cal, p) - rescaled_slow_rhs(x2, p)
    np.testing.assert_allclose(t1, t2, atol=1e-13)


def test_linear_coupling_affine(rng):
    p = P.with_(a=1.0, b=0.0, c=0.0, d=0.0)
    cal = synthetic_cal(p, rng)
    cal.Hdiag_star = np.zeros(p.N_y)  # H(x) vanishes for this coupling
    x1, x2 = rng.normal(size=(2, p.N_x))

    def term(x):
        return reduced_rhs(x, cal, p) - rescaled_slow_rhs(x, p)

    np.testing.assert_allclose(term(x1) + term(x2), 2 * term(0.5 * (x1 + x2)), atol=1e-12)
    zbar = cal.zbar_star + cal.R_hz @ (p.lambda_x * np.repeat(x1, p.J) - cal.h_star)
    expect = -p.lambda_y / p.J * zbar.reshape(p.N_x, p.J).sum(axis=1)
    np.testing.assert_allclose(term(x1), expect, atol=1e-12)


@given(seeds)
def test_recomposition(seed):
    rng = np.random.default_rng(seed)
    cal = synthetic_cal(P, rng, sigma_diag=np.full(P.N_y, 5.0), scale=0.01)
    x = rng.normal(size=P.N_x)
    f = coupling_fields(x, P, fast_time=True)
    dh, dH = f.h - cal.h_star, f.Hdiag - cal.Hdiag_star
    pvec = dh + dH * cal.zbar_star
    zbar = cal.zbar_star + cal.R_hz @ pvec + cal.R_Hz @ dH
    sig = cal.sigma_star_diag + cal.R_hS @ pvec + cal.R_HS @ dH
    diff = (averaged_coupling_term(x, zbar, sig, P)
            - averaged_coupling_term(x, cal.zbar_star, cal.sigma_star_diag, P))
    np.testing.assert_allclose(reduced_rhs(x, cal, P) - zero_order_rhs(x, cal, P), diff,
                               atol=1e-12)


def _symmetric_cal(p, rng):
    cal = synthetic_cal(p, rng, zbar=np.full(p.N_y, 0.2), sigma_diag=np.full(p.N_y, 1.1))
    block = rng.normal(size=p.J)
    cal.h_star = np.tile(block, p.N_x)
    cal.Hdiag_star = np.tile(0.1 * block, p.N_x)
    for name in ("R_hz", "R_Hz", "R_hS", "R_HS"):
        setattr(cal, name, symmetrize_blocks(getattr(cal, name), p.J))
    return cal


@given(seeds, st.integers(1, 4))
def test_translation_equivariance(seed, shift):
    rng = np.random.default_rng(seed)
    cal = _symmetric_cal(P, rng)
    x = rng.normal(size=P.N_x)
    for fn in (reduced_rhs, zero_order_rhs):
        np.testing.assert_allclose(fn(np.roll(x, shift), cal, P), np.roll(fn(x, cal, P), shift),
                                   atol=1e-12)


@pytest.mark.parametrize("kind, fn", [("reduced", reduced_rhs), ("zero_order", zero_order_rhs)])
def test_closure_system_matches_reference(kind, fn, rng):
    cal = synthetic_cal(P, rng)
    sysm = ClosureSystem(kind, cal, P)
    assert sysm.dim == P.N_x and sysm.name == kind
    x = rng.normal(size=P.N_x)
    np.testing.assert_allclose(sysm.rhs(x), fn(x, cal, P), rtol=1e-12, atol=1e-12)
    u = x.copy()
    sysm.advance(u, 5e-3, 50)
    v = x.copy()
    for _ in range(50):
        v = rk4_step(lambda y: fn(y, cal, P), v, 5e-3)
    np.testing.assert_allclose(u, v, rtol=1e-10, atol=1e-12)


def test_negative_variance_clamped_and_counted(rng):
    cal = synthetic_cal(P, rng, sigma_diag=np.full(P.N_y, 0.01), scale=0.0)
    cal.R_hS = -np.eye(P.N_y)
    x = rng.normal(size=P.N_x) + 2.0
    zbar, sig = predict_fast_stats(x, cal, P)
    assert (sig < 0).any()
    expect = rescaled_slow_rhs(x, P) + averaged_coupling_term(x, zbar, np.maximum(sig, 0), P)
    np.testing.assert_allclose(reduced_rhs(x, cal, P), expect, atol=1e-12)
    sysm = ClosureSystem(ClosureKind.Reduced, cal, P)
    np.testing.assert_allclose(sysm.rhs(x), expect, atol=1e-12)
    assert sysm.clamps == int((sig < 0).sum())
    assert ClosureSystem("zero_order", cal, P).clamps == 0
