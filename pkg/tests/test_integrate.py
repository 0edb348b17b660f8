import numpy as np
import pytest

from fdtclosure.calibrate import calibrate_rescaling
from fdtclosure.errors import BlowUpError, ParameterError
from fdtclosure.integrate import (FullSystem, IntegrationPlan, UncoupledLorenz,
                                  default_initial_state, integrate_observed, record, rk4_step,
                                  sample_blocks)
from fdtclosure.model import ModelParams, rescaled_slow_rhs


def test_plan_invariants():
    for bad in (dict(dt=0), dict(t_burn=-1), dict(t_total=0), dict(sample_stride=0),
                dict(sample_stride=1.5)):
        kw = dict(dt=0.01, t_burn=0.0, t_total=1.0, sample_stride=1)
        kw.update(bad)
        with pytest.raises(ParameterError):
            IntegrationPlan(**kw)


def test_rk4_zero_rhs():
    z = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(rk4_step(lambda u: np.zeros_like(u), z, 0.1), z)


def test_rk4_decay_polynomial():
    z1 = rk4_step(lambda u: -u, np.array([1.0]), 0.1)
    assert z1[0] == pytest.approx(0.9048375, abs=1e-12)


def test_rk4_matrix_polynomial(rng):
    A = rng.normal(size=(4, 4))
    z0 = rng.normal(size=4)
    h = 0.05
    M = np.eye(4)
    term = np.eye(4)
    for k in range(1, 5):
        term = term @ (h * A) / k
        M = M + term
    np.testing.assert_allclose(rk4_step(lambda u: A @ u, z0, h), M @ z0, rtol=1e-14, atol=1e-15)


def test_rk4_order():
    dts = np.array([1e-2, 5e-3, 2.5e-3])
    errs = []
    for dt in dts:
        z = np.array([1.0])
        for _ in range(int(round(1 / dt))):
            z = rk4_step(lambda u: -u, z, dt)
        errs.append(abs(z[0] - np.exp(-1.0)))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 4) < 0.4


def test_rk4_blowup_carries_time():
    with pytest.raises(BlowUpError) as info:
        with np.errstate(over="ignore"):
            rk4_step(lambda u: u * 1e308, np.array([1e10]), 1.0, t=3.0)
    assert info.value.time == pytest.approx(4.0)


def test_observer_call_count():
    calls = []
    sys_ = UncoupledLorenz(8, 6.0)
    integrate_observed(sys_, np.full(8, 6.0) + 0.01 * np.arange(8),
                       IntegrationPlan(0.001, 0.0, 1.0, 10), lambda t, u: calls.append(t))
    assert len(calls) == 100
    assert calls[-1] == pytest.approx(1.0)


def test_determinism_and_blocks():
    p = ModelParams(N_x=4, J=2, a=1, b=0.5, c=0.2, d=0.1, xbar=2, beta_x=2.8, ybar=2.8,
                    beta_y=5.0)
    plan = IntegrationPlan(5e-5, 0.1, 0.5, 100, seed=3)
    u0 = default_initial_state(p, plan.seed).as_vector()
    a = record(FullSystem(p), u0, plan)
    b = record(FullSystem(p), u0, plan)
    assert a.shape == (plan.n_samples, 12)
    assert np.array_equal(a, b)
    stream = []
    integrate_observed(FullSystem(p), u0, plan, lambda t, u: stream.append(u.copy()))
    assert np.array_equal(np.array(stream), a)
    blocks = np.vstack([blk.copy() for blk in sample_blocks(FullSystem(p), u0, plan, block=7)])
    assert np.array_equal(blocks, a)


def test_blowup_in_advance_has_context():
    sys_ = UncoupledLorenz(6, 1e6)
    with pytest.raises(BlowUpError) as info:
        integrate_observed(sys_, 1e150 * np.arange(1.0, 7.0), IntegrationPlan(1.0, 0.0, 5.0, 1),
                           context="probe")
    assert "probe" in str(info.value)


def test_default_initial_state_golden():
    s = default_initial_state(ModelParams(N_x=4, J=1), 0)
    np.testing.assert_array_equal(s.x, [0.1369616873214543, -0.2302132862361297,
                                        -0.4590264760638053, -0.4834723644714709])
    np.testing.assert_array_equal(s.y, [0.3132702392002724, 0.4127555772777217,
                                        0.10663577576717986, 0.2294965609839984])
    s2 = default_initial_state(ModelParams(N_x=4, J=1), 0)
    assert np.array_equal(s.as_vector(), s2.as_vector())
    s3 = default_initial_state(ModelParams(N_x=4, J=1), 1)
    assert not np.array_equal(s.as_vector(), s3.as_vector())
    assert np.all(np.abs(s.as_vector()) <= 0.5)


def test_uncoupled_rescaled_slow_statistics():
    # rescaled uncoupled slow model has zero mean and unit variance, for
    # constants measured on the unrescaled model
    mean, std = calibrate_rescaling(6.0, 20, IntegrationPlan(0.005, 100.0, 10000.0, 10, seed=1))
    p = ModelParams(N_x=20, J=4, lambda_x=0, lambda_y=0, xbar=mean, beta_x=std)
    class Slow:
        dim = 20
        name = "slow"

        def advance(self, x, dt, n):
            for _ in range(n):
                x[:] = rk4_step(lambda v: rescaled_slow_rhs(v, p), x, dt)

    x = record(Slow(), np.random.default_rng(0).uniform(-0.5, 0.5, 20),
               IntegrationPlan(0.005, 20.0, 200.0, 10))
    assert abs(x.mean()) < 0.15
    assert abs(x.var() - 1) < 0.25


def test_short_horizon_dt_convergence():
    # halving dt barely moves the trajectory over one time unit
    p = ModelParams(a=1, b=0.8, c=0.3, d=0.3, xbar=2.01, beta_x=2.83, ybar=2.78, beta_y=5.06)
    u0 = default_initial_state(p, 0).as_vector()
    u1 = u0.copy()
    u2 = u0.copy()
    FullSystem(p).advance(u1, 5e-5, 2000)
    FullSystem(p).advance(u2, 2.5e-5, 4000)
    assert np.abs(u1[:p.N_x] - u2[:p.N_x]).max() < 1e-6
