"""Fixed-step RK4 integration with burn-in and strided observation."""
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import BlowUpError, ParameterError
from .model import SystemState, fast_linear_terms


@dataclass(frozen=True)
class IntegrationPlan:
    """Step size, burn-in, observed duration and sampling stride.

    ``t_total`` is the averaging window: the observer is called
    ``floor(t_total / (dt * sample_stride))`` times after ``t_burn``.
    """

    dt: float
    t_burn: float
    t_total: float
    sample_stride: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if self.t_burn < 0:
            raise ParameterError("t_burn must be non-negative")
        if not self.t_total > 0:
            raise ParameterError("t_total must be positive")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ParameterError("sample_stride must be an integer >= 1")

    @property
    def burn_steps(self):
        return int(round(self.t_burn / self.dt))

    @property
    def n_samples(self):
        # small slack so that e.g. 1 / (0.001 * 10) counts 100 samples, not 99
        return int(math.floor(self.t_total / (self.dt * self.sample_stride) * (1 + 1e-12)))

    @property
    def sample_dt(self):
        return self.dt * self.sample_stride

    def to_dict(self):
        return asdict(self)


def rk4_step(rhs, state, dt, t=0.0):
    """One classical Runge-Kutta step of ``dz/dt = rhs(z)``.

    Raises
    ------
    BlowUpError
        If the updated state is not finite.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    z = np.asarray(state, dtype=np.float64)
    k1 = rhs(z)
    k2 = rhs(z + 0.5 * dt * k1)
    k3 = rhs(z + 0.5 * dt * k2)
    k4 = rhs(z + dt * k3)
    out = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        raise BlowUpError(t + dt, _max_abs(z))
    return out


def _max_abs(u):
    u = np.asarray(u)
    finite = u[np.isfinite(u)]
    return float(np.abs(finite).max()) if finite.size else float("nan")


class FullSystem:
    """Full two-scale model on the flat state ``[x, y]``."""

    name = "full"

    def __init__(self, p):
        self.p = p
        self._packed = p.packed()
        self.dim = p.N_x + p.N_y

    def rhs(self, u):
        du = np.empty_like(u)
        kernels.full_rhs(u, self._packed, self.p.N_x, self.p.J, du, np.empty(u.shape[0] + 6))
        return du

    def advance(self, u, dt, nsteps):
        kernels.advance_full(u, self._packed, self.p.N_x, self.p.J, dt, nsteps)


class FastLimitingSystem:
    """Fast equations in fast time with the coupling fields frozen."""

    name = "fast"

    def __init__(self, p, fields):
        self.p = p
        self.fields = fields
        self.coef, self.off = fast_linear_terms(fields, p)
        self.dim = p.N_y

    def rhs(self, z):
        dz = np.empty_like(z)
        kernels.fast_rhs(z, self.coef, self.off, self.p.ybar, self.p.beta_y, self.p.F_y, dz,
                         np.empty(z.shape[0] + 3))
        return dz

    def advance(self, z, dt, nsteps):
        kernels.advance_fast(z, self.coef, self.off, self.p.ybar, self.p.beta_y, self.p.F_y,
                             dt, nsteps)


class UncoupledLorenz:
    """Unrescaled single-scale Lorenz 96 with forcing ``F``."""

    name = "lorenz96"

    def __init__(self, N, F):
        if N < 4:
            raise ParameterError("Lorenz 96 needs at least 4 variables")
        self.N = int(N)
        self.F = float(F)
        self.dim = self.N

    def rhs(self, v):
        dv = np.empty_like(v)
        kernels.l96_rhs(v, self.F, dv, np.empty(v.shape[0] + 3))
        return dv

    def advance(self, v, dt, nsteps):
        kernels.advance_l96(v, self.F, dt, nsteps)


def _checked_advance(system, u, dt, nsteps, t, context):
    good = u.copy()
    system.advance(u, dt, nsteps)
    if not np.isfinite(u).all():
        raise BlowUpError(t + nsteps * dt, _max_abs(good), context or system.name)


def _burn_in(system, u, plan, context):
    t = 0.0
    remaining = plan.burn_steps
    while remaining > 0:
        n = min(plan.sample_stride, remaining)
        _checked_advance(system, u, plan.dt, n, t, context)
        t += n * plan.dt
        remaining -= n
    return t


def integrate_observed(system, initial_state, plan, observer=None, context=""):
    """Burn in, then advance and call ``observer(t, u)`` every stride.

    ``u`` handed to the observer is the live state buffer; observers that
    keep it must copy. Returns the final state.
    """
    u = np.array(initial_state, dtype=np.float64)
    t = _burn_in(system, u, plan, context)
    for _ in range(plan.n_samples):
        _checked_advance(system, u, plan.dt, plan.sample_stride, t, context)
        t += plan.sample_dt
        if observer is not None:
            observer(t, u)
    return u


def sample_blocks(system, initial_state, plan, block=20000, context=""):
    """Yield the samples :func:`integrate_observed` would observe, in blocks.

    Blocks have shape ``(<=block, dim)``. The buffer is reused between
    yields, so consumers must finish with a block before asking for the next.
    """
    u = np.array(initial_state, dtype=np.float64)
    t = _burn_in(system, u, plan, context)
    n = plan.n_samples
    buf = np.empty((max(1, min(block, n)), u.shape[0]))
    k = 0
    for _ in range(n):
        _checked_advance(system, u, plan.dt, plan.sample_stride, t, context)
        t += plan.sample_dt
        buf[k] = u
        k += 1
        if k == buf.shape[0]:
            yield buf
            k = 0
    if k:
        yield buf[:k]


def record(system, initial_state, plan, context=""):
    """All observed samples as one ``(n_samples, dim)`` array."""
    out = np.empty((plan.n_samples, system.dim))
    k = 0
    for blk in sample_blocks(system, initial_state, plan, context=context):
        out[k:k + len(blk)] = blk
        k += len(blk)
    return out


def default_initial_state(p, seed):
    """Entries uniform on [-0.5, 0.5] from a PCG64 stream seeded by ``seed``."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 0.5, p.N_x + p.N_y)
    return SystemState(u[:p.N_x], u[p.N_x:])
