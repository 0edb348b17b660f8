"""Two-scale rescaled Lorenz 96 system with quadratic slow-fast coupling.

Slow variables ``x`` (length ``N_x``) and fast variables ``y`` (length
``N_y = N_x * J``) evolve as::

    dx_i/dt = x_{i-1}(x_{i+1} - x_{i-2}) + (xbar (x_{i+1} - x_{i-2}) - x_i) / beta_x
              + (F_x - xbar) / beta_x**2
              - lambda_y / J * sum_j [(a + b x_i) y_ij + (c + d x_i)(y_ij**2 - 1)]

    dy_m/dt = (1/eps) [y_{m+1}(y_{m-1} - y_{m+2}) + (ybar (y_{m-1} - y_{m+2}) - y_m) / beta_y
                       + (F_y - ybar) / beta_y**2]
              + lambda_x / eps * [(a + c y_m) x_i + (b + d y_m)(x_i**2 - 1)]

The fast variables live on one ring with flat index ``m = i*J + j``, so the
periodic conditions ``y_{i,j+J} = y_{i+1,j}`` and ``y_{i+N_x,j} = y_{i,j}``
hold automatically.

Two conventions exist for the fast coupling fields. In model time they carry
the factor ``lambda_x / eps``. The fast limiting system used for calibration
is written in its own time ``tau = t / eps``; there the fields carry
``lambda_x`` and the Lorenz bracket has no ``1/eps`` prefactor.
"""
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import kernels
from .errors import DimensionError, ParameterError, StateValidationError


@dataclass(frozen=True)
class ModelParams:
    """Scalars defining the rescaled two-scale model.

    ``xbar, beta_x`` and ``ybar, beta_y`` are the long-run mean and standard
    deviation of the uncoupled, unrescaled Lorenz models at forcings ``F_x``
    and ``F_y``; see :func:`fdtclosure.calibrate.calibrate_rescaling`.
    """

    N_x: int = 20
    J: int = 4
    eps: float = 0.01
    F_x: float = 6.0
    F_y: float = 12.0
    lambda_x: float = 0.3
    lambda_y: float = 0.3
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    xbar: float = 0.0
    beta_x: float = 1.0
    ybar: float = 0.0
    beta_y: float = 1.0

    def __post_init__(self):
        if int(self.N_x) != self.N_x or int(self.J) != self.J:
            raise ParameterError("N_x and J must be integers")
        if self.N_x < 4:
            raise ParameterError(f"N_x must be >= 4, got {self.N_x}")
        if self.J < 1 or self.N_x * self.J < 4:
            raise ParameterError(f"N_y = N_x*J must be >= 4, got {self.N_x * self.J}")
        if not self.eps > 0:
            raise ParameterError("eps must be positive")
        if not (self.beta_x > 0 and self.beta_y > 0):
            raise ParameterError("beta_x and beta_y must be positive")
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ParameterError(f"{f.name} must be finite")

    @property
    def N_y(self):
        return self.N_x * self.J

    @property
    def coupling(self):
        return (self.a, self.b, self.c, self.d)

    def packed(self):
        """Parameter vector in the layout the kernels expect."""
        return np.array([self.eps, self.F_x, self.F_y, self.lambda_x, self.lambda_y,
                         self.a, self.b, self.c, self.d,
                         self.xbar, self.beta_x, self.ybar, self.beta_y], dtype=np.float64)

    def to_dict(self):
        return asdict(self)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class SystemState:
    """Slow vector ``x`` and flat fast vector ``y``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)

    def validate(self, p):
        if self.x.shape != (p.N_x,) or self.y.shape != (p.N_y,):
            raise DimensionError(
                f"state shapes {self.x.shape}, {self.y.shape} do not match "
                f"N_x={p.N_x}, N_y={p.N_y}")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise StateValidationError("state contains non-finite entries")
        return self

    def as_vector(self):
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_vector(cls, u, p):
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (p.N_x + p.N_y,):
            raise DimensionError(f"vector of length {u.shape} cannot hold N_x+N_y={p.N_x + p.N_y}")
        return cls(u[:p.N_x].copy(), u[p.N_x:].copy())

    def rotated(self, shift, p):
        """Shift slow indices by ``shift`` and fast indices by ``shift*J``."""
        return SystemState(np.roll(self.x, shift), np.roll(self.y, shift * p.J))


@dataclass
class CouplingFields:
    """Additive forcing ``h`` and diagonal ``Hdiag`` of the fast-side coupling."""

    h: np.ndarray
    Hdiag: np.ndarray


def _finite_vector(v, name, min_len=None):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional")
    if min_len is not None and v.shape[0] < min_len:
        raise DimensionError(f"{name} must have length >= {min_len}, got {v.shape[0]}")
    if not np.isfinite(v).all():
        raise StateValidationError(f"{name} contains non-finite entries")
    return v


def full_rhs(state, p):
    """Time derivative of the full two-scale model.

    Returns
    -------
    SystemState
        ``(dx/dt, dy/dt)``.
    """
    state.validate(p)
    u = state.as_vector()
    du = np.empty_like(u)
    kernels.full_rhs(u, p.packed(), p.N_x, p.J, du, np.empty(u.shape[0] + 6))
    return SystemState(du[:p.N_x], du[p.N_x:])


def uncoupled_unrescaled_rhs(v, F):
    """Standard Lorenz 96 tendency ``v_{i-1}(v_{i+1} - v_{i-2}) - v_i + F``."""
    v = _finite_vector(v, "v", min_len=4)
    dv = np.empty_like(v)
    kernels.l96_rhs(v, float(F), dv, np.empty(v.shape[0] + 3))
    return dv


def rescaled_slow_rhs(x, p):
    """Slow tendency without coupling (``lambda_y = 0``)."""
    x = np.asarray(x, dtype=np.float64)
    diff = np.roll(x, -1) - np.roll(x, 2)
    return (np.roll(x, 1) * diff + (p.xbar * diff - x) / p.beta_x
            + (p.F_x - p.xbar) / p.beta_x ** 2)


def rescaled_fast_bracket(y, p):
    """Uncoupled fast tendency in fast time (the bracket without ``1/eps``)."""
    y = np.asarray(y, dtype=np.float64)
    diff = np.roll(y, 1) - np.roll(y, -2)
    return (np.roll(y, -1) * diff + (p.ybar * diff - y) / p.beta_y
            + (p.F_y - p.ybar) / p.beta_y ** 2)


def coupling_energy_terms(state, p):
    """The two scale-exchange contributions to ``dE/dt``, returned separately.

    With ``E = lambda_x/(2 eps) sum x**2 + lambda_y/(2J) sum y**2`` the slow
    coupling contributes ``-lambda_x lambda_y/(eps J) S`` and the fast
    coupling ``+lambda_x lambda_y/(eps J) S``, where
    ``S = sum (a x y + b x**2 y + c x y**2 + d x**2 y**2)``. Both are computed
    from the coupling terms of the tendencies rather than from ``S``.

    The ``-1`` offsets inside the coupling, ``(c + d x_i)`` in the slow
    equation and ``(b + d y)`` in the fast one, depend on a single scale
    only. They act as extra forcing and damping of that scale, move no
    energy between the scales, and are left out here.
    """
    state.validate(p)
    x = state.x
    y = state.y.reshape(p.N_x, p.J)
    xc = x[:, None]
    slow_coupling = -p.lambda_y / p.J * ((p.a + p.b * xc) * y
                                         + (p.c + p.d * xc) * y * y).sum(axis=1)
    fast_coupling = p.lambda_x / p.eps * ((p.a + p.c * y) * xc + (p.b + p.d * y) * xc * xc)
    slow_part = p.lambda_x / p.eps * np.dot(x, slow_coupling)
    fast_part = p.lambda_y / p.J * np.sum(y * fast_coupling)
    return slow_part, fast_part


def coupling_energy_rate(state, p):
    """Rate of change of the quadratic energy due to scale exchange (zero)."""
    slow_part, fast_part = coupling_energy_terms(state, p)
    return slow_part + fast_part


def coupling_fields(x, p, fast_time=False):
    """Coupling maps ``h(x)`` and ``diag H(x)`` expanded to the fast ring.

    ``h_m = k (a x_i + b x_i**2)`` and ``Hdiag_m = k (c x_i + d x_i**2)`` for
    ``m`` in block ``i``, with ``k = lambda_x / eps`` in model time or
    ``k = lambda_x`` when ``fast_time`` is set.
    """
    x = _finite_vector(x, "x")
    if x.shape != (p.N_x,):
        raise DimensionError(f"x must have length {p.N_x}")
    k = p.lambda_x if fast_time else p.lambda_x / p.eps
    xr = np.repeat(x, p.J)
    return CouplingFields(h=k * (p.a * xr + p.b * xr * xr),
                          Hdiag=k * (p.c * xr + p.d * xr * xr))


def fast_linear_terms(fields, p):
    """Per-site coefficient and offset of the fast limiting system.

    The limiting system in fast time is ``dz/dtau = bracket(z) + coef*z + off``
    with ``coef = Hdiag - lambda_x d`` and ``off = h - lambda_x b``: the
    x-independent ``-lambda_x (b + d z)`` part of the coupling stays with
    the nonlinear term ``g``.
    """
    h = np.asarray(fields.h, dtype=np.float64)
    H = np.asarray(fields.Hdiag, dtype=np.float64)
    if h.shape != (p.N_y,) or H.shape != (p.N_y,):
        raise DimensionError(f"coupling fields must have length N_y={p.N_y}")
    return H - p.lambda_x * p.d, h - p.lambda_x * p.b


def fast_limiting_rhs(z, fields, p):
    """``g(z) + Hdiag*z + h`` in fast time, for fields in the fast-time convention."""
    z = _finite_vector(z, "z")
    if z.shape != (p.N_y,):
        raise DimensionError(f"z must have length N_y={p.N_y}")
    coef, off = fast_linear_terms(fields, p)
    dz = np.empty_like(z)
    kernels.fast_rhs(z, coef, off, p.ybar, p.beta_y, p.F_y, dz, np.empty(z.shape[0] + 3))
    return dz


def averaged_coupling_term(x, zbar, sigma_diag, p):
    """Slow coupling averaged over Gaussian fast statistics.

    For each slow index ``i``::

        -lambda_y/J * sum_j [(a + b x_i) zbar_ij + (c + d x_i)(zbar_ij**2 + s_ij - 1)]

    with ``s = max(sigma_diag, 0)``. This is the exact expectation of the
    slow coupling when the fast variables have mean ``zbar`` and diagonal
    variances ``sigma_diag``.
    """
    x = np.asarray(x, dtype=np.float64)
    zbar = np.asarray(zbar, dtype=np.float64)
    s = np.maximum(np.asarray(sigma_diag, dtype=np.float64), 0.0)
    if x.shape != (p.N_x,) or zbar.shape != (p.N_y,) or s.shape != (p.N_y,):
        raise DimensionError("averaged_coupling_term: dimension mismatch")
    xc = x[:, None]
    zb = zbar.reshape(p.N_x, p.J)
    sd = s.reshape(p.N_x, p.J)
    acc = ((p.a + p.b * xc) * zb + (p.c + p.d * xc) * (zb * zb + sd - 1.0)).sum(axis=1)
    return -p.lambda_y / p.J * acc
