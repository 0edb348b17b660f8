"""Closed slow-variable models: first-order FDT reduced model and zero-order baseline."""
import enum

import numpy as np

from . import kernels
from .calibrate import predict_fast_stats
from .model import averaged_coupling_term, rescaled_slow_rhs


class ClosureKind(enum.Enum):
    Reduced = "reduced"
    ZeroOrder = "zero_order"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for k in cls:
            if value in (k.value, k.name):
                return k
        raise ValueError(f"unknown closure kind {value!r}")


def reduced_rhs(x, cal, p):
    """Slow tendency with fast statistics predicted by linear response at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    zbar, sig = predict_fast_stats(x, cal, p)
    return rescaled_slow_rhs(x, p) + averaged_coupling_term(x, zbar, sig, p)


def zero_order_rhs(x, cal, p):
    """Slow tendency with fast statistics frozen at ``(zbar*, diag Sigma*)``."""
    x = np.asarray(x, dtype=np.float64)
    return rescaled_slow_rhs(x, p) + averaged_coupling_term(x, cal.zbar_star,
                                                            cal.sigma_star_diag, p)


class ClosureSystem:
    """Integrable closed slow model backed by the compiled kernels.

    ``clamps`` counts RHS evaluations' negative predicted variances that were
    clamped to zero since construction.
    """

    def __init__(self, kind, cal, p):
        self.kind = ClosureKind.parse(kind)
        self.name = self.kind.value
        self.p = p
        self.cal = cal
        self.dim = p.N_x
        self.clamps = 0
        self._packed = p.packed()
        self._corrected = self.kind is ClosureKind.Reduced
        self._args = tuple(np.ascontiguousarray(a, dtype=np.float64) for a in (
            cal.zbar_star, cal.sigma_star_diag, cal.h_star, cal.Hdiag_star,
            cal.R_hz, cal.R_Hz, cal.R_hS, cal.R_HS))

    def rhs(self, x):
        x = np.asarray(x, dtype=np.float64)
        ny = self.p.N_y
        dx = np.empty_like(x)
        bufs = [np.empty(ny) for _ in range(4)]
        self.clamps += int(kernels.closure_rhs(x, self._packed, self.p.J, *self._args,
                                               self._corrected, *bufs, dx,
                                               np.empty(x.shape[0] + 3)))
        return dx

    def advance(self, x, dt, nsteps):
        self.clamps += int(kernels.advance_closure(x, self._packed, self.p.J, *self._args,
                                                   self._corrected, dt, nsteps))
