"""Reference statistics and quasi-Gaussian response operators.

The closure needs, for the fast limiting system with coupling fields frozen
at their long-run averages ``(h*, H*)``, how the fast mean and the fast
variances respond to small changes of ``h`` and of ``diag H``. Under the
quasi-Gaussian approximation each response is a lag-integrated correlation
of the unperturbed fast trajectory. With ``dz(t) = z(t) - zbar`` and the
whitened-back signal ``w(t) = Sigma^{-1} dz(t)`` we accumulate::

    A[i, k] = int_0^S <dz_i(t+s)    w_k(t)>          ds     (h    -> mean)
    B[i, k] = int_0^S <dz_i(t+s)    w_k(t) dz_k(t)>  ds     (diag H -> mean)
    C[i, k] = int_0^S <dz_i(t+s)**2 w_k(t)>          ds     (h    -> variance)
    D[i, k] = int_0^S <dz_i(t+s)**2 w_k(t) dz_k(t)> - Sigma_ii ds

Only diagonal perturbation and response slots are kept, which makes all
four objects ``N_y x N_y`` matrices. The lag integral is a trapezoid rule
on the sample grid, computed as a forward window sum of each signal so the
cost per sample is ``O(N_y**2)`` rather than ``O(N_y**2 * n_lags)``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, DimensionError, InsufficientSamplesError
from .integrate import FastLimitingSystem, UncoupledLorenz, sample_blocks
from .model import CouplingFields, coupling_fields
from .stats import LAG_MAX, LAG_STEP, MomentAccumulator, _lag_count

EIG_FLOOR = 1e-8


def calibrate_rescaling(F, N, plan, seed=None):
    """Long-run pooled mean and standard deviation of unrescaled Lorenz 96.

    Raises
    ------
    DegenerateVarianceError
        If the trajectory settles onto a fixed point (e.g. ``F = 0``).
    """
    system = UncoupledLorenz(N, F)
    rng = np.random.default_rng(plan.seed if seed is None else seed)
    v0 = F + rng.uniform(-0.5, 0.5, N)
    acc = MomentAccumulator(1, covariance=False)
    for blk in sample_blocks(system, v0, plan, context=f"rescaling F={F} N={N}"):
        acc.update(blk.reshape(-1, 1))
    mean, var = acc.finalize()
    std = float(np.sqrt(max(var[0], 0.0)))
    if not std > 1e-6 * max(1.0, abs(F)):
        raise DegenerateVarianceError(
            f"Lorenz 96 with F={F}, N={N} has collapsed variance (std={std:.3g})")
    return float(mean[0]), std


def regularized_inverse(sigma, floor=EIG_FLOOR):
    """Inverse of a symmetric matrix with eigenvalues floored at ``floor * max``.

    Returns ``(inverse, n_floored)``.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    sym = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sym)
    lim = floor * max(vals.max(), 0.0)
    if not lim > 0:
        raise DegenerateVarianceError("covariance has no positive eigenvalue")
    n_floored = int(np.sum(vals < lim))
    vals = np.maximum(vals, lim)
    inv = (vecs / vals) @ vecs.T
    return 0.5 * (inv + inv.T), n_floored


@dataclass
class ReferenceStats:
    zbar_star: np.ndarray
    sigma_star: np.ndarray
    h_star: np.ndarray
    Hdiag_star: np.ndarray
    x_mean: np.ndarray
    n_samples: int


class ReferenceAccumulator:
    """Observer for full-model samples ``u = [x, y]``.

    Tracks the fast mean and covariance and the time averages of the
    coupling fields in the fast-time convention (factor ``lambda_x``).
    """

    def __init__(self, p):
        self.p = p
        self.fast = MomentAccumulator(p.N_y, covariance=True)
        self.slow = MomentAccumulator(p.N_x, covariance=False)
        self.h_sum = np.zeros(p.N_y)
        self.H_sum = np.zeros(p.N_y)
        self.count = 0

    def update(self, block):
        block = np.atleast_2d(block)
        p = self.p
        x = block[:, :p.N_x]
        y = block[:, p.N_x:]
        self.fast.update(y)
        self.slow.update(x)
        xr = np.repeat(x, p.J, axis=1)
        self.h_sum += (p.lambda_x * (p.a * xr + p.b * xr * xr)).sum(axis=0)
        self.H_sum += (p.lambda_x * (p.c * xr + p.d * xr * xr)).sum(axis=0)
        self.count += block.shape[0]

    def finalize(self):
        if self.count < 2:
            raise InsufficientSamplesError("reference statistics need at least two samples")
        zbar, sigma = self.fast.finalize()
        x_mean, _ = self.slow.finalize()
        return ReferenceStats(zbar, sigma, self.h_sum / self.count, self.H_sum / self.count,
                              x_mean, self.count)


def compute_reference(feed, p):
    """Fast mean/covariance and mean coupling fields from full-model samples.

    ``feed`` is an ``(n, N_x + N_y)`` array or an iterable of such blocks.
    """
    acc = ReferenceAccumulator(p)
    for blk in _blocks(feed):
        if blk.shape[1] != p.N_x + p.N_y:
            raise DimensionError("full-model samples must have N_x + N_y columns")
        acc.update(blk)
    return acc.finalize()


def _blocks(feed):
    if isinstance(feed, np.ndarray):
        yield np.atleast_2d(feed)
    else:
        for blk in feed:
            yield np.atleast_2d(np.asarray(blk, dtype=np.float64))


@dataclass
class ResponseOperators:
    R_hz: np.ndarray
    R_Hz: np.ndarray
    R_hS: np.ndarray
    R_HS: np.ndarray
    n_samples: int
    meta: dict = field(default_factory=dict)

    def as_tuple(self):
        return self.R_hz, self.R_Hz, self.R_hS, self.R_HS


class ResponseAccumulator:
    """Streaming estimator of the four diagonal-slot response operators.

    Blocks of raw fast samples (spacing ``sample_dt``) are pushed through
    :meth:`update`. A tail of ``n_lags`` samples is carried between blocks so
    every origin ``t`` whose full window ``[t, t + s_max]`` is available
    contributes exactly once.
    """

    def __init__(self, zbar, sigma, sigma_inv, sample_dt, s_max=LAG_MAX, ds=LAG_STEP):
        self.zbar = np.asarray(zbar, dtype=np.float64)
        self.sigma_diag = np.diag(np.asarray(sigma, dtype=np.float64)).copy()
        self.sigma_inv = np.asarray(sigma_inv, dtype=np.float64)
        n = self.zbar.shape[0]
        if self.sigma_inv.shape != (n, n):
            raise DimensionError("sigma_inv shape does not match zbar")
        self.nl, self.step = _lag_count(s_max, ds, sample_dt)
        self.ds = ds
        self.s_max = self.nl * ds
        self.acc = [np.zeros((n, n)) for _ in range(4)]
        self.tail = np.empty((0, n))
        self.count = 0
        self._offset = 0
        # diagonal lag-s_max correlation, for the decay diagnostic
        self._end_sum = np.zeros(n)
        self._end_sq = np.zeros(n)

    def update(self, block):
        block = np.atleast_2d(np.asarray(block, dtype=np.float64))
        if self.step > 1:
            start = (-self._offset) % self.step
            self._offset += block.shape[0]
            block = block[start::self.step]
        dz = block - self.zbar
        seg = np.vstack([self.tail, dz]) if self.tail.size else dz
        L = self.nl
        cnt = seg.shape[0] - L
        if cnt <= 0:
            self.tail = seg
            return
        win1 = _window_trapezoid(seg, L, cnt, self.ds)
        win2 = _window_trapezoid(seg * seg, L, cnt, self.ds)
        head = seg[:cnt]
        w = head @ self.sigma_inv
        u = w * head
        self.acc[0] += win1.T @ w
        self.acc[1] += win1.T @ u
        self.acc[2] += win2.T @ w
        self.acc[3] += win2.T @ u
        prod = seg[L:L + cnt] * w
        self._end_sum += prod.sum(axis=0)
        self._end_sq += (prod * prod).sum(axis=0)
        self.count += cnt
        self.tail = seg[cnt:].copy()

    def finalize(self):
        M = self.count
        if M < 2:
            raise InsufficientSamplesError(
                f"trajectory too short for a correlation window of {self.s_max} time units")
        A, B, C, D = (a / M for a in self.acc)
        D = D - self.s_max * self.sigma_diag[:, None]
        end = self._end_sum / M
        spread = np.sqrt(np.maximum(self._end_sq / M - end * end, 0.0))
        # noise floor assumes about one time unit of sample correlation
        floor = spread * np.sqrt(max(1.0, 1.0 / self.ds) / M)
        undecayed = np.flatnonzero(np.abs(end) > 5.0 * floor)
        meta = {"n_origins": int(M), "s_max": self.s_max, "ds": self.ds,
                "undecayed_sites": undecayed.tolist(),
                "max_end_correlation": float(np.abs(end).max())}
        return ResponseOperators(A, B, C, D, M, meta)


def _window_trapezoid(sig, L, cnt, ds):
    # trapezoid integral of sig over samples [t, t+L] for t = 0..cnt-1
    cs = np.empty((sig.shape[0] + 1, sig.shape[1]))
    cs[0] = 0.0
    np.cumsum(sig, axis=0, out=cs[1:])
    total = cs[L + 1:L + 1 + cnt] - cs[:cnt]
    return ds * (total - 0.5 * sig[:cnt] - 0.5 * sig[L:L + cnt])


def compute_response_operators(feed, zbar, sigma, sigma_inv, sample_dt, s_max=LAG_MAX,
                               ds=LAG_STEP):
    """Lag-integrated quasi-Gaussian response operators from a fast trajectory.

    ``feed`` must come from the unperturbed fast limiting system; it is an
    ``(n, N_y)`` array or an iterable of blocks. ``sigma`` supplies the
    ``Sigma_ii`` subtracted in ``D``; ``sigma_inv`` is its (regularized)
    inverse.
    """
    acc = ResponseAccumulator(zbar, sigma, sigma_inv, sample_dt, s_max, ds)
    for blk in _blocks(feed):
        acc.update(blk)
    return acc.finalize()


def symmetrize_blocks(M, J):
    """Average ``M[m, k]`` over simultaneous shifts of both indices by ``J``."""
    n = M.shape[0]
    out = np.zeros_like(M)
    shifts = n // J
    for r in range(shifts):
        out += np.roll(np.roll(M, r * J, axis=0), r * J, axis=1)
    return out / shifts


@dataclass
class CalibrationData:
    """Everything the closures need, in the fast-time convention."""

    rescale: tuple
    zbar_star: np.ndarray
    sigma_star: np.ndarray
    sigma_star_inv: np.ndarray
    h_star: np.ndarray
    Hdiag_star: np.ndarray
    R_hz: np.ndarray
    R_Hz: np.ndarray
    R_hS: np.ndarray
    R_HS: np.ndarray
    zbar_ref: np.ndarray
    sigma_ref: np.ndarray
    meta: dict = field(default_factory=dict)

    ARRAYS = ("zbar_star", "sigma_star", "sigma_star_inv", "h_star", "Hdiag_star",
              "R_hz", "R_Hz", "R_hS", "R_HS", "zbar_ref", "sigma_ref")

    @property
    def sigma_star_diag(self):
        return np.diag(self.sigma_star).copy()

    @property
    def operators(self):
        return self.R_hz, self.R_Hz, self.R_hS, self.R_HS


def predict_fast_stats(x, cal, p):
    """Linear-response prediction of the fast mean and variances at slow state ``x``.

    ``pvec = dh + dH * zbar*`` is the effective additive perturbation;
    returns ``zbar* + A pvec + B dH`` and ``diag Sigma* + C pvec + D dH``.
    Negative variances are returned as computed.
    """
    f = coupling_fields(np.asarray(x, dtype=np.float64), p, fast_time=True)
    dh = f.h - cal.h_star
    dH = f.Hdiag - cal.Hdiag_star
    pvec = dh + dH * cal.zbar_star
    zbar = cal.zbar_star + cal.R_hz @ pvec + cal.R_Hz @ dH
    sig = cal.sigma_star_diag + cal.R_hS @ pvec + cal.R_HS @ dH
    return zbar, sig


def limiting_system(p, h_star, Hdiag_star):
    """Unperturbed fast limiting system with fields ``(h*, H*)``."""
    return FastLimitingSystem(p, CouplingFields(np.asarray(h_star), np.asarray(Hdiag_star)))


def calibrate_operators(p, ref, plan, reference="limiting", symmetrize=False, s_max=LAG_MAX,
                        ds=LAG_STEP, eig_floor=EIG_FLOOR):
    """Run the fast limiting system and assemble :class:`CalibrationData`.

    Parameters
    ----------
    ref : ReferenceStats
        Full-model reference statistics.
    plan : IntegrationPlan
        Fast-time plan for the limiting system.
    reference : {"limiting", "full"}
        Which mean/covariance centres and whitens the correlations. With
        ``"limiting"`` a first pass estimates them from the same limiting
        trajectory (re-generated deterministically for the second pass); with
        ``"full"`` the full-model ``zbar*``, ``Sigma*`` are used directly.
    """
    system = limiting_system(p, ref.h_star, ref.Hdiag_star)
    z0 = np.random.default_rng(plan.seed).uniform(-0.5, 0.5, p.N_y)
    meta = {"reference": reference, "fast_plan": plan.to_dict(), "symmetrized": bool(symmetrize)}
    if reference == "limiting":
        acc = MomentAccumulator(p.N_y)
        for blk in sample_blocks(system, z0, plan, context="fast limiting (moments)"):
            acc.update(blk)
        zbar_ref, sigma_ref = acc.finalize()
    elif reference == "full":
        zbar_ref, sigma_ref = ref.zbar_star.copy(), ref.sigma_star.copy()
    else:
        raise ValueError(f"unknown operator reference {reference!r}")
    sigma_ref_inv, n_fl_ref = regularized_inverse(sigma_ref, eig_floor)
    sigma_star_inv, n_fl_star = regularized_inverse(ref.sigma_star, eig_floor)
    meta["floored_eigenvalues"] = {"sigma_ref": n_fl_ref, "sigma_star": n_fl_star}
    ops = compute_response_operators(
        sample_blocks(system, z0, plan, context="fast limiting (operators)"),
        zbar_ref, sigma_ref, sigma_ref_inv, plan.sample_dt, s_max, ds)
    mats = list(ops.as_tuple())
    if symmetrize:
        mats = [symmetrize_blocks(m, p.J) for m in mats]
    meta["operators"] = ops.meta
    return CalibrationData(
        rescale=(p.xbar, p.beta_x, p.ybar, p.beta_y),
        zbar_star=ref.zbar_star, sigma_star=ref.sigma_star, sigma_star_inv=sigma_star_inv,
        h_star=ref.h_star, Hdiag_star=ref.Hdiag_star,
        R_hz=mats[0], R_Hz=mats[1], R_hS=mats[2], R_HS=mats[3],
        zbar_ref=zbar_ref, sigma_ref=sigma_ref, meta=meta)


def whitened_equivalence_check(samples, zbar, sigma, sample_dt, s_max=LAG_MAX, ds=LAG_STEP,
                               max_cond=1e6):
    """Compare direct operators with the whitened-coordinate route.

    In whitened coordinates ``q = S^{-1}(z - zbar)``, ``S = Sigma^{1/2}``, the
    full response tensors are lag integrals of ``q_i(t+s) q_j(t)``,
    ``q_i(t+s) q_j(t) q_k(t)``, ``q_i q_j (t+s) q_k(t)`` and
    ``q_i q_j (t+s) q_k q_l (t) - delta_ij delta_kl``. Mapping them back with
    ``S`` and contracting to diagonal slots must reproduce the direct
    operators on the same samples.

    Returns a dict with ``max_rel_deviation`` (or ``skipped`` and ``cond``).
    """
    z = np.asarray(samples, dtype=np.float64)
    n = z.shape[1]
    sigma = 0.5 * (np.asarray(sigma) + np.asarray(sigma).T)
    vals, vecs = np.linalg.eigh(sigma)
    cond_S = float(np.sqrt(vals.max() / vals.min())) if vals.min() > 0 else float("inf")
    if not cond_S < max_cond:
        return {"skipped": True, "cond": cond_S}
    S = (vecs * np.sqrt(vals)) @ vecs.T
    S_inv = (vecs / np.sqrt(vals)) @ vecs.T
    sigma_inv = (vecs / vals) @ vecs.T
    direct = compute_response_operators(z, zbar, sigma, sigma_inv, sample_dt, s_max, ds)

    nl, step = _lag_count(s_max, ds, sample_dt)
    zs = z[::step]
    q = (zs - zbar) @ S_inv
    cnt = q.shape[0] - nl
    if cnt < 2:
        raise InsufficientSamplesError("trajectory too short for the correlation window")
    qq = (q[:, :, None] * q[:, None, :]).reshape(q.shape[0], n * n)
    Q1 = _window_trapezoid(q, nl, cnt, ds)
    Q2 = _window_trapezoid(qq, nl, cnt, ds)
    head = q[:cnt]
    headqq = qq[:cnt]
    s_len = nl * ds
    R1 = Q1.T @ head / cnt                                   # (i, j)
    R2 = (Q1.T @ headqq / cnt).reshape(n, n, n)              # (i, j, k)
    R3 = (Q2.T @ head / cnt).reshape(n, n, n)                # (i, j, k)
    R4 = (Q2.T @ headqq / cnt).reshape(n, n, n, n)           # (i, j, k, l)
    R4 = R4 - s_len * np.einsum("ij,kl->ijkl", np.eye(n), np.eye(n))

    A = S @ R1 @ S_inv
    B = np.einsum("ia,abc,kb,kc->ik", S, R2, S_inv, S)
    C = np.einsum("ia,ib,abc,kc->ik", S, S, R3, S_inv)
    D = np.einsum("ia,ib,abcd,kc,kd->ik", S, S, R4, S_inv, S)
    whitened = (A, B, C, D)
    devs = []
    for w_op, d_op in zip(whitened, direct.as_tuple()):
        scale = max(np.abs(d_op).max(), 1e-300)
        devs.append(float(np.abs(w_op - d_op).max() / scale))
    return {"skipped": False, "cond": cond_S, "max_rel_deviation": max(devs),
            "per_operator": dict(zip(("R_hz", "R_Hz", "R_hS", "R_HS"), devs)),
            "direct": direct.as_tuple(), "whitened": whitened}
