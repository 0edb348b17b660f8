"""Hot inner loops: right-hand sides, fixed-step RK4 advancement, lag sums.

Every kernel exists twice: an explicit-loop version compiled with numba and
a vectorized numpy version. ``_jit.USE_NUMBA`` picks which one the public
names below point to. Both versions take the same arguments and update the
state in place.

Parameter vectors are packed by :meth:`fdtclosure.model.ModelParams.packed` as::

    [eps, F_x, F_y, lambda_x, lambda_y, a, b, c, d, xbar, beta_x, ybar, beta_y]
"""
import numpy as np

from ._jit import BACKEND, USE_NUMBA, njit  # noqa: F401

EPS, FX, FY, LX, LY, A, B, C, D, XBAR, BX, YBAR, BY = range(13)


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

@njit
def _full_rhs_nb(u, p, nx, J, du, pad):
    # pad: scratch of length nx + ny + 6 holding periodically extended copies
    ny = nx * J
    lx = p[LX]
    a, b, c, d = p[A], p[B], p[C], p[D]
    xbar, ybar = p[XBAR], p[YBAR]
    ibx = 1.0 / p[BX]
    iby = 1.0 / p[BY]
    ieps = 1.0 / p[EPS]
    fx = (p[FX] - xbar) * ibx * ibx
    fy = (p[FY] - ybar) * iby * iby
    lyJ = p[LY] / J
    pad[0] = u[nx - 2]
    pad[1] = u[nx - 1]
    for i in range(nx):
        pad[i + 2] = u[i]
    pad[nx + 2] = u[0]
    for i in range(nx):
        xi = u[i]
        diff = pad[i + 3] - pad[i]
        acc = 0.0
        base = nx + i * J
        for j in range(J):
            yv = u[base + j]
            acc += (a + b * xi) * yv + (c + d * xi) * (yv * yv - 1.0)
        du[i] = pad[i + 1] * diff + (xbar * diff - xi) * ibx + fx - lyJ * acc
    o = nx + 3
    pad[o] = u[nx + ny - 1]
    for m in range(ny):
        pad[o + 1 + m] = u[nx + m]
    pad[o + 1 + ny] = u[nx]
    pad[o + 2 + ny] = u[nx + 1]
    for i in range(nx):
        xi = u[i]
        q = xi * xi - 1.0
        c0 = lx * (a * xi + b * q)
        c1 = lx * (c * xi + d * q)
        for j in range(J):
            m = i * J + j
            ym = pad[o + 1 + m]
            diff = pad[o + m] - pad[o + 3 + m]
            du[nx + m] = (pad[o + 2 + m] * diff + (ybar * diff - ym) * iby + fy
                          + c0 + c1 * ym) * ieps


@njit
def _advance_full_nb(u, p, nx, J, dt, nsteps):
    n = u.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    pad = np.empty(n + 6)
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        _full_rhs_nb(u, p, nx, J, k1, pad)
        for q in range(n):
            tmp[q] = u[q] + half * k1[q]
        _full_rhs_nb(tmp, p, nx, J, k2, pad)
        for q in range(n):
            tmp[q] = u[q] + half * k2[q]
        _full_rhs_nb(tmp, p, nx, J, k3, pad)
        for q in range(n):
            tmp[q] = u[q] + dt * k3[q]
        _full_rhs_nb(tmp, p, nx, J, k4, pad)
        for q in range(n):
            u[q] += sixth * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])


@njit
def _fast_rhs_nb(z, coef, off, ybar, by, fy, dz, pad):
    # fast Lorenz bracket in fast time plus diagonal-linear and constant terms
    n = z.shape[0]
    iby = 1.0 / by
    f0 = (fy - ybar) * iby * iby
    pad[0] = z[n - 1]
    for m in range(n):
        pad[m + 1] = z[m]
    pad[n + 1] = z[0]
    pad[n + 2] = z[1]
    for m in range(n):
        zm = pad[m + 1]
        diff = pad[m] - pad[m + 3]
        dz[m] = pad[m + 2] * diff + (ybar * diff - zm) * iby + f0 + coef[m] * zm + off[m]


@njit
def _advance_fast_nb(z, coef, off, ybar, by, fy, dt, nsteps):
    n = z.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    pad = np.empty(n + 3)
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        _fast_rhs_nb(z, coef, off, ybar, by, fy, k1, pad)
        for q in range(n):
            tmp[q] = z[q] + half * k1[q]
        _fast_rhs_nb(tmp, coef, off, ybar, by, fy, k2, pad)
        for q in range(n):
            tmp[q] = z[q] + half * k2[q]
        _fast_rhs_nb(tmp, coef, off, ybar, by, fy, k3, pad)
        for q in range(n):
            tmp[q] = z[q] + dt * k3[q]
        _fast_rhs_nb(tmp, coef, off, ybar, by, fy, k4, pad)
        for q in range(n):
            z[q] += sixth * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])


@njit
def _l96_rhs_nb(v, F, dv, pad):
    n = v.shape[0]
    pad[0] = v[n - 2]
    pad[1] = v[n - 1]
    for i in range(n):
        pad[i + 2] = v[i]
    pad[n + 2] = v[0]
    for i in range(n):
        dv[i] = pad[i + 1] * (pad[i + 3] - pad[i]) - pad[i + 2] + F


@njit
def _advance_l96_nb(v, F, dt, nsteps):
    n = v.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    pad = np.empty(n + 3)
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        _l96_rhs_nb(v, F, k1, pad)
        for q in range(n):
            tmp[q] = v[q] + half * k1[q]
        _l96_rhs_nb(tmp, F, k2, pad)
        for q in range(n):
            tmp[q] = v[q] + half * k2[q]
        _l96_rhs_nb(tmp, F, k3, pad)
        for q in range(n):
            tmp[q] = v[q] + dt * k3[q]
        _l96_rhs_nb(tmp, F, k4, pad)
        for q in range(n):
            v[q] += sixth * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])


@njit
def _closure_rhs_nb(x, p, J, zs, ss, hs, Hs, RA, RB, RC, RD, corrected, zb, sd,
                    pv, dH, dx, pad):
    nx = x.shape[0]
    ny = zs.shape[0]
    lx = p[LX]
    a, b, c, d = p[A], p[B], p[C], p[D]
    xbar = p[XBAR]
    ibx = 1.0 / p[BX]
    fx = (p[FX] - xbar) * ibx * ibx
    lyJ = p[LY] / J
    clamps = 0
    if corrected:
        for i in range(nx):
            xi = x[i]
            hx = lx * (a * xi + b * xi * xi)
            Hx = lx * (c * xi + d * xi * xi)
            for j in range(J):
                m = i * J + j
                dH[m] = Hx - Hs[m]
                pv[m] = hx - hs[m] + dH[m] * zs[m]
        for m in range(ny):
            accz = zs[m]
            accs = ss[m]
            for k in range(ny):
                accz += RA[m, k] * pv[k] + RB[m, k] * dH[k]
                accs += RC[m, k] * pv[k] + RD[m, k] * dH[k]
            zb[m] = accz
            if accs < 0.0:
                accs = 0.0
                clamps += 1
            sd[m] = accs
    else:
        for m in range(ny):
            zb[m] = zs[m]
            sd[m] = ss[m] if ss[m] > 0.0 else 0.0
    pad[0] = x[nx - 2]
    pad[1] = x[nx - 1]
    for i in range(nx):
        pad[i + 2] = x[i]
    pad[nx + 2] = x[0]
    for i in range(nx):
        xi = x[i]
        diff = pad[i + 3] - pad[i]
        acc = 0.0
        for j in range(J):
            m = i * J + j
            acc += (a + b * xi) * zb[m] + (c + d * xi) * (zb[m] * zb[m] + sd[m] - 1.0)
        dx[i] = pad[i + 1] * diff + (xbar * diff - xi) * ibx + fx - lyJ * acc
    return clamps


@njit
def _advance_closure_nb(x, p, J, zs, ss, hs, Hs, RA, RB, RC, RD, corrected, dt,
                        nsteps):
    n = x.shape[0]
    ny = zs.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    pad = np.empty(n + 3)
    zb = np.empty(ny)
    sd = np.empty(ny)
    pv = np.empty(ny)
    dH = np.empty(ny)
    half = 0.5 * dt
    sixth = dt / 6.0
    clamps = 0
    for _ in range(nsteps):
        clamps += _closure_rhs_nb(x, p, J, zs, ss, hs, Hs, RA, RB, RC, RD,
                                  corrected, zb, sd, pv, dH, k1, pad)
        for q in range(n):
            tmp[q] = x[q] + half * k1[q]
        clamps += _closure_rhs_nb(tmp, p, J, zs, ss, hs, Hs, RA, RB, RC, RD,
                                  corrected, zb, sd, pv, dH, k2, pad)
        for q in range(n):
            tmp[q] = x[q] + half * k2[q]
        clamps += _closure_rhs_nb(tmp, p, J, zs, ss, hs, Hs, RA, RB, RC, RD,
                                  corrected, zb, sd, pv, dH, k3, pad)
        for q in range(n):
            tmp[q] = x[q] + dt * k3[q]
        clamps += _closure_rhs_nb(tmp, p, J, zs, ss, hs, Hs, RA, RB, RC, RD,
                                  corrected, zb, sd, pv, dH, k4, pad)
        for q in range(n):
            x[q] += sixth * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
    return clamps


@njit
def _lag_sums_nb(a, b, nlags):
    # out[s, k] = sum_t a[t, k] * b[t + s, k]
    n, ncol = a.shape
    out = np.zeros((nlags + 1, ncol))
    for s in range(nlags + 1):
        for t in range(n - s):
            for k in range(ncol):
                out[s, k] += a[t, k] * b[t + s, k]
    return out


@njit
def _ring_update_nb(ring_a, pos, filled, a_new, b_new, sums):
    # ring_a holds the last (nlags + 1) samples of a; pos is the slot for a_new
    nl1 = ring_a.shape[0]
    ncol = ring_a.shape[1]
    for k in range(ncol):
        ring_a[pos, k] = a_new[k]
    for s in range(min(filled + 1, nl1)):
        slot = (pos - s) % nl1
        for k in range(ncol):
            sums[s, k] += ring_a[slot, k] * b_new[k]


# --------------------------------------------------------------------------
# numpy fallbacks
# --------------------------------------------------------------------------

def _full_rhs_np(u, p, nx, J, du, pad=None):
    x = u[:nx]
    y = u[nx:]
    a, b, c, d = p[A], p[B], p[C], p[D]
    xm2, xm1, xp1 = np.roll(x, 2), np.roll(x, 1), np.roll(x, -1)
    diff = xp1 - xm2
    yb = y.reshape(nx, J)
    xc = x[:, None]
    acc = ((a + b * xc) * yb + (c + d * xc) * (yb * yb - 1.0)).sum(axis=1)
    du[:nx] = (xm1 * diff + (p[XBAR] * diff - x) / p[BX]
               + (p[FX] - p[XBAR]) / p[BX] ** 2 - p[LY] / J * acc)
    ym1, yp1, yp2 = np.roll(y, 1), np.roll(y, -1), np.roll(y, -2)
    dy = ym1 - yp2
    bracket = yp1 * dy + (p[YBAR] * dy - y) / p[BY] + (p[FY] - p[YBAR]) / p[BY] ** 2
    xr = np.repeat(x, J)
    coup = (a + c * y) * xr + (b + d * y) * (xr * xr - 1.0)
    du[nx:] = (bracket + p[LX] * coup) / p[EPS]


def _rk4_np(rhs, u, dt, nsteps, *args):
    k1 = np.empty_like(u)
    k2 = np.empty_like(u)
    k3 = np.empty_like(u)
    k4 = np.empty_like(u)
    for _ in range(nsteps):
        rhs(u, *args, k1)
        rhs(u + 0.5 * dt * k1, *args, k2)
        rhs(u + 0.5 * dt * k2, *args, k3)
        rhs(u + dt * k3, *args, k4)
        u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance_full_np(u, p, nx, J, dt, nsteps):
    _rk4_np(_full_rhs_np, u, dt, nsteps, p, nx, J)


def _fast_rhs_np(z, coef, off, ybar, by, fy, dz, pad=None):
    diff = np.roll(z, 1) - np.roll(z, -2)
    dz[:] = (np.roll(z, -1) * diff + (ybar * diff - z) / by + (fy - ybar) / by ** 2
             + coef * z + off)


def _advance_fast_np(z, coef, off, ybar, by, fy, dt, nsteps):
    _rk4_np(_fast_rhs_np, z, dt, nsteps, coef, off, ybar, by, fy)


def _l96_rhs_np(v, F, dv, pad=None):
    dv[:] = np.roll(v, 1) * (np.roll(v, -1) - np.roll(v, 2)) - v + F


def _advance_l96_np(v, F, dt, nsteps):
    _rk4_np(_l96_rhs_np, v, dt, nsteps, F)


def _closure_rhs_np(x, p, J, zs, ss, hs, Hs, RA, RB, RC, RD, corrected, zb, sd,
                    pv, dH, dx, pad=None):
    a, b, c, d = p[A], p[B], p[C], p[D]
    xr = np.repeat(x, J)
    clamps = 0
    if corrected:
        dH[:] = p[LX] * (c * xr + d * xr * xr) - Hs
        pv[:] = p[LX] * (a * xr + b * xr * xr) - hs + dH * zs
        zb[:] = zs + RA @ pv + RB @ dH
        s = ss + RC @ pv + RD @ dH
        neg = s < 0.0
        clamps = int(neg.sum())
        sd[:] = np.where(neg, 0.0, s)
    else:
        zb[:] = zs
        sd[:] = np.maximum(ss, 0.0)
    nx = x.shape[0]
    diff = np.roll(x, -1) - np.roll(x, 2)
    xc = x[:, None]
    zb2 = zb.reshape(nx, J)
    sd2 = sd.reshape(nx, J)
    acc = ((a + b * xc) * zb2 + (c + d * xc) * (zb2 * zb2 + sd2 - 1.0)).sum(axis=1)
    dx[:] = (np.roll(x, 1) * diff + (p[XBAR] * diff - x) / p[BX]
             + (p[FX] - p[XBAR]) / p[BX] ** 2 - p[LY] / J * acc)
    return clamps


def _advance_closure_np(x, p, J, zs, ss, hs, Hs, RA, RB, RC, RD, corrected, dt,
                        nsteps):
    ny = zs.shape[0]
    bufs = [np.empty(ny) for _ in range(4)]
    k = [np.empty_like(x) for _ in range(4)]
    clamps = 0
    args = (p, J, zs, ss, hs, Hs, RA, RB, RC, RD, corrected, *bufs)
    for _ in range(nsteps):
        clamps += _closure_rhs_np(x, *args, k[0])
        clamps += _closure_rhs_np(x + 0.5 * dt * k[0], *args, k[1])
        clamps += _closure_rhs_np(x + 0.5 * dt * k[1], *args, k[2])
        clamps += _closure_rhs_np(x + dt * k[2], *args, k[3])
        x += dt / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
    return clamps


def _lag_sums_np(a, b, nlags):
    n = a.shape[0]
    out = np.empty((nlags + 1, a.shape[1]))
    for s in range(nlags + 1):
        out[s] = np.einsum("tk,tk->k", a[: n - s], b[s:])
    return out


def _ring_update_np(ring_a, pos, filled, a_new, b_new, sums):
    nl1 = ring_a.shape[0]
    ring_a[pos] = a_new
    m = min(filled + 1, nl1)
    slots = (pos - np.arange(m)) % nl1
    sums[:m] += ring_a[slots] * b_new


if USE_NUMBA:
    full_rhs = _full_rhs_nb
    advance_full = _advance_full_nb
    fast_rhs = _fast_rhs_nb
    advance_fast = _advance_fast_nb
    l96_rhs = _l96_rhs_nb
    advance_l96 = _advance_l96_nb
    closure_rhs = _closure_rhs_nb
    advance_closure = _advance_closure_nb
    lag_sums = _lag_sums_nb
    ring_update = _ring_update_nb
else:
    full_rhs = _full_rhs_np
    advance_full = _advance_full_np
    fast_rhs = _fast_rhs_np
    advance_fast = _advance_fast_np
    l96_rhs = _l96_rhs_np
    advance_l96 = _advance_l96_np
    closure_rhs = _closure_rhs_np
    advance_closure = _advance_closure_np
    lag_sums = _lag_sums_np
    ring_update = _ring_update_np
