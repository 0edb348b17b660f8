"""Fast numerical self-checks behind ``fdtclosure selftest``."""
import numpy as np

from . import kernels
from .model import ModelParams, SystemState, coupling_energy_terms, averaged_coupling_term


def _energy(rng):
    worst = 0.0
    for _ in range(200):
        p = ModelParams(a=rng.normal(), b=rng.normal(), c=rng.normal(), d=rng.normal())
        s = SystemState(rng.normal(size=p.N_x) * 3, rng.normal(size=p.N_y) * 3)
        slow, fast = coupling_energy_terms(s, p)
        worst = max(worst, abs(slow + fast) / max(abs(slow), abs(fast), 1e-300))
    return worst < 1e-12, f"max relative coupling energy rate {worst:.2e}"


def _backends(rng):
    p = ModelParams(a=1.0, b=0.8, c=0.3, d=0.3, xbar=2.0, beta_x=2.8, ybar=2.8, beta_y=5.1)
    u = rng.normal(size=p.N_x + p.N_y)
    a = u.copy()
    b = u.copy()
    kernels._advance_full_nb(a, p.packed(), p.N_x, p.J, 5e-5, 50)
    kernels._advance_full_np(b, p.packed(), p.N_x, p.J, 5e-5, 50)
    err = float(np.abs(a - b).max())
    return err < 1e-10, f"numba vs numpy full-model drift after 50 steps {err:.2e}"


def _gaussian_average(rng):
    p = ModelParams(N_x=4, J=2, a=0.5, b=-0.8, c=0.3, d=-0.3)
    x = rng.normal(size=p.N_x)
    zbar = rng.normal(size=p.N_y) * 0.3
    sig = rng.uniform(0.5, 1.5, p.N_y)
    n = 200000
    y = zbar + np.sqrt(sig) * rng.standard_normal((n, p.N_y))
    xc = np.repeat(x, p.J)
    raw = (p.a + p.b * xc) * y + (p.c + p.d * xc) * (y * y - 1.0)
    mc = -p.lambda_y / p.J * raw.reshape(n, p.N_x, p.J).sum(axis=2)
    se = mc.std(axis=0) / np.sqrt(n)
    z = np.abs(mc.mean(axis=0) - averaged_coupling_term(x, zbar, sig, p)) / se
    return bool(z.max() < 4.0), f"averaged coupling vs Monte Carlo, max |z| {z.max():.2f}"


CHECKS = [("energy", _energy), ("backends", _backends), ("gaussian-average", _gaussian_average)]


def run_selftest(verbose=False, seed=0):
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, fn in CHECKS:
        ok, msg = fn(rng)
        ok_all &= bool(ok)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {msg}")
    print(f"backend: {kernels.BACKEND}")
    return ok_all
