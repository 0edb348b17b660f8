"""Time the hot kernels under both backends.

Usage::

    python3 benchmarks/bench_kernels.py            # numba vs numpy table
    python3 benchmarks/bench_kernels.py --child    # one backend, JSON on stdout

The numpy run happens in a subprocess with ``FDTCLOSURE_PURE_NUMPY=1``
because the backend is fixed at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat=3):
    fn()  # warm-up, includes compilation for numba
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def run_child():
    from fdtclosure import kernels
    from fdtclosure.model import ModelParams

    p = ModelParams(a=0.5, b=0.8, c=0.3, d=-0.3, xbar=2.0, beta_x=2.8, ybar=2.8, beta_y=5.1)
    rng = np.random.default_rng(0)
    pk = p.packed()
    u = rng.uniform(-0.5, 0.5, p.N_x + p.N_y)
    z = rng.uniform(-0.5, 0.5, p.N_y)
    coef, off = 0.1 * rng.normal(size=(2, p.N_y))
    n = p.N_y
    mats = [0.01 * rng.normal(size=(n, n)) for _ in range(4)]
    cal = (rng.normal(size=n), rng.uniform(0.8, 1.2, n), rng.normal(size=n),
           0.1 * rng.normal(size=n), *mats)
    x = rng.uniform(-0.5, 0.5, p.N_x)
    sig = rng.normal(size=(20000, 20))
    steps = 2000
    results = {
        "full_step_us": _best(lambda: kernels.advance_full(u.copy(), pk, p.N_x, p.J, 5e-5,
                                                           steps)) / steps * 1e6,
        "fast_step_us": _best(lambda: kernels.advance_fast(z.copy(), coef, off, p.ybar,
                                                           p.beta_y, p.F_y, 5e-3,
                                                           steps)) / steps * 1e6,
        "closure_step_us": _best(lambda: kernels.advance_closure(x.copy(), pk, p.J, *cal, True,
                                                                 5e-3, steps)) / steps * 1e6,
        "lag_sums_ms": _best(lambda: kernels.lag_sums(sig, sig, 200)) * 1e3,
    }
    json.dump({"backend": kernels.BACKEND, **results}, sys.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        run_child()
        return
    rows = []
    for flag in ("", "1"):
        env = dict(os.environ, FDTCLOSURE_PURE_NUMPY=flag)
        out = subprocess.run([sys.executable, __file__, "--child"], env=env, check=True,
                             capture_output=True, text=True).stdout
        rows.append(json.loads(out))
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'kernel':18s}" + "".join(f"{r['backend']:>12s}" for r in rows) + f"{'speedup':>10s}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:18s}{a:12.3f}{b:12.3f}{b / a:10.1f}")


if __name__ == "__main__":
    main()
