"""Compare the numba and numpy kernel backends.

Times the elementwise kernels in-process (both backends are callable side by
side) and, with --fit, an end-to-end EMGM line fit in a subprocess per
backend so that EMGLAB_BACKEND takes effect at import.

    python3 benchmarks/bench_kernels.py [--sizes 1000,100000,1000000] [--fit]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from emglab import kernels


def best_of(fn, repeat):
    fn()  # warm-up (includes jit compilation on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        t = rng.normal(0, 10, n)
        r = rng.normal(0, 1, n) + rng.exponential(2.0, n)
        cases = {
            "erfcx": lambda b: kernels.erfcx(t, backend=b),
            "emg_terms": lambda b: kernels.emg_terms(r, 0.5, 0.5, False, backend=b),
            "emg_terms+derivs": lambda b: kernels.emg_terms(r, 0.5, 0.5, True, backend=b),
        }
        for name, fn in cases.items():
            row = {"kernel": name, "n": n}
            ref = fn("numpy")
            row["numpy_s"] = best_of(lambda: fn("numpy"), repeat)
            if kernels.numba_available():
                got = fn("numba")
                row["numba_s"] = best_of(lambda: fn("numba"), repeat)
                row["speedup"] = row["numpy_s"] / row["numba_s"]
                fin = np.isfinite(ref)
                assert np.array_equal(fin, np.isfinite(got))
                row["max_rel_diff"] = float(np.max(np.abs(got[fin] - ref[fin])
                                                   / np.maximum(np.abs(ref[fin]), 1e-300)))
            rows.append(row)
    return rows


FIT_SNIPPET = """
import time
from emglab.regression import RegressionConfig, gen_regression, fit_line
x, y, _ = gen_regression(RegressionConfig(n={n}, seed=1))
fit_line(x, y, "emgm")
t0 = time.perf_counter()
fit_line(x, y, "emgm")
print(time.perf_counter() - t0)
"""


def bench_fit(n):
    out = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, EMGLAB_BACKEND=backend)
        res = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        out[backend] = float(res.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,100000,1000000")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fit", action="store_true", help="also time an EMGM line fit per backend")
    ap.add_argument("--fit-n", type=int, default=2 ** 14)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",")]
    rows = bench_kernels(sizes, args.repeat)
    print(f"{'kernel':18s} {'n':>9s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max rel':>9s}")
    for r in rows:
        nb = f"{1e3 * r['numba_s']:10.3f}" if "numba_s" in r else f"{'n/a':>10s}"
        sp = f"{r['speedup']:8.2f}" if "speedup" in r else f"{'':>8s}"
        df = f"{r['max_rel_diff']:9.1e}" if "max_rel_diff" in r else ""
        print(f"{r['kernel']:18s} {r['n']:9d} {1e3 * r['numpy_s']:10.3f} {nb} {sp} {df}")
    result = {"kernels": rows}
    if args.fit:
        fit = bench_fit(args.fit_n)
        result["fit_emgm_line"] = {"n": args.fit_n, **fit}
        print(f"EMGM line fit n={args.fit_n}: numpy {fit['numpy']:.3f} s, numba {fit['numba']:.3f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main()
