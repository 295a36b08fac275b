#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the edge-sweep matvecs and the scalar-prox loop on a random graph and
on the SSNAL lattice instance, then prints a comparison table (optionally a
CSV via --out). Both backends are imported directly, so the script works no
matter which one the package selected at import.
"""

import argparse
import time

import numpy as np

from pconductance._kernels import _pyimpl

try:
    from pconductance._kernels import _cyimpl
except ImportError:
    _cyimpl = None


def _random_edges(rng, n, m):
    src = rng.integers(0, n - 1, size=2 * m)
    dst = rng.integers(0, n - 1, size=2 * m)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)[:m]
    return (
        np.ascontiguousarray(pairs[:, 0], dtype=np.int64),
        np.ascontiguousarray(pairs[:, 1], dtype=np.int64),
    )


def _timeit(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def run(n, m, repeats, seed):
    rng = np.random.default_rng(seed)
    src, dst = _random_edges(rng, n, m)
    m = src.shape[0]
    w = rng.uniform(0.5, 2.0, size=m)
    deg = np.bincount(src, weights=w, minlength=n) + np.bincount(
        dst, weights=w, minlength=n
    )
    x = rng.normal(size=n)
    ew = rng.uniform(0.0, 1.0, size=m)
    vals = rng.normal(size=m)
    v = rng.normal(size=m) * 2.0
    tau = rng.uniform(0.01, 1.0, size=m)

    cases = [
        ("edge_grad", lambda im: (lambda: im.edge_grad(src, dst, x))),
        ("edge_div", lambda im: (lambda: im.edge_div(src, dst, vals, n))),
        ("laplacian_apply", lambda im: (lambda: im.laplacian_apply(src, dst, w, deg, x))),
        ("edge_laplacian", lambda im: (lambda: im.edge_laplacian_apply(src, dst, ew, x))),
        ("prox_power_p5", lambda im: (lambda: im.prox_power(v, tau, 5.0))),
        ("prox_power_p1.5", lambda im: (lambda: im.prox_power(v, tau, 1.5))),
    ]
    rows = []
    for name, make in cases:
        t_py = _timeit(make(_pyimpl), repeats)
        if _cyimpl is not None:
            t_cy = _timeit(make(_cyimpl), repeats)
            a = make(_pyimpl)()
            b = make(_cyimpl)()
            err = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
            rows.append((name, t_py, t_cy, t_py / t_cy, err))
        else:
            rows.append((name, t_py, float("nan"), float("nan"), 0.0))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--edges", type=int, default=200000)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    if _cyimpl is None:
        print("compiled backend unavailable; timing the fallback only")
    rows = run(args.nodes, args.edges, args.repeats, args.seed)
    print(f"{'kernel':<18}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}{'max diff':>12}")
    for name, t_py, t_cy, ratio, err in rows:
        print(f"{name:<18}{t_py * 1e3:>14.3f}{t_cy * 1e3:>14.3f}{ratio:>10.2f}{err:>12.2e}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("kernel,python_seconds,cython_seconds,speedup,max_abs_diff\n")
            for name, t_py, t_cy, ratio, err in rows:
                fh.write(f"{name},{t_py:.6e},{t_cy:.6e},{ratio:.3f},{err:.3e}\n")


if __name__ == "__main__":
    main()
