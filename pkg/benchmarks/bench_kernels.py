#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Run: python benchmarks/bench_kernels.py [--samples N]

Covers the three hot kernels: dependent rounding, iterative cluster
rounding, and the Pareto frontier prune used by the bound certifier.  Both
backends consume identical pre-drawn uniforms, so the outputs are checked
for exact equality while timing.
"""

import argparse
import time

import numpy as np

from stoclot import _kernels, chance
from stoclot._kernels import _pykernels
from stoclot.verify import gen_instance

try:
    from stoclot._kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def bench_depround(n_samples):
    gen = np.random.default_rng(0)
    y = gen.uniform(0, 1, 12)
    u = gen.random((n_samples, 12))
    rows = []
    ref = None
    for name, impl in (("compiled", _ckernels), ("python", _pykernels)):
        if impl is None:
            continue
        out = np.zeros((n_samples, 12), dtype=np.uint8)
        _, dt = timeit(impl.depround_batch, y, u, out)
        rows.append((name, dt))
        if ref is None:
            ref = out
        else:
            assert (ref == out).all(), "backend outputs diverged"
    return rows


def bench_iter(n_samples):
    inst = gen_instance("random_metric",
                        {"n_facilities": 9, "n_clients": 7, "k": 3}, 5)
    gen = np.random.default_rng(1)
    from stoclot.core import DemandChance
    p = gen.uniform(0.2, 0.9, 7)
    r = np.full(7, 0.8 * inst.D.max())
    s = chance.IterativeSampler(inst, DemandChance(p, r))
    fam = s.family
    u = gen.random((n_samples, s.width))
    rows = []
    ref = None
    for name, impl in (("compiled", _ckernels), ("python", _pykernels)):
        if impl is None:
            continue
        open_c = np.zeros((n_samples, fam.n_copies), dtype=np.uint8)
        tight = np.zeros((n_samples, 7), dtype=np.uint8)
        status = np.zeros(n_samples, dtype=np.int8)
        _, dt = timeit(impl.iter_round_batch,
                       np.ascontiguousarray(fam.mass, dtype=float),
                       s.cl_ptr, s.cl_idx, s.co_ptr, s.co_idx,
                       np.ascontiguousarray(s.member),
                       np.ascontiguousarray(s.inter),
                       np.ascontiguousarray(r, dtype=float), 3, u,
                       open_c, tight, status)
        assert (status == 0).all()
        rows.append((name, dt))
        if ref is None:
            ref = open_c.copy()
        else:
            assert (ref == open_c).all(), "backend outputs diverged"
    return rows


def bench_pareto(n_points):
    gen = np.random.default_rng(2)
    c1 = gen.integers(0, 4000, n_points)
    c2 = gen.integers(0, 4000, n_points)
    c3 = gen.integers(0, 4000, n_points)
    rows = []
    ref = None
    for name, impl in (("compiled", _ckernels), ("python", _pykernels)):
        if impl is None:
            continue
        out, dt = timeit(impl.pareto3_prune, c1, c2, c3)
        rows.append((name, dt))
        if ref is None:
            ref = out
        else:
            assert (np.asarray(ref) == np.asarray(out)).all()
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=20000)
    args = ap.parse_args()
    print(f"active backend: {_kernels.BACKEND}")
    if _ckernels is None:
        print("compiled extension unavailable; timing the fallback only")
    for title, rows in (
            (f"dependent rounding, {args.samples} samples x n=12",
             bench_depround(args.samples)),
            (f"iterative rounding, {args.samples // 4} samples",
             bench_iter(args.samples // 4)),
            ("pareto prune, 300k triples", bench_pareto(300_000))):
        print(f"\n{title}")
        base = rows[0][1]
        for name, dt in rows:
            rel = f"  ({dt / base:.1f}x slower)" if dt != base else ""
            print(f"  {name:>8}: {dt:.3f}s{rel}")


if __name__ == "__main__":
    main()
