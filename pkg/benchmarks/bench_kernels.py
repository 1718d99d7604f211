"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run with the numba path enabled (the default install):

    python benchmarks/bench_kernels.py

Each kernel is timed on shapes matching real training/data-generation work:
rank-one CAU forward+backward at batch 100 with 1200 units on 121-d patches,
and the 32x32 image warp at data-generation batch sizes. The selected path
and the fallback are compared in the same process; with
CAUNET_DISABLE_NUMBA=1 only the numpy path is available, so the script
reports that and times it alone.
"""

import time

import numpy as np

from caunet import kernels as K
from caunet._accel import NUMBA_ENABLED


def _time(fn, *args, repeat=20, warmup=2):
    for _ in range(warmup):
        fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rankone(rng):
    bsz, n, k = 100, 121, 1200
    a = rng.uniform(-0.5, 0.5, (bsz, n)).astype(np.float32)
    b = rng.uniform(-0.5, 0.5, (bsz, n)).astype(np.float32)
    u = rng.uniform(0.01, 0.2, (k, n)).astype(np.float32)
    v = rng.uniform(0.01, 0.2, (k, n)).astype(np.float32)
    ut = np.ascontiguousarray(u.T)
    vt = np.ascontiguousarray(v.T)
    usum = u.sum(axis=1)
    vsum = v.sum(axis=1)
    g = rng.standard_normal((bsz, k)).astype(np.float32)

    rows = []
    numpy_fwd = _time(K._cau_rankone_forward, a, b, ut, vt, usum, vsum)
    numpy_bwd = _time(K._cau_rankone_backward, a, b, u, v, ut, vt, usum, vsum, g)
    if NUMBA_ENABLED:
        jit_fwd = _time(K.cau_rankone_forward, a, b, ut, vt, usum, vsum)
        jit_bwd = _time(K.cau_rankone_backward, a, b, u, v, ut, vt, usum, vsum, g)
        rows.append(("cau_rankone fwd (100x121, k=1200)", jit_fwd, numpy_fwd))
        rows.append(("cau_rankone bwd (100x121, k=1200)", jit_bwd, numpy_bwd))
    else:
        rows.append(("cau_rankone fwd (100x121, k=1200)", None, numpy_fwd))
        rows.append(("cau_rankone bwd (100x121, k=1200)", None, numpy_bwd))
    return rows


def bench_fullrank(rng):
    bsz, n, k = 20, 24, 16
    a = rng.uniform(-1, 1, (bsz, n))
    b = rng.uniform(-1, 1, (bsz, n))
    w = rng.uniform(0, 1, (k, n, n))
    g = rng.standard_normal((bsz, k))
    rows = []
    numpy_fwd = _time(K._cau_full_forward_numpy, w, a, b)
    numpy_bwd = _time(K._cau_full_backward_numpy, w, a, b, g)
    if NUMBA_ENABLED:
        jit_fwd = _time(K.cau_full_forward, w, a, b)
        jit_bwd = _time(K.cau_full_backward, w, a, b, g)
        rows.append(("cau_fullrank fwd (20x24, k=16)", jit_fwd, numpy_fwd))
        rows.append(("cau_fullrank bwd (20x24, k=16)", jit_bwd, numpy_bwd))
    else:
        rows.append(("cau_fullrank fwd (20x24, k=16)", None, numpy_fwd))
        rows.append(("cau_fullrank bwd (20x24, k=16)", None, numpy_bwd))
    return rows


def bench_warp(rng):
    imgs = rng.uniform(0, 255, (200, 32, 32))
    hinvs = np.tile(np.eye(3), (200, 1, 1))
    hinvs[:, :2, 2] = rng.uniform(-4, 4, (200, 2))
    out = np.empty_like(imgs)
    rows = []
    numpy_t = _time(K._warp_batch_numpy, imgs, hinvs, out)
    if NUMBA_ENABLED:
        jit_t = _time(K.warp_batch_kernel, imgs, hinvs, out)
        rows.append(("warp_batch (200 x 32x32)", jit_t, numpy_t))
    else:
        rows.append(("warp_batch (200 x 32x32)", None, numpy_t))
    return rows


def main():
    rng = np.random.default_rng(0)
    print(f"numba path: {'enabled' if NUMBA_ENABLED else 'DISABLED (CAUNET_DISABLE_NUMBA)'}")
    print(f"{'kernel':<38}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for bench in (bench_rankone, bench_fullrank, bench_warp):
        for name, jit_t, numpy_t in bench(rng):
            jit_s = f"{jit_t * 1e3:9.3f}ms" if jit_t is not None else "       n/a"
            ratio = f"{numpy_t / jit_t:9.2f}x" if jit_t is not None else "       n/a"
            print(f"{name:<38}{jit_s:>12}{numpy_t * 1e3:>10.3f}ms{ratio:>10}")


if __name__ == "__main__":
    main()
