"""Benchmark harness: warmup runs are discarded, then ``reps`` timed runs."""
from __future__ import annotations

import csv
import os
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .fast import dwconv1d_fast_bwd, dwconv1d_fast_fwd, plan_build
from .geometry import ConvConfig, InvalidConfigError, direction_angles
from .reference import dwconv1d_fwd, dwconv2d_standard_fwd
from .tensor import default_threads, tensor_random

BENCH_OPS = ("dw1d", "dw1d-train", "dw1d-ref", "dw2d")
GRID_ANGLES = tuple(22.5 * i for i in range(8))
GRID_K = (7, 31)
GRID_H = (14, 28, 56)
GRID_MODES = ("inference", "training")
MODE_OPS = {"inference": "dw1d", "training": "dw1d-train"}


@dataclass
class BenchReport:
    op_id: str
    N: int
    C: int
    H: int
    W: int
    K: int
    angle_deg: float
    dirs: int
    stride: int
    dtype: str
    threads: int
    reps: int
    warmup: int
    mean_ns: float
    std_ns: float
    mads_per_element: int

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.std_ns < 0:
            raise ValueError("std_ns must be non-negative")

    def row(self):
        return [repr(v) if isinstance(v, float) else str(v) for v in asdict(self).values()]


CSV_HEADER = [f.name for f in fields(BenchReport)]


def append_csv(report: BenchReport, path):
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        out = csv.writer(fh)
        if fresh:
            out.writerow(CSV_HEADER)
        out.writerow(report.row())


def time_ns(fn, reps=100, warmup=10):
    """Per-run wall times in nanoseconds from a monotonic clock."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    for _ in range(warmup):
        fn()
    out = np.empty(reps, dtype=np.float64)
    for i in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        out[i] = time.perf_counter_ns() - t0
    return out


def time_interleaved(fns, reps=100, warmup=10):
    """Mean ns for each callable, visiting them round-robin within every rep.

    Interleaving spreads slow drifts of the machine (frequency, noisy
    neighbours) evenly over the callables being compared.
    """
    for _ in range(warmup):
        for fn in fns:
            fn()
    samples = np.empty((reps, len(fns)), dtype=np.float64)
    for i in range(reps):
        for j, fn in enumerate(fns):
            t0 = time.perf_counter_ns()
            fn()
            samples[i, j] = time.perf_counter_ns() - t0
    return samples.mean(axis=0)


def _summary(samples):
    std = float(np.std(samples, ddof=1)) if len(samples) > 1 else 0.0
    return float(np.mean(samples)), std


def make_case(op, N, C, H, W, K, angle=0.0, dirs=1, stride=1, dtype=np.float32, threads=None, seed=0):
    """Return ``(fn, mads_per_element)`` with all setup (plans, inputs) done up front."""
    if op not in BENCH_OPS:
        raise InvalidConfigError(f"unknown bench op {op!r}; expected one of {BENCH_OPS}")
    if min(N, C, H, W, K) < 1:
        raise InvalidConfigError("all dimensions must be >= 1")
    dtype = np.dtype(dtype)
    threads = default_threads() if threads is None else threads
    x = tensor_random((N, H, W, C), dtype, seed)
    if op == "dw2d":
        w = tensor_random((K, K, C), dtype, seed + 1)
        return (lambda: dwconv2d_standard_fwd(x, w, stride, K // 2)), K * K
    angles = (direction_angles(dirs, C) if dirs > 1 else np.zeros(C)) + angle
    cfg = ConvConfig(K, stride=stride)
    w = tensor_random((K, C), dtype, seed + 1)
    if op == "dw1d-ref":
        return (lambda: dwconv1d_fwd(x, w, angles, cfg)), K
    plan = plan_build(H, W, K, angles, dtype, thread_count=threads, cfg=cfg)
    if op == "dw1d":
        return (lambda: dwconv1d_fast_fwd(x, w, angles, cfg, plan)), K
    dy = tensor_random(dwconv1d_fast_fwd(x, w, angles, cfg, plan).shape, dtype, seed + 2)

    def train():
        dwconv1d_fast_fwd(x, w, angles, cfg, plan)
        dwconv1d_fast_bwd(x, w, angles, cfg, plan, dy)

    # forward K plus K for each of dx and dw
    return train, 3 * K


def run_bench(op, N=1, C=64, H=56, W=None, K=31, angle=0.0, dirs=1, stride=1, dtype=np.float32,
              threads=None, reps=100, warmup=10, seed=0) -> BenchReport:
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    W = H if W is None else W
    threads = default_threads() if threads is None else threads
    fn, mads = make_case(op, N, C, H, W, K, angle, dirs, stride, dtype, threads, seed)
    mean, std = _summary(time_ns(fn, reps, warmup))
    return BenchReport(op, N, C, H, W, K, float(angle), dirs, stride, np.dtype(dtype).name,
                       threads, reps, warmup, mean, std, mads)


def runtime_grid(N=64, C=512):
    """Parameter rows for the runtime grid: K x H x mode x angle (96 rows)."""
    return [
        dict(op=MODE_OPS[mode], N=N, C=C, H=H, K=K, angle=a)
        for K in GRID_K for H in GRID_H for mode in GRID_MODES for a in GRID_ANGLES
    ]
