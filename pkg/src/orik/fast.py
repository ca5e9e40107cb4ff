"""Banded oriented 1D depthwise convolution on CPU.

The output grid is cut into vertical bands (column ranges). A task owns one
``(image, band, tile, channel block)`` and copies its input footprint plus a
halo into a contiguous scratch buffer once; every tap then reads that
scratch through a precomputed per-channel offset table, so the inner loop
costs the same for every angle.

Each output element is accumulated from zero over ascending ``k`` in the
tensor dtype, exactly like :func:`orik.reference.dwconv1d_fwd`, and is
written by a single task. Results are therefore bitwise identical to the
reference for any thread count or band size.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import check_kernel, check_nhwc
from .geometry import ConvConfig, InvalidConfigError, OffsetTable, angle_tables
from .reference import MadCounter, out_size
from .tensor import default_threads

DEFAULT_CACHE_BUDGET = 256 * 1024


@dataclass(frozen=True, eq=False)
class ExecutionPlan:
    H: int
    W: int
    K: int
    stride: int
    dtype: np.dtype
    band_width: int
    band_height: int
    halo_h: int
    halo_w: int
    channel_block: int
    thread_count: int
    cache_budget: int
    angles: tuple
    tables: tuple[OffsetTable, ...]
    channel_table: np.ndarray
    dh: np.ndarray
    dw: np.ndarray

    def same_as(self, other: "ExecutionPlan") -> bool:
        keys = ("H", "W", "K", "stride", "dtype", "band_width", "band_height", "halo_h",
                "halo_w", "channel_block", "thread_count", "cache_budget", "angles")
        return (all(getattr(self, k) == getattr(other, k) for k in keys)
                and np.array_equal(self.dh, other.dh) and np.array_equal(self.dw, other.dw))

    def footprint_bytes(self) -> int:
        cb = min(self.channel_block, len(self.angles))
        return ((self.band_width + 2 * self.halo_w) * (self.band_height + 2 * self.halo_h)
                * cb * self.dtype.itemsize)

    @property
    def out_rows_per_tile(self):
        return out_size(self.band_height, self.stride)

    @property
    def out_cols_per_band(self):
        return out_size(self.band_width, self.stride)

    def tasks(self, N):
        """Task table ``(n, p0, p1, q0, q1, c0, c1)`` in a fixed order."""
        P, Q = out_size(self.H, self.stride), out_size(self.W, self.stride)
        C = len(self.angles)
        tp, tq, cb = self.out_rows_per_tile, self.out_cols_per_band, self.channel_block
        rows = []
        for n in range(N):
            for q0 in range(0, Q, tq):
                for p0 in range(0, P, tp):
                    for c0 in range(0, C, cb):
                        rows.append((n, p0, min(P, p0 + tp), q0, min(Q, q0 + tq), c0, min(C, c0 + cb)))
        return np.array(rows, dtype=np.int64).reshape(-1, 7)


def plan_build(H, W, K, angles, dtype=np.float32, cache_budget_bytes=DEFAULT_CACHE_BUDGET,
               thread_count=None, *, cfg: ConvConfig | None = None, channel_block=8) -> ExecutionPlan:
    """Pick band sizes so a task's footprint fits in ``cache_budget_bytes``.

    Among all tile heights, the one copying the fewest scratch elements in
    total (tiles x footprint) wins; ties go to the taller tile, so bands
    span the full height whenever the budget allows.
    """
    cfg = ConvConfig(K) if cfg is None else cfg
    if cfg.K != K:
        raise InvalidConfigError(f"K={K} disagrees with cfg.K={cfg.K}")
    if cfg.discretization != "round-down":
        raise InvalidConfigError("the fast path supports round-down discretization only")
    if H < 1 or W < 1:
        raise InvalidConfigError(f"invalid spatial size {H}x{W}")
    angles = tuple(float(a) for a in np.asarray(angles, dtype=np.float64))
    if not angles:
        raise InvalidConfigError("need at least one channel")
    dtype = np.dtype(dtype)
    thread_count = default_threads() if thread_count is None else int(thread_count)
    if thread_count < 1 or channel_block < 1:
        raise InvalidConfigError("thread_count and channel_block must be >= 1")
    tables, index = angle_tables(cfg, angles)
    halo_h = max(t.halo()[0] for t in tables)
    halo_w = max(t.halo()[1] for t in tables)
    cb = min(channel_block, len(angles))
    unit = cb * dtype.itemsize
    best = None
    for bh in range(H, 0, -1):
        bw = min(W, cache_budget_bytes // ((bh + 2 * halo_h) * unit) - 2 * halo_w)
        if bw < 1:
            continue
        tiles = -(-H // bh) * -(-W // bw)
        copied = tiles * (bh + 2 * halo_h) * (bw + 2 * halo_w)
        if best is None or copied < best[0]:
            best = (copied, bh, bw)
    if best is None:
        raise InvalidConfigError(
            f"cache budget {cache_budget_bytes} B cannot hold a 1x1 tile with halo "
            f"({halo_h}, {halo_w}) and {cb} channels"
        )
    _, bh, bw = best
    dh = np.stack([tables[i].entries[:, 0] for i in index]).astype(np.int64)
    dw = np.stack([tables[i].entries[:, 1] for i in index]).astype(np.int64)
    return ExecutionPlan(H, W, K, cfg.stride, dtype, int(bw), int(bh), halo_h, halo_w,
                         channel_block, thread_count, int(cache_budget_bytes), angles,
                         tuple(tables), index, dh, dw)


@numba.njit(nogil=True, cache=True)
def _fwd_tasks(x, w, dh, dw, stride, halo_h, halo_w, tasks, y, mads):
    H, W = x.shape[1], x.shape[2]
    K = w.shape[0]
    for t in range(tasks.shape[0]):
        n, p0, p1, q0, q1, c0, c1 = tasks[t]
        cb = c1 - c0
        h_lo = stride * p0 - halo_h
        w_lo = stride * q0 - halo_w
        fh = stride * (p1 - 1 - p0) + 1 + 2 * halo_h
        fw = stride * (q1 - 1 - q0) + 1 + 2 * halo_w
        scratch = np.zeros((fh, fw, cb), dtype=x.dtype)
        for i in range(fh):
            h = h_lo + i
            if h < 0 or h >= H:
                continue
            for j in range(fw):
                ww = w_lo + j
                if ww < 0 or ww >= W:
                    continue
                for ci in range(cb):
                    scratch[i, j, ci] = x[n, h, ww, c0 + ci]
        uniform = True
        for ci in range(1, cb):
            for k in range(K):
                if dh[c0 + ci, k] != dh[c0, k] or dw[c0 + ci, k] != dw[c0, k]:
                    uniform = False
        if uniform:
            # one table for the whole block: accumulate a full output row so
            # the inner (q, channel) loop walks contiguous scratch memory
            nq = q1 - q0
            row = np.zeros((nq, cb), dtype=x.dtype)
            wk = np.empty(cb, dtype=x.dtype)
            for p in range(p0, p1):
                bi = stride * p - h_lo
                row[:, :] = 0
                for k in range(K):
                    r = bi + dh[c0, k]
                    j0 = stride * q0 - w_lo + dw[c0, k]
                    for ci in range(cb):
                        wk[ci] = w[k, c0 + ci]
                    for qi in range(nq):
                        j = j0 + stride * qi
                        for ci in range(cb):
                            row[qi, ci] += scratch[r, j, ci] * wk[ci]
                for qi in range(nq):
                    for ci in range(cb):
                        y[n, p, q0 + qi, c0 + ci] = row[qi, ci]
        else:
            acc = np.zeros_like(w[0, c0:c1])
            for p in range(p0, p1):
                bi = stride * p - h_lo
                for q in range(q0, q1):
                    bj = stride * q - w_lo
                    for ci in range(cb):
                        acc[ci] = 0
                    for k in range(K):
                        for ci in range(cb):
                            c = c0 + ci
                            acc[ci] += scratch[bi + dh[c, k], bj + dw[c, k], ci] * w[k, c]
                    for ci in range(cb):
                        y[n, p, q, c0 + ci] = acc[ci]
        mads[t] = (p1 - p0) * (q1 - q0) * cb * K


@numba.njit(nogil=True, cache=True)
def _bwd_dx_tasks(dy, w, dh, dw, stride, tasks, dx):
    P, Q = dy.shape[1], dy.shape[2]
    K = w.shape[0]
    for t in range(tasks.shape[0]):
        n, h0, h1, w0, w1, c0, c1 = tasks[t]
        for h in range(h0, h1):
            for ww in range(w0, w1):
                for c in range(c0, c1):
                    acc = dx[n, h, ww, c]
                    for k in range(K):
                        ph = h - dh[c, k]
                        qw = ww - dw[c, k]
                        if ph < 0 or qw < 0 or ph % stride or qw % stride:
                            continue
                        p = ph // stride
                        q = qw // stride
                        if p < P and q < Q:
                            acc += dy[n, p, q, c] * w[k, c]
                    dx[n, h, ww, c] = acc


@numba.njit(nogil=True, cache=True)
def _bwd_dw_tasks(x, dy, dh, dw, stride, tasks, partial):
    H, W = x.shape[1], x.shape[2]
    K = partial.shape[1]
    for t in range(tasks.shape[0]):
        n, p0, p1, q0, q1, c0, c1 = tasks[t]
        for k in range(K):
            for c in range(c0, c1):
                acc = partial[t, k, c]
                for p in range(p0, p1):
                    h = stride * p + dh[c, k]
                    if h < 0 or h >= H:
                        continue
                    for q in range(q0, q1):
                        ww = stride * q + dw[c, k]
                        if ww < 0 or ww >= W:
                            continue
                        acc += dy[n, p, q, c] * x[n, h, ww, c]
                partial[t, k, c] = acc


def _check_plan(x, w, angles, cfg, plan):
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=2)
    N, H, W, C = x.shape
    if (H, W) != (plan.H, plan.W) or w.shape != (plan.K, C) or len(plan.angles) != C:
        raise InvalidConfigError(
            f"plan built for H={plan.H} W={plan.W} K={plan.K} C={len(plan.angles)}, "
            f"got x {x.shape} and w {w.shape}"
        )
    if cfg is not None and (cfg.K != plan.K or cfg.stride != plan.stride):
        raise InvalidConfigError("cfg does not match the plan")
    if angles is not None and tuple(float(a) for a in np.asarray(angles, dtype=np.float64)) != plan.angles:
        raise InvalidConfigError("angles do not match the plan")
    return x, w


def _run(fn, tasks, threads):
    """Call ``fn`` on contiguous chunks of the task table, one chunk per worker."""
    n = len(tasks)
    threads = max(1, min(threads, n))
    if threads == 1:
        fn(0, n)
        return
    bounds = np.linspace(0, n, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for f in [pool.submit(fn, a, b) for a, b in zip(bounds[:-1], bounds[1:])]:
            f.result()


def dwconv1d_fast_fwd(x, w, angles, cfg: ConvConfig | None, plan: ExecutionPlan,
                      mads: MadCounter | None = None):
    x, w = _check_plan(x, w, angles, cfg, plan)
    N, H, W, C = x.shape
    P, Q = out_size(H, plan.stride), out_size(W, plan.stride)
    y = np.empty((N, P, Q, C), dtype=x.dtype)
    tasks = plan.tasks(N)
    counts = np.zeros(len(tasks), dtype=np.int64)
    _run(lambda a, b: _fwd_tasks(x, w, plan.dh, plan.dw, plan.stride, plan.halo_h, plan.halo_w,
                                 tasks[a:b], y, counts[a:b]),
         tasks, plan.thread_count)
    if mads is not None:
        mads.add(int(counts.sum()))
    return y


def _input_tasks(plan, N):
    C = len(plan.angles)
    rows = []
    for n in range(N):
        for w0 in range(0, plan.W, plan.band_width):
            for h0 in range(0, plan.H, plan.band_height):
                for c0 in range(0, C, plan.channel_block):
                    rows.append((n, h0, min(plan.H, h0 + plan.band_height), w0,
                                 min(plan.W, w0 + plan.band_width), c0, min(C, c0 + plan.channel_block)))
    return np.array(rows, dtype=np.int64).reshape(-1, 7)


def dwconv1d_fast_bwd(x, w, angles, cfg: ConvConfig | None, plan: ExecutionPlan, dy):
    """Banded adjoint. ``dx`` is gathered per input element over ascending ``k``
    (bitwise equal to the reference); ``dw`` merges per-task partial sums in
    task order, so it is deterministic but only tolerance-equal to the reference.
    """
    x, w = _check_plan(x, w, angles, cfg, plan)
    N, H, W, C = x.shape
    P, Q = out_size(H, plan.stride), out_size(W, plan.stride)
    dy = np.ascontiguousarray(dy, dtype=x.dtype)
    if dy.shape != (N, P, Q, C):
        raise InvalidConfigError(f"dy has shape {dy.shape}, expected {(N, P, Q, C)}")
    dx = np.zeros_like(x)
    in_tasks = _input_tasks(plan, N)
    out_tasks = plan.tasks(N)
    partial = np.zeros((len(out_tasks), plan.K, C), dtype=x.dtype)
    _run(lambda a, b: _bwd_dx_tasks(dy, w, plan.dh, plan.dw, plan.stride, in_tasks[a:b], dx),
         in_tasks, plan.thread_count)
    _run(lambda a, b: _bwd_dw_tasks(x, dy, plan.dh, plan.dw, plan.stride, out_tasks[a:b], partial[a:b]),
         out_tasks, plan.thread_count)
    dw = np.zeros_like(w)
    for t in range(len(out_tasks)):
        dw += partial[t]
    return dx, dw
