"""Self-check suites behind ``orik verify``.

Every check returns ``Check(suite, name, passed, metric)``; the metric is the
quantity compared against the threshold (an error, a ratio, or a count).
Results depend only on the seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (
    GaussianSpec,
    gaussian_separability_check,
    mad_count,
    separable_error,
    verify_downsampling_decomposition,
)
from .blocks import NetworkConfig, init_params, network_fwd, network_grad_input
from .fast import dwconv1d_fast_bwd, dwconv1d_fast_fwd, plan_build
from .geometry import ConvConfig, direction_angles
from .reference import (
    MadCounter,
    SoftConfig,
    dsc2d_fwd,
    dsc_fwd,
    dwconv1d_bilinear_fwd,
    dwconv1d_bwd,
    dwconv1d_fwd,
    dwconv2d_standard_fwd,
    out_size,
    pointwise_fwd,
    softconv_fwd,
    softconv_grad_theta,
)
from .tape import Tape
from .tensor import default_threads, tensor_random

SUITES = ("conv", "grad", "decomp", "gauss", "plan")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    metric: float

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "metric", float(self.metric))

    def as_dict(self):
        return {"suite": self.suite, "name": self.name, "pass": self.passed, "metric": self.metric}


# -- independent oracles --------------------------------------------------------


def axis_oracle(x, w, vertical, stride=1, pad=None):
    """Zero-padded 1D correlation along one image axis.

    Horizontal taps read ``x[h, w + k - pad]``; vertical taps read
    ``x[h - (k - pad), w]`` (the kernel axis points up at 90 degrees).
    Accumulates from zero over ascending ``k`` in the input dtype.
    """
    K = w.shape[0]
    pad = K // 2 if pad is None else pad
    N, H, W, C = x.shape
    P, Q = out_size(H, stride), out_size(W, stride)
    m = K
    xp = np.zeros((N, H + 2 * m, W + 2 * m, C), dtype=x.dtype)
    xp[:, m:m + H, m:m + W] = x
    rows = np.arange(P) * stride + m
    cols = np.arange(Q) * stride + m
    acc = np.zeros((N, P, Q, C), dtype=x.dtype)
    for k in range(K):
        u = k - pad
        r, c = (rows - u, cols) if vertical else (rows, cols + u)
        acc = acc + xp[:, r][:, :, c] * w[k]
    return acc


def central_fd(f, x, idx, eps):
    xp, xm = x.copy(), x.copy()
    xp[idx] += eps
    xm[idx] -= eps
    return (f(xp) - f(xm)) / (2 * eps)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(floor, abs(a), abs(b))


# -- suites ----------------------------------------------------------------------


def _rng(seed, salt):
    return np.random.default_rng([seed, salt])


def suite_conv(seed=0):
    out = []
    rng = _rng(seed, 1)
    worst = 0
    for i in range(20):
        K = int(rng.choice([1, 3, 5, 7, 15]))
        H, W = (int(v) for v in rng.integers(1, 20, 2))
        C, stride = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        x = tensor_random((2, H, W, C), np.float32, seed * 1000 + i)
        w = tensor_random((K, C), np.float32, seed * 1000 + i + 500)
        for angle, vertical in ((0.0, False), (90.0, True)):
            y = dwconv1d_fwd(x, w, np.full(C, angle), ConvConfig(K, stride=stride))
            worst += int(not np.array_equal(y, axis_oracle(x, w, vertical, stride)))
    out.append(Check("conv", "axis_reduction_bitwise", worst == 0, worst))

    mism = 0
    threads = (1, max(2, default_threads()))
    for K in (3, 7, 31):
        for stride in (1, 2):
            angles = direction_angles(8, 16)
            x = tensor_random((2, 14, 14, 16), np.float32, seed + K + stride)
            w = tensor_random((K, 16), np.float32, seed + K + stride + 7)
            cfg = ConvConfig(K, stride=stride)
            ref = dwconv1d_fwd(x, w, angles, cfg)
            for t in threads:
                plan = plan_build(14, 14, K, angles, np.float32, thread_count=t, cfg=cfg)
                mism += int(not np.array_equal(dwconv1d_fast_fwd(x, w, angles, cfg, plan), ref))
    out.append(Check("conv", "fast_equals_reference_bitwise", mism == 0, mism))

    x = tensor_random((1, 9, 9, 3), np.float64, seed + 3)
    w = tensor_random((5, 3), np.float64, seed + 4)
    ang = np.array([0.0, 90.0, 180.0])
    err = float(np.max(np.abs(
        dwconv1d_bilinear_fwd(x, w, ang, ConvConfig(5, discretization="bilinear"))
        - dwconv1d_fwd(x, w, ang, ConvConfig(5)))))
    out.append(Check("conv", "bilinear_matches_round_down_on_grid_angles", err == 0.0, err))

    bad = 0
    N, H, C, Cp = 1, 6, 4, 3
    elements = N * H * H * C
    x = tensor_random((N, H, H, C), np.float64, seed + 5)
    for op, K, run in (
        ("dw1d", 7, lambda m: dwconv1d_fwd(x, np.ones((7, C)), np.zeros(C), ConvConfig(7), m)),
        ("bilinear1d", 7, lambda m: dwconv1d_bilinear_fwd(
            x, np.ones((7, C)), np.full(C, 30.0), ConvConfig(7, discretization="bilinear"), m)),
        ("dw2d", 5, lambda m: dwconv2d_standard_fwd(x, np.ones((5, 5, C)), 1, 2, m)),
    ):
        m = MadCounter()
        run(m)
        bad += int(m.total != mad_count(op, K, elements=elements).total_mads)
    m = MadCounter()
    pointwise_fwd(x, np.ones((C, Cp)), m)
    bad += int(m.total != mad_count("pw", C_prime=Cp, elements=elements).total_mads)
    m = MadCounter()
    dsc_fwd(x, np.ones((7, C)), np.zeros(C), ConvConfig(7), np.ones((C, Cp)), m)
    bad += int(m.total != mad_count("dsc1d", 7, Cp, elements).total_mads)
    m = MadCounter()
    dsc2d_fwd(x, np.ones((5, 5, C)), np.ones((C, Cp)), mads=m)
    bad += int(m.total != mad_count("dsc2d", 5, Cp, elements).total_mads)
    out.append(Check("conv", "mad_counters_match_closed_forms", bad == 0, bad))

    r1 = mad_count("dw2d", 7).per_element_mads / mad_count("dw1d", 31).per_element_mads
    r2 = mad_count("dsc2d", 7, 512).per_element_mads / mad_count("dsc1d", 31, 512).per_element_mads
    r3 = mad_count("bilinear1d", 31).per_element_mads / mad_count("dw1d", 31).per_element_mads
    out.append(Check("conv", "mad_ratio_dw", abs(r1 - 1.58) <= 0.005, r1))
    out.append(Check("conv", "mad_ratio_dsc", abs(r2 - 1.03) <= 0.005, r2))
    out.append(Check("conv", "mad_ratio_bilinear", r3 == 4.0, r3))
    return out


def suite_grad(seed=0, cases=10):
    out = []
    rng = _rng(seed, 2)
    worst = 0.0
    for i in range(cases):
        K = int(rng.choice([3, 5, 7]))
        stride = int(rng.integers(1, 3))
        C = int(rng.integers(1, 4))
        angles = rng.uniform(0, 180, C)
        cfg = ConvConfig(K, stride=stride)
        x = tensor_random((1, 7, 6, C), np.float64, seed * 100 + i)
        w = tensor_random((K, C), np.float64, seed * 100 + i + 50)
        dy = tensor_random(dwconv1d_fwd(x, w, angles, cfg).shape, np.float64, seed * 100 + i + 99)
        dx, dw = dwconv1d_bwd(x, w, angles, cfg, dy)
        ix = tuple(int(rng.integers(0, s)) for s in x.shape)
        iw = tuple(int(rng.integers(0, s)) for s in w.shape)
        fx = central_fd(lambda v: np.sum(dwconv1d_fwd(v, w, angles, cfg) * dy), x, ix, 1e-6)
        fw = central_fd(lambda v: np.sum(dwconv1d_fwd(x, v, angles, cfg) * dy), w, iw, 1e-6)
        worst = max(worst, rel_err(fx, dx[ix]), rel_err(fw, dw[iw]))
    out.append(Check("grad", "dwconv1d_bwd_vs_finite_differences", worst <= 1e-5, worst))

    angles = direction_angles(4, 8)
    cfg = ConvConfig(7, stride=2)
    x = tensor_random((2, 13, 11, 8), np.float64, seed + 11)
    w = tensor_random((7, 8), np.float64, seed + 12)
    dy = tensor_random(dwconv1d_fwd(x, w, angles, cfg).shape, np.float64, seed + 13)
    rdx, rdw = dwconv1d_bwd(x, w, angles, cfg, dy)
    plan = plan_build(13, 11, 7, angles, np.float64, thread_count=2, cfg=cfg)
    fdx, fdw = dwconv1d_fast_bwd(x, w, angles, cfg, plan, dy)
    out.append(Check("grad", "fast_dx_equals_reference_bitwise", bool(np.array_equal(fdx, rdx)),
                     float(np.max(np.abs(fdx - rdx)))))
    e = float(np.max(np.abs(fdw - rdw)))
    out.append(Check("grad", "fast_dw_matches_reference", e <= 1e-10, e))

    ncfg = NetworkConfig(c0=4, channels=(4, 4, 8, 8), blocks=(1, 0, 0, 0), k=(5, 5, 5, 5), d=2,
                         block_kind="1d++")
    params = init_params(ncfg, seed)
    x = tensor_random((1, 32, 32, 3), np.float64, seed + 21)
    tape = Tape()
    y = network_fwd(x, ncfg, params, tape)
    dy = tensor_random(y.shape, np.float64, seed + 22)
    g = network_grad_input(tape, dy)
    worst = 0.0
    for _ in range(cases):
        ix = tuple(int(rng.integers(0, s)) for s in x.shape)
        fd = central_fd(lambda v: np.sum(network_fwd(v, ncfg, params) * dy), x, ix, 1e-6)
        worst = max(worst, rel_err(fd, g[ix]))
    out.append(Check("grad", "network_grad_input_vs_finite_differences", worst <= 1e-5, worst))

    worst = 0.0
    for i in range(max(2, cases // 2)):
        theta = float(rng.uniform(0, 180))
        soft = SoftConfig(theta, sigma=0.6, radius=1.8, K=5)
        x = tensor_random((1, 8, 8, 2), np.float64, seed + 40 + i)
        w = tensor_random((5, 2), np.float64, seed + 60 + i)
        dy = tensor_random((1, 8, 8, 2), np.float64, seed + 80 + i)
        g = softconv_grad_theta(x, w, soft, dy)
        h = 1e-4
        fp = np.sum(softconv_fwd(x, w, SoftConfig(theta + h, 0.6, 1.8, 5)) * dy)
        fm = np.sum(softconv_fwd(x, w, SoftConfig(theta - h, 0.6, 1.8, 5)) * dy)
        worst = max(worst, rel_err((fp - fm) / (2 * np.deg2rad(h)), g))
    out.append(Check("grad", "softconv_grad_theta_vs_finite_differences", worst <= 1e-4, worst))
    return out


def suite_decomp(seed=0):
    out = []
    w = tensor_random((2, 2, 4), np.float64, seed + 31)
    e = verify_downsampling_decomposition(w, seed_count=10)
    out.append(Check("decomp", "downsampling_decomposition_f64", e <= 1e-12, e))
    e = verify_downsampling_decomposition(w.astype(np.float32), seed_count=10, dtype=np.float32)
    out.append(Check("decomp", "downsampling_decomposition_f32", e <= 1e-6, e))
    e = verify_downsampling_decomposition(np.zeros((2, 2, 4)), seed_count=2)
    out.append(Check("decomp", "zero_kernel_exact", e == 0.0, e))
    return out


def suite_gauss(seed=0):
    out = []
    x = tensor_random((1, 16, 16, 3), np.float64, seed + 41)
    worst = 0.0
    for sigma in (0.5, 1.0, 2.0):
        for K in (5, 7, 9):
            worst = max(worst, gaussian_separability_check(GaussianSpec(sigma, sigma, K), x))
    out.append(Check("gauss", "isotropic_gaussian_separable", worst <= 1e-12, worst))
    e = gaussian_separability_check(GaussianSpec(0.7, 2.3, 9), x)
    out.append(Check("gauss", "axis_aligned_anisotropic_separable", e <= 1e-12, e))
    worst = 0.0
    for i in range(5):
        taps = tensor_random((2, 7), np.float64, seed + 300 + i)
        worst = max(worst, separable_error(x, taps[0], taps[1]))
    out.append(Check("gauss", "random_separable_composition", worst <= 1e-12, worst))
    return out


def suite_plan(seed=0):
    out = []
    angles = direction_angles(8, 16)
    over, uncovered, nondet = 0, 0, 0
    for K in (7, 31, 63):
        for H in (14, 28, 56):
            for stride in (1, 2):
                cfg = ConvConfig(K, stride=stride)
                p = plan_build(H, H, K, angles, np.float32, cfg=cfg)
                over += int(p.footprint_bytes() > p.cache_budget)
                nondet += int(not p.same_as(plan_build(H, H, K, angles, np.float32, cfg=cfg)))
                P = out_size(H, stride)
                cover = np.zeros((2, P, P, 16), dtype=np.int64)
                for n, p0, p1, q0, q1, c0, c1 in p.tasks(2):
                    cover[n, p0:p1, q0:q1, c0:c1] += 1
                uncovered += int(not np.all(cover == 1))
    out.append(Check("plan", "footprint_within_budget", over == 0, over))
    out.append(Check("plan", "tasks_cover_output_once", uncovered == 0, uncovered))
    out.append(Check("plan", "plan_deterministic", nondet == 0, nondet))
    x = tensor_random((2, 28, 28, 16), np.float32, seed + 51)
    w = tensor_random((31, 16), np.float32, seed + 52)
    cfg = ConvConfig(31)
    ys = [dwconv1d_fast_fwd(x, w, angles, cfg, plan_build(28, 28, 31, angles, thread_count=t))
          for t in (1, 2, 3, 4)]
    diff = sum(int(not np.array_equal(ys[0], y)) for y in ys[1:])
    out.append(Check("plan", "thread_count_invariant", diff == 0, diff))
    return out


_SUITES = {
    "conv": suite_conv,
    "grad": suite_grad,
    "decomp": suite_decomp,
    "gauss": suite_gauss,
    "plan": suite_plan,
}


def run_suite(name, seed=0):
    if name == "all":
        return [c for s in SUITES for c in _SUITES[s](seed)]
    if name not in _SUITES:
        raise KeyError(name)
    return _SUITES[name](seed)
