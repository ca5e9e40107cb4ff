"""Naive convolution oracles.

Every op here is written for clarity, not speed: one vectorized
multiply-add per kernel tap over all output pixels of a channel group.
Accumulation always starts from zero and runs over taps in ascending order
(``k`` for 1D, ``(r, s)`` lexicographic for 2D) in the tensor dtype. That
order is part of the contract, the fast path reproduces it bit for bit.

Reads outside the input are zero ("same" zero padding); the output of an
oriented op has ``P = (H - 1) // stride + 1`` rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_kernel, check_nhwc
from .geometry import ConvConfig, InvalidConfigError, angle_tables, offsets_for, sincos


class MadCounter:
    """Tally of multiply-adds actually issued by an instrumented op."""

    def __init__(self):
        self.total = 0

    def add(self, n):
        self.total += int(n)


@dataclass(frozen=True)
class SoftConfig:
    theta_deg: float
    sigma: float
    radius: float
    K: int
    pad: float | None = None
    stride: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.radius < 0:
            raise InvalidConfigError(f"radius must be >= 0, got {self.radius}")
        if self.K < 1 or self.stride < 1:
            raise InvalidConfigError("K and stride must be >= 1")
        if self.pad is None:
            object.__setattr__(self, "pad", self.K // 2)


def out_size(n: int, stride: int) -> int:
    return (n - 1) // stride + 1


def _channel_groups(index):
    """Channel selectors per table: a slice when the group is contiguous."""
    groups = []
    for t in range(int(index.max()) + 1 if len(index) else 0):
        chans = np.flatnonzero(index == t)
        if chans[-1] - chans[0] + 1 == len(chans):
            groups.append(slice(int(chans[0]), int(chans[-1]) + 1))
        else:
            groups.append(chans)
    return groups


def _pad(x, m):
    return np.pad(x, ((0, 0), (m, m), (m, m), (0, 0)))


def _window(xpad, m, dh, dw, stride, P, Q):
    """View of the padded input read by tap ``(dh, dw)`` at every output anchor."""
    h0, w0 = m + dh, m + dw
    return xpad[:, h0 : h0 + stride * (P - 1) + 1 : stride, w0 : w0 + stride * (Q - 1) + 1 : stride, :]


def _margin(tables):
    return max(max(t.halo()) for t in tables)


def _check_1d(x, w, angles):
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=2)
    angles = np.asarray(angles, dtype=np.float64)
    if w.shape[1] != x.shape[3] or len(angles) != x.shape[3]:
        raise ValueError(
            f"channel mismatch: x has {x.shape[3]}, w has {w.shape[1]}, angles has {len(angles)}"
        )
    return x, w, angles


def dwconv1d_fwd(x, w, angles, cfg: ConvConfig, mads: MadCounter | None = None):
    """Oriented 1D depthwise convolution, round-down discretization.

    ``w`` is ``(K, C)``; ``angles`` holds one angle (degrees) per channel.
    Any parameterization and an optional even-kernel exterior padding are
    honored through the offset table.
    """
    x, w, angles = _check_1d(x, w, angles)
    if cfg.discretization != "round-down":
        raise InvalidConfigError("dwconv1d_fwd requires round-down discretization")
    if w.shape[0] != cfg.K:
        raise ValueError(f"kernel has {w.shape[0]} taps, config says K={cfg.K}")
    N, H, W, C = x.shape
    P, Q = out_size(H, cfg.stride), out_size(W, cfg.stride)
    tables, index = angle_tables(cfg, angles)
    m = _margin(tables)
    xpad = _pad(x, m)
    y = np.zeros((N, P, Q, C), dtype=x.dtype)
    for table, sel in zip(tables, _channel_groups(index)):
        xg = xpad[..., sel]
        acc = np.zeros((N, P, Q, xg.shape[3]), dtype=x.dtype)
        for k, (dh, dw) in enumerate(table.entries):
            acc += _window(xg, m, dh, dw, cfg.stride, P, Q) * w[k, sel]
            if mads is not None:
                mads.add(acc.size)
        y[..., sel] = acc
    return y


def dwconv1d_bwd(x, w, angles, cfg: ConvConfig, dy):
    """Adjoint of :func:`dwconv1d_fwd`: returns ``(dx, dw)``.

    ``dx`` accumulates each tap's scatter in ascending ``k`` so every input
    element receives its contributions in a fixed order.
    """
    x, w, angles = _check_1d(x, w, angles)
    N, H, W, C = x.shape
    P, Q = out_size(H, cfg.stride), out_size(W, cfg.stride)
    dy = np.asarray(dy)
    if dy.shape != (N, P, Q, C):
        raise ValueError(f"dy has shape {dy.shape}, expected {(N, P, Q, C)}")
    dy = dy.astype(x.dtype, copy=False)
    tables, index = angle_tables(cfg, angles)
    m = _margin(tables)
    xpad = _pad(x, m)
    dxpad = np.zeros_like(xpad)
    dw = np.zeros_like(w)
    for table, sel in zip(tables, _channel_groups(index)):
        xg = xpad[..., sel]
        dyg = dy[..., sel]
        dxg = np.zeros_like(xg)
        for k, (dh, dw_) in enumerate(table.entries):
            _window(dxg, m, dh, dw_, cfg.stride, P, Q)[...] += dyg * w[k, sel]
            dw[k, sel] = np.sum(dyg * _window(xg, m, dh, dw_, cfg.stride, P, Q), axis=(0, 1, 2))
        dxpad[..., sel] = dxg
    return dxpad[:, m : m + H, m : m + W, :], dw


_CORNERS = ((0, 0), (0, 1), (1, 0), (1, 1))


def dwconv1d_bilinear_fwd(x, w, angles, cfg: ConvConfig, mads: MadCounter | None = None):
    """Oriented 1D depthwise convolution with bilinear interpolation (4 reads per tap)."""
    x, w, angles = _check_1d(x, w, angles)
    if cfg.discretization != "bilinear":
        raise InvalidConfigError("dwconv1d_bilinear_fwd requires bilinear discretization")
    N, H, W, C = x.shape
    P, Q = out_size(H, cfg.stride), out_size(W, cfg.stride)
    tables, index = angle_tables(cfg, angles)
    m = _margin(tables)
    xpad = _pad(x, m)
    y = np.zeros((N, P, Q, C), dtype=x.dtype)
    for table, sel in zip(tables, _channel_groups(index)):
        xg = xpad[..., sel]
        acc = np.zeros((N, P, Q, xg.shape[3]), dtype=x.dtype)
        for k, ((dh, dw), (fh, fw)) in enumerate(zip(table.entries, table.frac)):
            weights = ((1 - fh) * (1 - fw), (1 - fh) * fw, fh * (1 - fw), fh * fw)
            for (eh, ew), bw in zip(_CORNERS, weights):
                coef = w[k, sel] * x.dtype.type(bw)
                acc += _window(xg, m, dh + eh, dw + ew, cfg.stride, P, Q) * coef
                if mads is not None:
                    mads.add(acc.size)
        y[..., sel] = acc
    return y


def dwconv1d_even_fwd(x, w, angles, cfg: ConvConfig, mads: MadCounter | None = None):
    if cfg.even_pad is None:
        raise InvalidConfigError("dwconv1d_even_fwd needs cfg.even_pad")
    return dwconv1d_fwd(x, w, angles, cfg, mads=mads)


def oriented2d_offsets(R, S, pad_h, pad_w, theta_deg):
    """Round-down rotated offsets ``floor(R_theta @ (r - pad_h, s - pad_w))`` in (r, s) order."""
    s_, c_ = sincos(theta_deg)
    out = []
    for r in range(R):
        for s in range(S):
            a, b = r - pad_h, s - pad_w
            out.append((math.floor(c_ * a - s_ * b), math.floor(s_ * a + c_ * b)))
    return out


def dwconv2d_oriented_fwd(x, w, angles, stride=1, pad_h=None, pad_w=None):
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=3)
    R, S, C = w.shape
    angles = np.asarray(angles, dtype=np.float64)
    if C != x.shape[3] or len(angles) != C:
        raise ValueError("channel mismatch between x, w and angles")
    pad_h = R // 2 if pad_h is None else pad_h
    pad_w = S // 2 if pad_w is None else pad_w
    N, H, W, _ = x.shape
    P, Q = out_size(H, stride), out_size(W, stride)
    distinct = {}
    index = np.empty(C, dtype=np.int64)
    for c, a in enumerate(angles):
        index[c] = distinct.setdefault(float(a), len(distinct))
    offsets = [oriented2d_offsets(R, S, pad_h, pad_w, a) for a in distinct]
    m = max(max(abs(v) for o in offs for v in o) for offs in offsets)
    xpad = _pad(x, m)
    y = np.zeros((N, P, Q, C), dtype=x.dtype)
    for offs, sel in zip(offsets, _channel_groups(index)):
        xg = xpad[..., sel]
        acc = np.zeros((N, P, Q, xg.shape[3]), dtype=x.dtype)
        for i, (dh, dw) in enumerate(offs):
            acc += _window(xg, m, dh, dw, stride, P, Q) * w[i // S, i % S, sel]
        y[..., sel] = acc
    return y


def _pad2(pad):
    if isinstance(pad, (tuple, list)):
        return int(pad[0]), int(pad[1])
    return int(pad), int(pad)


def _std_geometry(x, w, stride, pad):
    R, S, _ = w.shape
    ph, pw = _pad2(pad)
    N, H, W, C = x.shape
    P = (H + 2 * ph - R) // stride + 1
    Q = (W + 2 * pw - S) // stride + 1
    if P < 1 or Q < 1:
        raise ValueError(f"kernel {R}x{S} does not fit input {H}x{W} with padding {pad}")
    return ph, pw, P, Q


def dwconv2d_standard_fwd(x, w, stride=1, pad=0, mads: MadCounter | None = None):
    """Plain depthwise cross-correlation, output ``(H + 2*pad - R) // stride + 1``."""
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=3)
    if w.shape[2] != x.shape[3]:
        raise ValueError("channel mismatch between x and w")
    R, S, C = w.shape
    ph, pw, P, Q = _std_geometry(x, w, stride, pad)
    m = max(ph, pw)
    xpad = _pad(x, m)
    y = np.zeros((x.shape[0], P, Q, C), dtype=x.dtype)
    for r in range(R):
        for s in range(S):
            y += _window(xpad, m, r - ph, s - pw, stride, P, Q) * w[r, s]
            if mads is not None:
                mads.add(y.size)
    return y


def dwconv2d_standard_bwd(x, w, stride, pad, dy):
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=3)
    R, S, C = w.shape
    ph, pw, P, Q = _std_geometry(x, w, stride, pad)
    N, H, W, _ = x.shape
    m = max(ph, pw)
    xpad = _pad(x, m)
    dxpad = np.zeros_like(xpad)
    dw = np.zeros_like(w)
    for r in range(R):
        for s in range(S):
            _window(dxpad, m, r - ph, s - pw, stride, P, Q)[...] += dy * w[r, s]
            dw[r, s] = np.sum(dy * _window(xpad, m, r - ph, s - pw, stride, P, Q), axis=(0, 1, 2))
    return dxpad[:, m : m + H, m : m + W, :], dw


def pointwise_fwd(x, w, mads: MadCounter | None = None):
    """1x1 convolution; ``w`` is ``(C_in, C_out)``."""
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=2)
    if w.shape[0] != x.shape[3]:
        raise ValueError(f"x has {x.shape[3]} channels, pointwise weights expect {w.shape[0]}")
    if mads is not None:
        mads.add(x.shape[0] * x.shape[1] * x.shape[2] * w.shape[0] * w.shape[1])
    return x @ w


def dsc_fwd(x, w_dw, angles, cfg: ConvConfig, w_pw, mads: MadCounter | None = None):
    return pointwise_fwd(dwconv1d_fwd(x, w_dw, angles, cfg, mads=mads), w_pw, mads=mads)


def dsc2d_fwd(x, w_dw, w_pw, pad=None, mads: MadCounter | None = None):
    pad = w_dw.shape[0] // 2 if pad is None else pad
    return pointwise_fwd(dwconv2d_standard_fwd(x, w_dw, 1, pad, mads=mads), w_pw, mads=mads)


def _soft_taps(soft: SoftConfig, theta_deg=None):
    """Per kernel tap: list of (dh, dw, omega, d_omega/d_theta) kept by the radius cutoff."""
    theta = soft.theta_deg if theta_deg is None else theta_deg
    s, c = sincos(theta)
    r2 = soft.radius * soft.radius
    two_s2 = 2.0 * soft.sigma * soft.sigma
    taps = []
    for k in range(soft.K):
        u = k - soft.pad
        a, b = -u * s, u * c
        da, db = -u * c, -u * s
        entries = []
        rr = int(math.ceil(soft.radius)) + 1
        for dh in range(math.floor(a) - rr, math.ceil(a) + rr + 1):
            for dw in range(math.floor(b) - rr, math.ceil(b) + rr + 1):
                d2 = (dh - a) ** 2 + (dw - b) ** 2
                if d2 > r2:
                    continue
                om = math.exp(-d2 / two_s2)
                dom = om * ((dh - a) * da + (dw - b) * db) / (soft.sigma * soft.sigma)
                entries.append((dh, dw, om, dom))
        taps.append(entries)
    return taps


def _soft_margin(taps):
    return max([abs(v) for entries in taps for e in entries for v in e[:2]] + [0])


def softconv_fwd(x, w, soft: SoftConfig):
    """Gaussian-relaxed oriented 1D convolution with a single angle for all channels."""
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=2)
    if w.shape != (soft.K, x.shape[3]):
        raise ValueError(f"w has shape {w.shape}, expected {(soft.K, x.shape[3])}")
    N, H, W, C = x.shape
    P, Q = out_size(H, soft.stride), out_size(W, soft.stride)
    taps = _soft_taps(soft)
    m = _soft_margin(taps)
    xpad = _pad(x, m)
    y = np.zeros((N, P, Q, C), dtype=x.dtype)
    for k, entries in enumerate(taps):
        for dh, dw, om, _ in entries:
            y += _window(xpad, m, dh, dw, soft.stride, P, Q) * (w[k] * om)
    return y


def softconv_grad_theta(x, w, soft: SoftConfig, dy) -> float:
    """d<dy, softconv_fwd> / d(theta) with theta in radians."""
    x = check_nhwc(x)
    w = check_kernel(w, x.dtype, ndim=2)
    N, H, W, C = x.shape
    P, Q = out_size(H, soft.stride), out_size(W, soft.stride)
    dy = np.asarray(dy, dtype=x.dtype)
    if dy.shape != (N, P, Q, C):
        raise ValueError(f"dy has shape {dy.shape}, expected {(N, P, Q, C)}")
    taps = _soft_taps(soft)
    m = _soft_margin(taps)
    xpad = _pad(x, m)
    total = 0.0
    for k, entries in enumerate(taps):
        for dh, dw, _, dom in entries:
            per_channel = np.sum(dy * _window(xpad, m, dh, dw, soft.stride, P, Q), axis=(0, 1, 2))
            total += dom * float(per_channel @ w[k])
    return total
