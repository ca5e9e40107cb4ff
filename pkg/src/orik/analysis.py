"""Desk-scale analyses: MAD accounting, effective receptive fields, and two
exactness checks (2x2 downsampling as two oriented kernels, separable Gaussians).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import NetworkConfig, init_params, network_fwd
from .geometry import ANTI_DIAGONAL_PARAMS, DIAGONAL_PARAMS, ConvConfig, InvalidConfigError, offsets_for
from .reference import dwconv1d_even_fwd, dwconv1d_fwd, dwconv2d_standard_fwd
from .tape import Tape
from .tensor import tensor_random

# per-element cost as a function of (K, C')
_MAD_FORMS = {
    "dw2d": lambda K, Cp: K * K,
    "dw1d": lambda K, Cp: K,
    "bilinear1d": lambda K, Cp: 4 * K,
    "pw": lambda K, Cp: Cp,
    "dsc1d": lambda K, Cp: K + Cp,
    "dsc2d": lambda K, Cp: K * K + Cp,
}
MAD_OPS = tuple(_MAD_FORMS)


@dataclass(frozen=True)
class MadTally:
    op_id: str
    per_element_mads: int
    total_mads: int


def mad_count(op_id, K=None, C_prime=None, elements=1) -> MadTally:
    """Closed-form MADs per output element; ``elements`` is N*P*Q*C."""
    if op_id not in _MAD_FORMS:
        raise InvalidConfigError(f"unknown op {op_id!r}; expected one of {MAD_OPS}")
    if op_id != "pw" and (K is None or K < 1):
        raise InvalidConfigError(f"{op_id} needs a kernel size")
    if op_id in ("pw", "dsc1d", "dsc2d") and (C_prime is None or C_prime < 1):
        raise InvalidConfigError(f"{op_id} needs C_prime")
    per = _MAD_FORMS[op_id](K, C_prime)
    return MadTally(op_id, per, per * elements)


def mad_ratio(a: MadTally, b: MadTally) -> float:
    return a.per_element_mads / b.per_element_mads


# -- effective receptive field ------------------------------------------------


def erf_from_forward(forward, input_shape, n_samples=1, seed=0, dtype=np.float64):
    """ERF of ``forward(x, tape) -> y`` at the central output pixel.

    The scalar is the sum over channels of ``y[:, P//2, Q//2, :]``; the map is
    ``|d scalar / dx|`` averaged over samples and input channels, scaled to max 1.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    N, H, W, C = input_shape
    acc = np.zeros((H, W), dtype=np.float64)
    for i in range(n_samples):
        x = tensor_random(input_shape, dtype, seed + i)
        tape = Tape()
        tape.watch(x)
        y = forward(x, tape)
        tape.result = y
        dy = np.zeros_like(y)
        dy[:, y.shape[1] // 2, y.shape[2] // 2, :] = 1
        g = tape.backward(dy)
        acc += np.abs(g).mean(axis=(0, 3))
    acc /= n_samples
    peak = acc.max()
    return acc / peak if peak > 0 else acc


def erf_map(cfg: NetworkConfig, params_seed=0, n_samples=4, input_size=64, seed=0, params=None):
    if params is None:
        params = init_params(cfg, params_seed)
    shape = (1, input_size, input_size, cfg.in_channels)
    return erf_from_forward(lambda x, tape: network_fwd(x, cfg, params, tape), shape, n_samples, seed)


def oriented_stack(layers):
    """Forward callable for a chain of oriented convolutions ``[(w, angles, cfg), ...]``."""
    from .blocks import oriented_dw

    def forward(x, tape):
        for w, angles, cfg in layers:
            x = oriented_dw(x, w, np.zeros(w.shape[1], w.dtype), angles, cfg, tape)
        return x

    return forward


def write_pgm(m, path):
    """Binary PGM (P5), 8-bit, scaled so the map maximum becomes 255."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"ERF map must be 2D, got shape {m.shape}")
    peak = m.max()
    scaled = np.zeros(m.shape) if peak <= 0 else m / peak * 255.0
    data = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    data = np.frombuffer(parts[4][: width * height], dtype=np.uint8)
    return data.reshape(height, width), maxval


# -- 2x2 stride-2 downsampling as two oriented kernels ------------------------


def _even_cfg(params):
    _, pad, pad_h, pad_w = params
    return ConvConfig(2, pad=pad, stride=2, even_pad=(pad_h, pad_w))


def downsampling_branches(w2x2):
    """Per-channel weights for the diagonal and anti-diagonal even kernels.

    Each tap takes the 2x2 weight sitting at its own offset, so the result
    does not depend on the order the offset tables list their entries.
    """
    out = []
    for params in (DIAGONAL_PARAMS, ANTI_DIAGONAL_PARAMS):
        cfg = _even_cfg(params)
        table = offsets_for(cfg, params[0])
        w = np.stack([w2x2[dh, dw] for dh, dw in table.as_tuples()])
        out.append((w, params[0], cfg))
    return out


def downsample_as_oriented(x, w2x2):
    C = x.shape[-1]
    y = None
    for w, theta, cfg in downsampling_branches(w2x2):
        part = dwconv1d_even_fwd(x, w, np.full(C, theta), cfg)
        y = part if y is None else y + part
    return y


def verify_downsampling_decomposition(w2x2, x=None, seed_count=10, shape=(2, 8, 8, 4), dtype=np.float64):
    """Max abs difference between the two-kernel sum and a 2x2 stride-2 convolution.

    With ``x=None`` random inputs of ``shape`` are drawn for seeds ``0..seed_count-1``.
    """
    w2x2 = np.asarray(w2x2)
    if w2x2.shape[:2] != (2, 2) or w2x2.ndim != 3:
        raise ValueError(f"w2x2 must be (2, 2, C), got {w2x2.shape}")
    inputs = [np.asarray(x)] if x is not None else [tensor_random(shape, dtype, s) for s in range(seed_count)]
    err = 0.0
    for xi in inputs:
        if xi.shape[-1] != w2x2.shape[2]:
            raise ValueError(f"channel mismatch: x has {xi.shape[-1]}, kernel has {w2x2.shape[2]}")
        if xi.shape[1] % 2 or xi.shape[2] % 2:
            raise ValueError(f"stride-2 decomposition needs even H and W, got {xi.shape[1:3]}")
        w = w2x2.astype(xi.dtype)
        ref = dwconv2d_standard_fwd(xi, w, stride=2, pad=0)
        err = max(err, float(np.max(np.abs(downsample_as_oriented(xi, w) - ref))))
    return err


# -- separable Gaussians -------------------------------------------------------


@dataclass(frozen=True)
class GaussianSpec:
    sigma1: float
    sigma2: float
    K: int

    def __post_init__(self):
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise InvalidConfigError(f"sigmas must be positive, got {self.sigma1}, {self.sigma2}")
        if self.K < 1 or self.K % 2 == 0:
            raise InvalidConfigError(f"K must be odd, got {self.K}")


def gaussian_taps(sigma, K):
    t = np.arange(K) - K // 2
    with np.errstate(under="ignore"):
        g = np.exp(-0.5 * (t / sigma) ** 2)
    return g / g.sum()


def separable_kernel(g_vert, g_horiz):
    """2D kernel equal to a horizontal (0 deg) then vertical (90 deg) oriented pass.

    The 90 deg table walks rows upward as k grows, so the vertical taps enter reversed.
    """
    return np.outer(np.asarray(g_vert)[::-1], np.asarray(g_horiz))


def compose_separable(x, g_horiz, g_vert):
    C = x.shape[-1]
    K = len(g_horiz)
    h = dwconv1d_fwd(x, np.repeat(np.asarray(g_horiz, x.dtype)[:, None], C, 1), np.zeros(C), ConvConfig(K))
    return dwconv1d_fwd(h, np.repeat(np.asarray(g_vert, x.dtype)[:, None], C, 1), np.full(C, 90.0), ConvConfig(K))


def separable_error(x, g_horiz, g_vert):
    C = x.shape[-1]
    K = len(g_horiz)
    k2d = separable_kernel(g_vert, g_horiz).astype(x.dtype)
    ref = dwconv2d_standard_fwd(x, np.repeat(k2d[:, :, None], C, 2), stride=1, pad=K // 2)
    return float(np.max(np.abs(compose_separable(x, g_horiz, g_vert) - ref)))


def gaussian_separability_check(spec: GaussianSpec, x) -> float:
    x = np.asarray(x)
    return separable_error(x, gaussian_taps(spec.sigma1, spec.K), gaussian_taps(spec.sigma2, spec.K))


def erf_support_oracle(tables_per_layer, H, W):
    """Brute-force support of a linear chain of oriented layers at the central output.

    Walks the offset sets backwards from the centre (stride 1, zero padding)
    and keeps only positions inside the image.
    """
    support = {(H // 2, W // 2)}
    for table in reversed(tables_per_layer):
        support = {
            (h + dh, w + dw)
            for h, w in support
            for dh, dw in table.as_tuples()
            if 0 <= h + dh < H and 0 <= w + dw < W
        }
    mask = np.zeros((H, W), dtype=bool)
    for h, w in support:
        mask[h, w] = True
    return mask


__all__ = [
    "MAD_OPS", "MadTally", "mad_count", "mad_ratio", "erf_from_forward", "erf_map", "oriented_stack",
    "write_pgm", "read_pgm", "downsampling_branches", "downsample_as_oriented",
    "verify_downsampling_decomposition", "GaussianSpec", "gaussian_taps", "separable_kernel",
    "compose_separable", "separable_error", "gaussian_separability_check", "erf_support_oracle",
]
