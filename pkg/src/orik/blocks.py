"""Toy-scale ConvNeXt-style stems, blocks and networks built from oriented 1D kernels.

Everything runs through the reference convolutions and can record onto a
:class:`~orik.tape.Tape` so input gradients are available for gradient
checks and ERF maps. There is no training machinery here.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr

from .geometry import ConvConfig, InvalidConfigError, direction_angles, layerwise_angles, stage_kernel_caps
from .reference import dwconv1d_bwd, dwconv1d_fwd, dwconv2d_standard_bwd, dwconv2d_standard_fwd
from .tape import Tape
from .tensor import tensor_random

BLOCK_KINDS = ("2d", "1d", "1d++", "2d++")
STEM_KINDS = ("2d", "depthwise-1d")
EXPANSION = 4
DW2D_SIZE = 7
MAIN_K_1DPP = 15
STEM_K = 5


@dataclass(frozen=True)
class NetworkConfig:
    c0: int = 64
    channels: tuple = (96, 192, 384, 768)
    blocks: tuple = (3, 3, 9, 3)
    k: tuple = (31, 31, 31, 31)
    d: int = 8
    layerwise_shift_deg: float = 90.0
    block_kind: str = "1d"
    stem_kind: str = "depthwise-1d"
    in_channels: int = 3

    def __post_init__(self):
        for name in ("channels", "blocks", "k"):
            value = tuple(int(v) for v in getattr(self, name))
            if len(value) != 4:
                raise InvalidConfigError(f"{name} needs 4 stage values, got {len(value)}")
            object.__setattr__(self, name, value)
        if self.block_kind not in BLOCK_KINDS:
            raise InvalidConfigError(f"unknown block kind {self.block_kind!r}")
        if self.stem_kind not in STEM_KINDS:
            raise InvalidConfigError(f"unknown stem kind {self.stem_kind!r}")
        for c in self.channels:
            if c % self.d:
                raise InvalidConfigError(f"D={self.d} does not divide stage width {c}")
        if any(k % 2 == 0 for k in self.stage_k):
            raise InvalidConfigError(f"stage kernel sizes must be odd, got {self.stage_k}")

    @property
    def stage_k(self):
        return stage_kernel_caps(self.k)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = asdict(self)
        for key in ("channels", "blocks", "k"):
            out[key] = list(out[key])
        return out


def tiny_config(**overrides) -> NetworkConfig:
    return NetworkConfig(**overrides)


# -- primitives with tape support ------------------------------------------


def _rec(tape, name, inputs, out, vjp):
    if tape is not None:
        tape.record(name, inputs, out, vjp)
    return out


def _inv_std(x, eps):
    """``1 / sqrt(var + eps)``, with 0 where the denominator vanishes (constant input, eps=0)."""
    d = np.sqrt(x.var(axis=-1, keepdims=True) + eps)
    return np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)


def layernorm_fwd(x, gamma, beta, eps=1e-6):
    return layernorm(x, gamma, beta, eps)


def gelu_fwd(x):
    return x * ndtr(x)


def layernorm(x, gamma, beta, eps=1e-6, tape=None):
    mu = x.mean(axis=-1, keepdims=True)
    inv = _inv_std(x, eps)
    xhat = (x - mu) * inv
    out = xhat * gamma + beta

    def vjp(g):
        gh = g * gamma
        return (inv * (gh - gh.mean(axis=-1, keepdims=True)
                       - xhat * (gh * xhat).mean(axis=-1, keepdims=True)),)

    return _rec(tape, "layernorm", (x,), out, vjp)


def gelu(x, tape=None):
    out = gelu_fwd(x)
    return _rec(tape, "gelu", (x,), out,
                lambda g: (g * (ndtr(x) + x * np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)),))


def add(a, b, tape=None):
    return _rec(tape, "add", (a, b), a + b, lambda g: (g, g))


def pointwise(x, w, b, tape=None):
    out = x @ w + b
    return _rec(tape, "pointwise", (x,), out, lambda g: (g @ w.T,))


def oriented_dw(x, w, b, angles, cfg: ConvConfig, tape=None):
    out = dwconv1d_fwd(x, w, angles, cfg) + b
    return _rec(tape, "oriented_dw", (x,), out, lambda g: (dwconv1d_bwd(x, w, angles, cfg, g)[0],))


def depthwise2d(x, w, b, pad, tape=None):
    out = dwconv2d_standard_fwd(x, w, 1, pad) + b
    return _rec(tape, "depthwise2d", (x,), out, lambda g: (dwconv2d_standard_bwd(x, w, 1, pad, g)[0],))


def patchify(x, w, b, tape=None):
    """Dense ``s x s`` convolution with stride ``s``; ``w`` is ``(s, s, C_in, C_out)``."""
    s = w.shape[0]
    N, H, W, C = x.shape
    if H % s or W % s:
        raise InvalidConfigError(f"spatial size {H}x{W} is not divisible by {s}")
    patches = x.reshape(N, H // s, s, W // s, s, C).transpose(0, 1, 3, 2, 4, 5)
    flat = w.reshape(s * s * C, -1)
    out = patches.reshape(N, H // s, W // s, s * s * C) @ flat + b

    def vjp(g):
        gp = (g @ flat.T).reshape(N, H // s, W // s, s, s, C).transpose(0, 1, 3, 2, 4, 5)
        return (gp.reshape(N, H, W, C),)

    return _rec(tape, "patchify", (x,), out, vjp)


# -- parameters --------------------------------------------------------------


class _ParamRng:
    def __init__(self, seed, dtype):
        self.seed = seed
        self.dtype = dtype
        self.count = 0

    def uniform(self, shape, fan_in):
        self.count += 1
        t = tensor_random(shape, self.dtype, self.seed * 1_000_003 + self.count)
        return t * self.dtype.type(1.0 / np.sqrt(fan_in))


def init_block_params(C, kind, K, rng: _ParamRng):
    dt = rng.dtype
    hidden = EXPANSION * C
    p = {
        "dw_b": np.zeros(C, dt),
        "ln_g": np.ones(C, dt),
        "ln_b": np.zeros(C, dt),
        "pw1": rng.uniform((C, hidden), C),
        "pw1_b": np.zeros(hidden, dt),
        "pw2": rng.uniform((hidden, C), hidden),
        "pw2_b": np.zeros(C, dt),
    }
    if kind in ("2d", "2d++"):
        p["dw"] = rng.uniform((DW2D_SIZE, DW2D_SIZE, C), DW2D_SIZE * DW2D_SIZE)
    elif kind == "1d":
        p["dw"] = rng.uniform((K, C), K)
    else:
        p["dw"] = rng.uniform((min(MAIN_K_1DPP, K), C), min(MAIN_K_1DPP, K))
    if kind in ("1d++", "2d++"):
        p["branch"] = rng.uniform((K, hidden), K)
        p["branch_b"] = np.zeros(hidden, dt)
    return p


def init_stem_params(cfg: NetworkConfig, rng: _ParamRng):
    dt = rng.dtype
    C1, cin = cfg.channels[0], cfg.in_channels
    p = {"ln_g": np.ones(C1, dt), "ln_b": np.zeros(C1, dt)}
    if cfg.stem_kind == "2d":
        p["conv"] = rng.uniform((4, 4, cin, C1), 16 * cin)
        p["conv_b"] = np.zeros(C1, dt)
        return p
    c0 = cfg.c0
    p["pw_in"] = rng.uniform((cin, c0), cin)
    p["pw_in_b"] = np.zeros(c0, dt)
    for name in ("dw1", "dw2", "dw3", "dw4"):
        p[name] = rng.uniform((STEM_K, c0), STEM_K)
        p[name + "_b"] = np.zeros(c0, dt)
    p["pw_mix"] = rng.uniform((c0, c0), c0)
    p["pw_mix_b"] = np.zeros(c0, dt)
    p["pw_out"] = rng.uniform((c0, C1), c0)
    p["pw_out_b"] = np.zeros(C1, dt)
    return p


def init_params(cfg: NetworkConfig, seed=0, dtype=np.float64):
    rng = _ParamRng(seed, np.dtype(dtype))
    params = {"stem": init_stem_params(cfg, rng), "down": [], "stages": []}
    for i, (C, B, K) in enumerate(zip(cfg.channels, cfg.blocks, cfg.stage_k)):
        if i > 0:
            prev = cfg.channels[i - 1]
            params["down"].append({
                "ln_g": np.ones(prev, rng.dtype),
                "ln_b": np.zeros(prev, rng.dtype),
                "conv": rng.uniform((2, 2, prev, C), 4 * prev),
                "conv_b": np.zeros(C, rng.dtype),
            })
        params["stages"].append([init_block_params(C, cfg.block_kind, K, rng) for _ in range(B)])
    return params


def zero_like_params(params):
    """Same structure with every array zeroed (gammas included)."""
    if isinstance(params, dict):
        return {k: zero_like_params(v) for k, v in params.items()}
    if isinstance(params, list):
        return [zero_like_params(v) for v in params]
    return np.zeros_like(params)


# -- assemblies --------------------------------------------------------------


def block_fwd(x, params, kind, stage_angles, layer_index=0, shift_deg=90.0, tape=None):
    """One residual block; output shape equals input shape.

    ``stage_angles`` are the per-channel base angles of the stage. The
    residual oriented branch of the ``++`` kinds runs on the expanded
    features with each base angle repeated ``EXPANSION`` times, which is
    the same grouping ``direction_angles(D, 4C)`` produces.
    """
    if kind not in BLOCK_KINDS:
        raise InvalidConfigError(f"unknown block kind {kind!r}")
    C = x.shape[-1]
    if len(stage_angles) != C or params["pw1"].shape[0] != C:
        raise ValueError(f"block expects {params['pw1'].shape[0]} channels, got {C}")
    angles = layerwise_angles(stage_angles, layer_index, shift_deg)
    if kind in ("2d", "2d++"):
        h = depthwise2d(x, params["dw"], params["dw_b"], params["dw"].shape[0] // 2, tape)
    else:
        K = params["dw"].shape[0]
        h = oriented_dw(x, params["dw"], params["dw_b"], angles, ConvConfig(K), tape)
    h = layernorm(h, params["ln_g"], params["ln_b"], tape=tape)
    h = pointwise(h, params["pw1"], params["pw1_b"], tape)
    if kind in ("1d++", "2d++"):
        Kb = params["branch"].shape[0]
        wide = np.repeat(angles, EXPANSION)
        h = add(h, oriented_dw(h, params["branch"], params["branch_b"], wide, ConvConfig(Kb), tape), tape)
    h = gelu(h, tape)
    h = pointwise(h, params["pw2"], params["pw2_b"], tape)
    return add(x, h, tape)


def stem_fwd(x, params, kind, tape=None):
    """Downsample 4x. The 2D stem is a 4x4 stride-4 convolution followed by LayerNorm."""
    N, H, W, _ = x.shape
    if H % 4 or W % 4:
        raise InvalidConfigError(f"stem needs H and W divisible by 4, got {H}x{W}")
    if kind == "2d":
        h = patchify(x, params["conv"], params["conv_b"], tape)
        return layernorm(h, params["ln_g"], params["ln_b"], tape=tape)
    if kind != "depthwise-1d":
        raise InvalidConfigError(f"unknown stem kind {kind!r}")
    c0 = params["pw_in"].shape[1]
    horiz, vert = np.zeros(c0), np.full(c0, 90.0)
    down, mix = ConvConfig(STEM_K, stride=2), ConvConfig(STEM_K)
    h = pointwise(x, params["pw_in"], params["pw_in_b"], tape)
    h = oriented_dw(h, params["dw1"], params["dw1_b"], horiz, down, tape)
    h = oriented_dw(h, params["dw2"], params["dw2_b"], vert, mix, tape)
    h = pointwise(h, params["pw_mix"], params["pw_mix_b"], tape)
    h = gelu(h, tape)
    h = oriented_dw(h, params["dw3"], params["dw3_b"], vert, down, tape)
    h = oriented_dw(h, params["dw4"], params["dw4_b"], horiz, mix, tape)
    h = pointwise(h, params["pw_out"], params["pw_out_b"], tape)
    return layernorm(h, params["ln_g"], params["ln_b"], tape=tape)


def downsample_fwd(x, params, tape=None):
    h = layernorm(x, params["ln_g"], params["ln_b"], tape=tape)
    return patchify(h, params["conv"], params["conv_b"], tape)


def network_fwd(x, cfg: NetworkConfig, params, tape: Tape | None = None, return_stages=False):
    if tape is not None:
        tape.watch(x)
    h = stem_fwd(x, params["stem"], cfg.stem_kind, tape)
    stages = []
    for i, C in enumerate(cfg.channels):
        if i > 0:
            h = downsample_fwd(h, params["down"][i - 1], tape)
        base = direction_angles(cfg.d, C)
        for b, bp in enumerate(params["stages"][i]):
            h = block_fwd(h, bp, cfg.block_kind, base, b, cfg.layerwise_shift_deg, tape)
        stages.append(h)
    if tape is not None:
        tape.result = h
    return (h, stages) if return_stages else h


def network_grad_input(tape: Tape, dy):
    """Gradient of ``<dy, output>`` with respect to the watched input."""
    return tape.backward(dy)
