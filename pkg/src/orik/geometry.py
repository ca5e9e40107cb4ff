"""Filter-offset tables for oriented 1D kernels.

A kernel tap ``k`` of an oriented 1D kernel reads the input at an integer
displacement ``(dh, dw)`` from the output anchor ``(str*p, str*q)``.  This
module turns angles, kernel sizes and paddings into those displacements
under the rotation and shear parameterizations, and assigns angles to
channels.

Angles are degrees at every interface.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

PARAMETERIZATIONS = ("rotation", "shear-x", "shear-y")
DISCRETIZATIONS = ("round-down", "bilinear")
STAGE_CAPS = (31, 31, 27, 15)


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConvConfig:
    K: int
    pad: float | None = None
    stride: int = 1
    parameterization: str = "rotation"
    discretization: str = "round-down"
    even_pad: tuple[int, int] | None = None

    def __post_init__(self):
        if self.K < 1:
            raise InvalidConfigError(f"kernel size must be >= 1, got {self.K}")
        if self.stride < 1:
            raise InvalidConfigError(f"stride must be >= 1, got {self.stride}")
        if self.parameterization not in PARAMETERIZATIONS:
            raise InvalidConfigError(f"unknown parameterization {self.parameterization!r}")
        if self.discretization not in DISCRETIZATIONS:
            raise InvalidConfigError(f"unknown discretization {self.discretization!r}")
        if self.pad is None:
            object.__setattr__(self, "pad", self.K // 2)


@dataclass(frozen=True, eq=False)
class OffsetTable:
    """``entries[k] = (dh, dw)``; ``frac[k] = (frac_h, frac_w)`` for bilinear tables."""

    entries: np.ndarray
    frac: np.ndarray | None = field(default=None)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, OffsetTable):
            return NotImplemented
        if not np.array_equal(self.entries, other.entries):
            return False
        if self.frac is None or other.frac is None:
            return self.frac is None and other.frac is None
        return np.array_equal(self.frac, other.frac)

    def as_tuples(self):
        return [(int(h), int(w)) for h, w in self.entries]

    def halo(self):
        """Largest |dh| and |dw| any tap can reach (bilinear taps reach one further)."""
        ext = 1 if self.frac is not None else 0
        if len(self.entries) == 0:
            return 0, 0
        hh = int(np.max(np.abs(self.entries[:, 0]))) + ext
        hw = int(np.max(np.abs(self.entries[:, 1]))) + ext
        return hh, hw


def sincos(theta_deg: float) -> tuple[float, float]:
    """sin and cos of an angle in degrees, exact at multiples of 90 degrees."""
    r = math.fmod(theta_deg, 360.0)
    if r == int(r) and int(r) % 90 == 0:
        q = (int(r) // 90) % 4
        return ((0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0))[q]
    t = math.radians(theta_deg)
    return math.sin(t), math.cos(t)


def _tan(theta_deg: float) -> float:
    r = math.fmod(theta_deg, 180.0)
    if r == int(r) and int(r) % 45 == 0:
        q = (int(r) // 45) % 4
        if q == 2:
            raise InvalidConfigError("tan undefined")
        return (0.0, 1.0, math.nan, -1.0)[q]
    s, c = sincos(theta_deg)
    if c == 0.0:
        raise InvalidConfigError("tan undefined")
    return s / c


def _cot(theta_deg: float) -> float:
    r = math.fmod(theta_deg, 180.0)
    if r == int(r) and int(r) % 45 == 0:
        q = (int(r) // 45) % 4
        if q == 0:
            raise InvalidConfigError("cot undefined")
        return (math.nan, 1.0, 0.0, -1.0)[q]
    s, c = sincos(theta_deg)
    if s == 0.0:
        raise InvalidConfigError("cot undefined")
    return c / s


def _floor(v: float) -> int:
    return int(math.floor(v))


def offsets_rotation(K: int, pad: float, theta_deg: float, discretization: str = "round-down") -> OffsetTable:
    if K < 1:
        raise InvalidConfigError(f"kernel size must be >= 1, got {K}")
    if discretization not in DISCRETIZATIONS:
        raise InvalidConfigError(f"unknown discretization {discretization!r}")
    s, c = sincos(theta_deg)
    entries = np.empty((K, 2), dtype=np.int64)
    frac = np.empty((K, 2), dtype=np.float64) if discretization == "bilinear" else None
    for k in range(K):
        a = -(k - pad) * s
        b = (k - pad) * c
        entries[k] = (_floor(a), _floor(b))
        if frac is not None:
            frac[k] = (a - entries[k, 0], b - entries[k, 1])
    return OffsetTable(entries, frac)


def offsets_shear(K: int, pad: float, theta_deg: float, axis: str) -> OffsetTable:
    """Shear parameterization: one coordinate of every tap is exactly ``k - pad``.

    ``axis="x"`` intersects the filter axis with integer columns, ``axis="y"``
    with integer rows.
    """
    if K < 1:
        raise InvalidConfigError(f"kernel size must be >= 1, got {K}")
    entries = np.empty((K, 2), dtype=np.int64)
    if axis == "x":
        try:
            t = _tan(theta_deg)
        except InvalidConfigError:
            raise InvalidConfigError(f"shear axis x is degenerate at {theta_deg} deg (cos = 0)") from None
        for k in range(K):
            entries[k] = (_floor(-(k - pad) * t), _floor(k - pad))
    elif axis == "y":
        try:
            t = _cot(theta_deg)
        except InvalidConfigError:
            raise InvalidConfigError(f"shear axis y is degenerate at {theta_deg} deg (sin = 0)") from None
        for k in range(K):
            entries[k] = (_floor(k - pad), _floor(-(k - pad) * t))
    else:
        raise InvalidConfigError(f"unknown shear axis {axis!r}")
    return OffsetTable(entries)


def offsets_even(K: int, pad: float, pad_h: int, pad_w: int, theta_deg: float) -> OffsetTable:
    """Even-sized kernel variant: rotation offsets shifted by an exterior padding."""
    base = offsets_rotation(K, pad, theta_deg)
    return OffsetTable(base.entries - np.array([pad_h, pad_w], dtype=np.int64))


def offsets_for(cfg: ConvConfig, theta_deg: float) -> OffsetTable:
    if cfg.even_pad is not None:
        return offsets_even(cfg.K, cfg.pad, cfg.even_pad[0], cfg.even_pad[1], theta_deg)
    if cfg.parameterization == "rotation":
        return offsets_rotation(cfg.K, cfg.pad, theta_deg, cfg.discretization)
    if cfg.discretization != "round-down":
        raise InvalidConfigError("bilinear discretization is only defined for the rotation parameterization")
    return offsets_shear(cfg.K, cfg.pad, theta_deg, cfg.parameterization[-1])


def angle_tables(cfg: ConvConfig, angles) -> tuple[list[OffsetTable], np.ndarray]:
    """Deduplicate per-channel angles into shared tables.

    Returns the tables (one per distinct angle, in first-appearance order)
    and the table index of every channel.
    """
    angles = np.asarray(angles, dtype=np.float64)
    tables: list[OffsetTable] = []
    seen: dict[float, int] = {}
    index = np.empty(len(angles), dtype=np.int64)
    for c, a in enumerate(angles):
        a = float(a)
        if a not in seen:
            seen[a] = len(tables)
            tables.append(offsets_for(cfg, a))
        index[c] = seen[a]
    return tables, index


def direction_angles(D: int, C: int) -> np.ndarray:
    """Split ``C`` channels into ``D`` contiguous groups; group i gets ``i*180/D`` degrees."""
    if D < 1 or C < 1:
        raise InvalidConfigError(f"D and C must be >= 1, got D={D}, C={C}")
    if D == C:
        return np.arange(C, dtype=np.float64) * 180.0 / C
    if C % D:
        raise InvalidConfigError(f"D={D} does not divide C={C}")
    group = np.arange(C) * D // C
    return group.astype(np.float64) * 180.0 / D


def layerwise_angles(base, layer_index: int, shift_deg: float = 90.0) -> np.ndarray:
    """Two-phase layer-wise rotation: odd layers are shifted by ``shift_deg`` (mod 180)."""
    base = np.asarray(base, dtype=np.float64)
    return np.mod(base + shift_deg * (layer_index % 2), 180.0)


def stage_kernel_caps(requested) -> list[int]:
    requested = list(requested)
    if len(requested) != 4:
        raise InvalidConfigError(f"expected 4 stage kernel sizes, got {len(requested)}")
    return [min(int(k), cap) for k, cap in zip(requested, STAGE_CAPS)]


def _floor_margin(K, pad, theta_deg):
    s, c = sincos(theta_deg)
    margin = math.inf
    for k in range(K):
        for v in (-(k - pad) * s, (k - pad) * c):
            f = v - math.floor(v)
            margin = min(margin, f, 1.0 - f)
    return margin


def search_even_params(theta_deg, target, K=2, pads=None, exterior=range(-2, 3)):
    """Exhaustively search ``(pad, pad_h, pad_w)`` whose even-kernel table covers ``target``.

    Candidates are returned best-first: the largest distance between any
    real-valued coordinate and a floor boundary wins, so the chosen table
    does not depend on rounding noise.
    """
    if pads is None:
        pads = [i / 8 for i in range(-24, 25)]
    target = sorted(tuple(t) for t in target)
    found = []
    for pad, ph, pw in itertools.product(pads, exterior, exterior):
        table = offsets_even(K, pad, ph, pw, theta_deg)
        if sorted(table.as_tuples()) == target:
            found.append((_floor_margin(K, pad, theta_deg), -abs(ph) - abs(pw), -abs(pad), (pad, ph, pw)))
    found.sort(key=lambda f: f[:3], reverse=True)
    return [f[3] for f in found]


# (theta, pad, pad_h, pad_w), best-first results of search_even_params for the
# 2x2 diagonal and anti-diagonal. Every real coordinate sits >= 0.35 away from
# a floor boundary, unlike pad = 1 - sqrt(2) which lands exactly on one.
DIAGONAL_PARAMS = (-45.0, 0.5, -1, -1)
ANTI_DIAGONAL_PARAMS = (45.0, 0.5, -1, -1)
