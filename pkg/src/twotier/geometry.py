"""Hexagonal cells, antenna sectors and marked Poisson point processes.

Conventions: hexagons are flat-topped (a vertex on the positive x axis), so
the hexagonal axis through the macro BS and a cell corner is the x axis. A
femtocell "at distance R_0 along the axis" sits at ``(R_0, 0)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .params import SystemParams, hex_area

TWO_PI = 2.0 * math.pi
_ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class HexRegion:
    center: tuple = (0.0, 0.0)
    radius: float = 500.0

    @property
    def area(self) -> float:
        return hex_area(self.radius)

    @property
    def bbox(self):
        cx, cy = self.center
        h = 0.5 * math.sqrt(3.0) * self.radius
        return (cx - self.radius, cx + self.radius, cy - h, cy + h)

    def contains(self, x, y):
        return _kernels.hex_mask(np.asarray(x, float) - self.center[0],
                                 np.asarray(y, float) - self.center[1], self.radius)

    def vertices(self):
        ang = np.arange(6) * math.pi / 3
        return np.column_stack([self.center[0] + self.radius * np.cos(ang),
                                self.center[1] + self.radius * np.sin(ang)])


@dataclass(frozen=True)
class Disk:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


@dataclass(frozen=True)
class Annulus:
    center: tuple = (0.0, 0.0)
    r_in: float = 0.0
    r_out: float = 1.0

    @property
    def area(self) -> float:
        return math.pi * (self.r_out**2 - self.r_in**2)


@dataclass(frozen=True)
class SectorSpec:
    """Antenna sector ``[theta, theta + width)`` seen from ``apex``."""

    theta: float = 0.0
    width: float = TWO_PI
    apex: tuple = (0.0, 0.0)

    @classmethod
    def from_sectors(cls, n_sec: int, theta: float = 0.0, apex=(0.0, 0.0)):
        return cls(theta=theta, width=TWO_PI / n_sec, apex=apex)

    @property
    def n_sec(self) -> int:
        return int(round(TWO_PI / self.width))

    @property
    def is_omni(self) -> bool:
        return self.width >= TWO_PI - _ANGLE_TOL

    def contains(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.is_omni:
            return np.ones(np.broadcast(x, y).shape, dtype=bool)
        rel = np.mod(np.arctan2(y - self.apex[1], x - self.apex[0]) - self.theta, TWO_PI)
        rel = np.where(rel > TWO_PI - 1e-9, 0.0, rel)
        return rel < self.width


@dataclass
class PointSample:
    """Realisation of a marked point process.

    ``marks`` holds per-point arrays. Femtocell samples additionally carry
    their users as a flat array ``user_xy`` with ``user_owner`` indices.
    """

    positions: np.ndarray
    marks: dict = field(default_factory=dict)
    user_xy: np.ndarray | None = None
    user_owner: np.ndarray | None = None

    def __len__(self):
        return self.positions.shape[0]

    @property
    def x(self):
        return self.positions[:, 0]

    @property
    def y(self):
        return self.positions[:, 1]

    def subset(self, keep) -> "PointSample":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            idx = np.flatnonzero(keep)
        else:
            idx = keep
        marks = {k: v[idx] for k, v in self.marks.items()}
        user_xy = user_owner = None
        if self.user_xy is not None:
            remap = np.full(len(self), -1, dtype=np.int64)
            remap[idx] = np.arange(idx.size)
            owner = remap[self.user_owner]
            ok = owner >= 0
            user_xy = self.user_xy[ok]
            user_owner = owner[ok]
        return PointSample(self.positions[idx], marks, user_xy, user_owner)

    def to_csv(self, path) -> None:
        names = sorted(self.marks)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", *names])
            for i in range(len(self)):
                w.writerow([repr(float(self.positions[i, 0])),
                            repr(float(self.positions[i, 1])),
                            *[self.marks[k][i] for k in names]])


def empty_sample() -> PointSample:
    return PointSample(np.empty((0, 2)))


def uniform_in_hex(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` iid uniform points in a centred hexagon (rejection from bbox)."""
    out = np.empty((n, 2))
    h = 0.5 * math.sqrt(3.0) * radius
    filled = 0
    while filled < n:
        need = n - filled
        m = int(need / 0.75) + 16
        x = rng.uniform(-radius, radius, m)
        y = rng.uniform(-h, h, m)
        ok = np.flatnonzero(_kernels.hex_mask(x, y, radius))[:need]
        out[filled:filled + ok.size, 0] = x[ok]
        out[filled:filled + ok.size, 1] = y[ok]
        filled += ok.size
    return out


def uniform_in_disk(n: int, radius: float, rng: np.random.Generator,
                    r_in: float = 0.0) -> np.ndarray:
    r = np.sqrt(rng.uniform(r_in**2, radius**2, n))
    a = rng.uniform(0.0, TWO_PI, n)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def sample_ppp(region, intensity: float, rng: np.random.Generator) -> PointSample:
    """Homogeneous Poisson process of ``intensity`` (m^-2) on ``region``."""
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    n = int(rng.poisson(intensity * region.area)) if intensity > 0 else 0
    if n == 0:
        return empty_sample()
    if isinstance(region, HexRegion):
        pts = uniform_in_hex(n, region.radius, rng)
    elif isinstance(region, Disk):
        pts = uniform_in_disk(n, region.radius, rng)
    elif isinstance(region, Annulus):
        pts = uniform_in_disk(n, region.r_out, rng, r_in=region.r_in)
    else:
        raise TypeError(f"unsupported region {region!r}")
    pts = pts + np.asarray(region.center, float)
    return PointSample(pts)


def thin(sample: PointSample, keep_prob: float, rng: np.random.Generator) -> PointSample:
    """Independent Bernoulli thinning; marks are carried through."""
    if not 0.0 <= keep_prob <= 1.0:
        raise ValueError("keep_prob must lie in [0, 1]")
    if keep_prob == 1.0:
        return sample
    keep = rng.random(len(sample)) < keep_prob
    return sample.subset(keep)


def sector_filter(sample: PointSample, spec: SectorSpec) -> PointSample:
    if spec.is_omni:
        return sample
    return sample.subset(spec.contains(sample.x, sample.y))


def mark_femtocells(sample: PointSample, U_f: float, R_f: float,
                    rng: np.random.Generator) -> PointSample:
    """Attach ``U_i ~ Poisson(U_f)`` users, uniform on the radius-R_f disk."""
    n = len(sample)
    U = rng.poisson(U_f, n) if U_f > 0 else np.zeros(n, dtype=np.int64)
    owner = np.repeat(np.arange(n), U)
    offs = uniform_in_disk(owner.size, R_f, rng)
    marks = dict(sample.marks)
    marks["U"] = U
    return PointSample(sample.positions, marks,
                       sample.positions[owner] + offs, owner)


@dataclass(frozen=True)
class EffectiveIntensities:
    eta_c: float
    eta_f: float
    mean_active_users: float
    activity: float


def effective_intensities(params: SystemParams, N_c: float, N_f: float,
                          n_sec: int | None = None,
                          hopping_mode: str | None = None) -> EffectiveIntensities:
    """Post-avoidance intensities seen by one antenna sector in one slot.

    ``n_sec`` is the observing antenna's sector count (defaults to the
    configured one).
    """
    n_sec = params.N_sec if n_sec is None else n_sec
    mode = params.hopping_mode if hopping_mode is None else hopping_mode
    area = params.area_H
    lam_c, lam_f = N_c / area, N_f / area
    nh = params.N_hop
    eta_c = lam_c / (nh * n_sec)
    if mode == "joint":
        load = params.U_f
        activity = -math.expm1(-load)
        eta_f = lam_f * activity / (nh * n_sec)
    else:
        load = params.U_f / nh
        activity = -math.expm1(-load)
        eta_f = lam_f / n_sec * activity
    mean_users = load / activity if activity > 0 else 1.0
    return EffectiveIntensities(eta_c, eta_f, mean_users, activity)


# -----------------------------------------------------------------------------
# multi-cell layout
# -----------------------------------------------------------------------------

def hex_centers(R_c: float, rings: int = 2) -> np.ndarray:
    """Centres of the reference hexagon plus ``rings`` tiers of neighbours.

    Index 0 is the reference cell; rings=2 gives 19 sites.
    """
    d = math.sqrt(3.0) * R_c
    # axial lattice for flat-topped hexagons
    e1 = np.array([d * math.cos(math.pi / 6), d * math.sin(math.pi / 6)])
    e2 = np.array([0.0, d])
    pts = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            s = -q - r
            if max(abs(q), abs(r), abs(s)) <= rings:
                pts.append(q * e1 + r * e2)
    pts.sort(key=lambda p: (round(float(np.hypot(*p)), 6),
                            round(math.atan2(p[1], p[0]) % TWO_PI, 9)))
    return np.array(pts)


def corner_cells(R_c: float) -> np.ndarray:
    """Centres of the three hexagons meeting at the corner ``(R_c, 0)``."""
    h = 0.5 * math.sqrt(3.0) * R_c
    return np.array([[0.0, 0.0], [1.5 * R_c, h], [1.5 * R_c, -h]])


def ray_hex_exit(px: float, py: float, phi, R: float, center=(0.0, 0.0)):
    """Distance from an interior (or boundary) point along direction ``phi``
    to the boundary of a hexagon. Directions leaving immediately give 0."""
    phi = np.asarray(phi, float)
    dx, dy = np.cos(phi), np.sin(phi)
    px -= center[0]
    py -= center[1]
    best = np.full(phi.shape, np.inf)
    # edges as half-planes n.x <= c
    for k in range(6):
        a = math.pi / 6 + k * math.pi / 3
        nx, ny = math.cos(a), math.sin(a)
        c = 0.5 * math.sqrt(3.0) * R
        slack = c - (nx * px + ny * py)
        rate = nx * dx + ny * dy
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(rate > 1e-15, slack / rate, np.inf)
        best = np.minimum(best, np.maximum(t, 0.0))
    return best
