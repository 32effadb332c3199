"""Body-centered projections: spherical angular depth and BEV elevation.

Both projections scatter points into fixed angular / horizontal bins and
reduce with a per-bin min (single pass; equivalent to materializing the
sparse point-per-bin tensor and minimizing over it, without the memory).
All bins are half-open; results are exactly permutation-invariant because
IEEE min is associative and commutative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import SceneSnapshot


@dataclass(frozen=True)
class PerceptionConfig:
    """Bin counts and ranges for both projections.

    The spherical map clamps depths to `d_max` (empty bins hold `d_max`);
    BEV covers a body-centered square of side `s` split into `m` bins per
    axis, with one padding bin per side absorbing out-of-window points.
    `c0` is the constant top-down viewpoint height above the root, so
    elevation = c0 - depth is relative to the root. Unoccupied BEV bins hold
    `e_default` with occupancy false so planners can tell void from floor.
    """

    k1: int = 2500
    l1: int = 36
    l2: int = 18
    k2: int = 20000
    s: float = 8.2
    m: int = 41
    c0: float = 0.8
    d_max: float = 10.0
    e_default: float = -3.0

    def __post_init__(self):
        if self.l1 < 1 or self.l2 < 1 or self.m < 1:
            raise ValueError("bin counts must be >= 1")
        if self.s <= 0:
            raise ValueError("BEV side length must be positive")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("K values must be nonnegative")

    @property
    def cell(self) -> float:
        return self.s / self.m


@dataclass(frozen=True)
class SphericalDepthMap:
    """(L1, L2) angular depth grid; depth in (0, d_max], d_max when empty."""

    depth: np.ndarray
    occupancy: np.ndarray
    d_max: float


@dataclass(frozen=True)
class BevMaps:
    """(M, M) top-down depth/elevation grids around `root`.

    depth = root_z + c0 - (max point z in bin); elevation = c0 - depth, i.e.
    height relative to the root. Index i runs along +x, j along +y; the cell
    (i, j) covers [origin + (i, j) * cell, origin + (i+1, j+1) * cell).
    """

    depth: np.ndarray
    elevation: np.ndarray
    occupancy: np.ndarray
    root: np.ndarray
    cell: float
    origin: np.ndarray  # (2,) lower corner in world xy

    def cell_of(self, xy) -> tuple[int, int]:
        i = int(math.floor((xy[0] - self.origin[0]) / self.cell))
        j = int(math.floor((xy[1] - self.origin[1]) / self.cell))
        m = self.elevation.shape[0]
        return min(max(i, 0), m - 1), min(max(j, 0), m - 1)

    def center_of(self, cell: tuple[int, int]) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=np.float64) + 0.5) * self.cell


def spherical_project(points: np.ndarray, root, cfg: PerceptionConfig) -> SphericalDepthMap:
    """Scatter-min angular depths of `points` as seen from `root`.

    longitude bin: floor(L1 * (atan2(dy, dx) + pi) / (2 pi)) mod L1
    latitude bin:  min(floor(L2 * acos(dz / d) / pi), L2 - 1)
    Points closer than 1e-9 to the root are skipped (the body itself).
    """
    root = np.asarray(root, dtype=np.float64).reshape(3)
    depth = np.full((cfg.l1, cfg.l2), cfg.d_max)
    occ = np.zeros((cfg.l1, cfg.l2), dtype=bool)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        return SphericalDepthMap(depth, occ, cfg.d_max)
    rel = pts - root
    d = np.linalg.norm(rel, axis=1)
    keep = d >= 1e-9
    rel, d = rel[keep], d[keep]
    if d.size == 0:
        return SphericalDepthMap(depth, occ, cfg.d_max)
    phi = np.arctan2(rel[:, 1], rel[:, 0])
    lon = np.floor(cfg.l1 * (phi + math.pi) / (2.0 * math.pi)).astype(np.int64) % cfg.l1
    theta = np.arccos(np.clip(rel[:, 2] / d, -1.0, 1.0))
    lat = np.minimum(np.floor(cfg.l2 * theta / math.pi).astype(np.int64), cfg.l2 - 1)
    np.minimum.at(depth, (lon, lat), np.minimum(d, cfg.d_max))
    occ[lon, lat] = True
    return SphericalDepthMap(depth, occ, cfg.d_max)


def bev_project(points: np.ndarray, root, cfg: PerceptionConfig) -> BevMaps:
    """Top-down min-depth (max-z) rendering into the padded BEV grid.

    Out-of-window points land in the one-bin border padding and are
    discarded with it, so they never contaminate the M x M output.
    """
    root = np.asarray(root, dtype=np.float64).reshape(3)
    m, cell = cfg.m, cfg.cell
    half = cfg.s / 2.0
    padded = np.full((m + 2, m + 2), math.inf)  # padded depth, min-reduced
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0]:
        i = np.floor((pts[:, 0] - root[0] + half) / cell).astype(np.int64)
        j = np.floor((pts[:, 1] - root[1] + half) / cell).astype(np.int64)
        i = np.clip(i + 1, 0, m + 1)
        j = np.clip(j + 1, 0, m + 1)
        d = root[2] + cfg.c0 - pts[:, 2]
        np.minimum.at(padded, (i, j), d)
    depth = padded[1:-1, 1:-1]
    occ = np.isfinite(depth)
    elevation = np.where(occ, cfg.c0 - depth, cfg.e_default)
    depth = np.where(occ, depth, cfg.c0 - cfg.e_default)
    origin = root[:2] - half
    return BevMaps(depth=depth, elevation=elevation, occupancy=occ,
                   root=root.copy(), cell=cell, origin=origin)


def perceive(snap: SceneSnapshot, root, cfg: PerceptionConfig = PerceptionConfig()
             ) -> tuple[SphericalDepthMap, BevMaps]:
    """Both projections from one body position (k-nearest subsets of snap)."""
    root = np.asarray(root, dtype=np.float64).reshape(3)
    near1 = snap.points[snap.k_nearest_indices(root, cfg.k1)]
    near2 = snap.points[snap.k_nearest_indices(root, cfg.k2)]
    return spherical_project(near1, root, cfg), bev_project(near2, root, cfg)
