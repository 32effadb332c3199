"""Point-cloud scenes: static geometry, keyframed movers, per-frame snapshots.

World convention throughout the package: meters, z-up, right-handed. A
snapshot merges the static cloud with every actor cloud posed at the
requested frame and carries a uniform-grid index for nearest-neighbour
queries. Snapshots are immutable and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_CELL = 0.5  # spatial-index cell size, meters
DEFAULT_DENSITY = 450.0  # synthetic surface sampling, points per m^2


class PlyParseError(ValueError):
    """Malformed PLY input; `line` is the 1-based offending line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


def as_points(array_like) -> np.ndarray:
    """Coerce to an (N, 3) float64 array and require finite coordinates."""
    pts = np.asarray(array_like, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("point cloud contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """Immutable set of 3D points (meters, z-up)."""

    points: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.empty((0, 3)))


@dataclass(frozen=True)
class MovingActor:
    """Rigid keyframed actor: local cloud plus (frame, translation, yaw) keys.

    Poses are linearly interpolated between bracketing keyframes and clamped
    outside the keyed range. Yaw is applied about z before the translation.
    """

    id: str
    cloud: PointCloud
    key_frames: np.ndarray  # (m,) int, strictly increasing
    key_translations: np.ndarray  # (m, 3)
    key_yaws: np.ndarray  # (m,) radians

    def __post_init__(self):
        frames = np.asarray(self.key_frames, dtype=np.int64)
        trans = np.asarray(self.key_translations, dtype=np.float64).reshape(-1, 3)
        yaws = np.asarray(self.key_yaws, dtype=np.float64).reshape(-1)
        if frames.size == 0:
            raise ValueError(f"actor {self.id!r} needs at least one keyframe")
        if not (frames.size == trans.shape[0] == yaws.size):
            raise ValueError(f"actor {self.id!r}: keyframe arrays disagree in length")
        if frames.size > 1 and not (np.diff(frames) > 0).all():
            raise ValueError(f"actor {self.id!r}: keyframe indices must strictly increase")
        if not (np.isfinite(trans).all() and np.isfinite(yaws).all()):
            raise ValueError(f"actor {self.id!r}: non-finite keyframe values")
        for name, arr in (("key_frames", frames), ("key_translations", trans), ("key_yaws", yaws)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def pose_at(self, frame: float) -> tuple[np.ndarray, float]:
        """Interpolated (translation, yaw) at `frame`, clamped at the ends."""
        f = float(frame)
        frames = self.key_frames
        if f <= frames[0]:
            return self.key_translations[0].copy(), float(self.key_yaws[0])
        if f >= frames[-1]:
            return self.key_translations[-1].copy(), float(self.key_yaws[-1])
        hi = int(np.searchsorted(frames, f, side="right"))
        lo = hi - 1
        span = frames[hi] - frames[lo]
        w = (f - frames[lo]) / span
        t = (1.0 - w) * self.key_translations[lo] + w * self.key_translations[hi]
        yaw = (1.0 - w) * self.key_yaws[lo] + w * self.key_yaws[hi]
        return t, float(yaw)

    def points_at(self, frame: float) -> np.ndarray:
        """Local cloud posed at `frame` (yaw about z, then translation)."""
        t, yaw = self.pose_at(frame)
        c, s = math.cos(yaw), math.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return self.cloud.points @ rot.T + t


@dataclass
class DynamicScene:
    """Static cloud plus moving actors; mutated only during scenario setup."""

    static_cloud: PointCloud
    actors: list[MovingActor] = field(default_factory=list)
    frame_rate: float = 30.0

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        self._static_index = None

    def static_index(self, cell: float = DEFAULT_CELL) -> "_GridIndex":
        """Grid index over the static cloud, built once and reused."""
        if self._static_index is None or self._static_index.cell != cell:
            self._static_index = _GridIndex(self.static_cloud.points, cell)
        return self._static_index


def _multi_arange(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Concatenation of arange(s, e) for every (s, e) pair, vectorized."""
    counts = ends - starts
    nonempty = counts > 0
    starts, ends, counts = starts[nonempty], ends[nonempty], counts[nonempty]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    out[0] = starts[0]
    pos = np.cumsum(counts)[:-1]
    out[pos] = starts[1:] - ends[:-1] + 1
    return np.cumsum(out)


class _GridIndex:
    """Uniform-grid bucket index over an (N, 3) point array.

    Points are bucketed by floor((p - origin) / cell) into half-open cubic
    cells; a CSR-style layout (points sorted by linear cell id) lets ball
    queries gather whole cells with vectorized slicing. Gathered candidate
    sets always contain every point within the query radius, so exact
    selections on them are globally exact.
    """

    def __init__(self, points: np.ndarray, cell: float = DEFAULT_CELL):
        if cell <= 0:
            raise ValueError("cell size must be positive")
        self.points = points
        self.cell = float(cell)
        n = points.shape[0]
        if n == 0:
            self.origin = np.zeros(3)
            self._order = np.empty(0, dtype=np.int64)
            self._cell_coords = np.empty((0, 3), dtype=np.int64)
            self._starts = np.empty(0, dtype=np.int64)
            self._ends = np.empty(0, dtype=np.int64)
            self.bbox = (np.zeros(3), np.zeros(3))
            return
        self.bbox = (points.min(axis=0), points.max(axis=0))
        self.origin = self.bbox[0]
        coords = np.floor((points - self.origin) / self.cell).astype(np.int64)
        dims = coords.max(axis=0) + 1
        lin = (coords[:, 0] * dims[1] + coords[:, 1]) * dims[2] + coords[:, 2]
        order = np.argsort(lin, kind="stable")
        lin_sorted = lin[order]
        _, starts = np.unique(lin_sorted, return_index=True)
        self._order = order
        self._cell_coords = coords[order[starts]]
        self._starts = starts
        self._ends = np.append(starts[1:], n)

    def __len__(self):
        return self.points.shape[0]

    def candidates_in_box(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Indices of points in cells with integer coords in [lo, hi]."""
        cc = self._cell_coords
        if cc.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        m = (
            (cc[:, 0] >= lo[0]) & (cc[:, 0] <= hi[0])
            & (cc[:, 1] >= lo[1]) & (cc[:, 1] <= hi[1])
            & (cc[:, 2] >= lo[2]) & (cc[:, 2] <= hi[2])
        )
        return self._order[_multi_arange(self._starts[m], self._ends[m])]

    def candidates_in_ball(self, center: np.ndarray, r: float) -> np.ndarray:
        lo = np.floor((center - r - self.origin) / self.cell).astype(np.int64)
        hi = np.floor((center + r - self.origin) / self.cell).astype(np.int64)
        return self.candidates_in_box(lo, hi)

    def covers_all(self, center: np.ndarray, r: float) -> bool:
        """True when a ball of radius r around center contains the bbox."""
        lo, hi = self.bbox
        far = np.maximum(np.abs(lo - center), np.abs(hi - center))
        return float(np.linalg.norm(far)) <= r


def _select_k_nearest(d2: np.ndarray, gidx: np.ndarray, k: int, ordered: bool = True) -> np.ndarray:
    """Global indices of the k smallest (d2, gidx) pairs.

    Boundary ties always resolve to the lower index, so the selected SET is
    identical whether or not the final ordering pass runs.
    """
    if gidx.size <= k:
        if not ordered:
            return gidx
        order = np.lexsort((gidx, d2))
        return gidx[order]
    kth = np.partition(d2, k - 1)[k - 1]
    lt = d2 < kth
    n_lt = int(lt.sum())
    eq_idx = np.sort(gidx[d2 == kth])[: k - n_lt]
    sel = np.concatenate([gidx[lt], eq_idx])
    if not ordered:
        return sel
    d2_sel = np.concatenate([d2[lt], np.full(eq_idx.size, kth)])
    order = np.lexsort((sel, d2_sel))
    return sel[order]


class SceneSnapshot:
    """Immutable merged point cloud of static scene + actors at one frame.

    The static part reuses the scene's cached grid index; dynamic points are
    kept as a dense tail and scanned directly (they are few). Nearest
    neighbours are exact, ordered by distance with ties broken by point
    insertion index (static points first, then actors in declaration order).
    """

    def __init__(self, frame: int, points: np.ndarray, static_index: _GridIndex, n_static: int):
        self.frame = int(frame)
        points = as_points(points)
        points.flags.writeable = False
        self.points = points
        self._static = static_index
        self._n_static = int(n_static)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def from_points(cls, points, frame: int = 0, cell: float = DEFAULT_CELL) -> "SceneSnapshot":
        """Snapshot over a bare cloud (no dynamic tail); used by tests/tools."""
        pts = as_points(points)
        return cls(frame, pts, _GridIndex(pts, cell), pts.shape[0])

    def _dynamic_gidx(self) -> np.ndarray:
        return np.arange(self._n_static, self.points.shape[0], dtype=np.int64)

    def k_nearest_indices(self, center, k: int, ordered: bool = True) -> np.ndarray:
        """Indices of the k nearest points to center.

        Exact for any k; `ordered=False` returns the same index SET without
        the final distance ordering (cheaper for reductions like the
        projections, which are order-free).
        """
        if k < 0:
            raise ValueError("K must be nonnegative")
        center = np.asarray(center, dtype=np.float64).reshape(3)
        n = self.points.shape[0]
        k = min(k, n)
        if k == 0:
            return np.empty(0, dtype=np.int64)
        dyn = self._dynamic_gidx()
        n_static = self._n_static
        if n_static == 0:
            cand = dyn
            diff = self.points[cand] - center
            d2 = np.einsum("ij,ij->i", diff, diff)
        else:
            # initial radius from volumetric AND planar density estimates
            # (scenes are often near-planar), grown until k fall inside
            lo, hi = self._static.bbox
            vol = float(np.prod(np.maximum(hi - lo, self._static.cell)))
            area = float(np.prod(np.maximum((hi - lo)[:2], self._static.cell)))
            r3 = (3.0 * k / (4.0 * math.pi * max(n_static / vol, 1e-9))) ** (1.0 / 3.0)
            r2 = math.sqrt(k / (math.pi * max(n_static / area, 1e-9)))
            r = max(self._static.cell, r3, r2)
            while True:
                covers = self._static.covers_all(center, r)
                cand = self._static.candidates_in_ball(center, r)
                if dyn.size:
                    cand = np.concatenate([cand, dyn])
                diff = self.points[cand] - center
                d2 = np.einsum("ij,ij->i", diff, diff)
                if covers or int((d2 <= r * r).sum()) >= k:
                    break
                r *= 2.0
        return _select_k_nearest(d2, cand, k, ordered=ordered)

    def k_nearest_among(self, center, pool: np.ndarray, k: int, ordered: bool = True) -> np.ndarray:
        """The k nearest to center restricted to a candidate index pool.

        Exact against the full cloud whenever the pool is itself a nearest
        superset (e.g. selecting K1 inside an unordered K2 result).
        """
        center = np.asarray(center, dtype=np.float64).reshape(3)
        k = min(k, pool.size)
        if k == 0:
            return np.empty(0, dtype=np.int64)
        diff = self.points[pool] - center
        d2 = np.einsum("ij,ij->i", diff, diff)
        return _select_k_nearest(d2, pool, k, ordered=ordered)

    def support_height(self, xy, radius: float, z_cap: float = math.inf) -> float:
        """Max z among points within horizontal `radius` of xy and z <= z_cap.

        Returns -inf when no point qualifies. This is the local "scene
        support" used for contact tests; the z cap keeps overhanging geometry
        (tables, other bodies) from masquerading as support.
        """
        xy = np.asarray(xy, dtype=np.float64).reshape(2)
        n = self.points.shape[0]
        if n == 0:
            return -math.inf
        if self._n_static > 0:
            g = self._static
            lo = np.floor((np.array([xy[0] - radius, xy[1] - radius, g.bbox[0][2]]) - g.origin) / g.cell).astype(np.int64)
            hi = np.floor((np.array([xy[0] + radius, xy[1] + radius, min(z_cap, g.bbox[1][2])]) - g.origin) / g.cell).astype(np.int64)
            cand = g.candidates_in_box(lo, hi)
        else:
            cand = np.empty(0, dtype=np.int64)
        dyn = self._dynamic_gidx()
        if dyn.size:
            cand = np.concatenate([cand, dyn])
        if cand.size == 0:
            return -math.inf
        pts = self.points[cand]
        keep = (
            ((pts[:, 0] - xy[0]) ** 2 + (pts[:, 1] - xy[1]) ** 2 <= radius * radius)
            & (pts[:, 2] <= z_cap)
        )
        if not keep.any():
            return -math.inf
        return float(pts[keep, 2].max())


def snapshot(scene: DynamicScene, frame: int, cell: float = DEFAULT_CELL,
             extra_points: np.ndarray | None = None) -> SceneSnapshot:
    """Merged snapshot of the scene at `frame`.

    `extra_points` lets callers inject additional dynamic geometry (other
    characters' bodies) behind the same interface.
    """
    if frame < 0:
        raise ValueError("frame must be nonnegative")
    static = scene.static_cloud.points
    parts = [static]
    for actor in scene.actors:
        parts.append(actor.points_at(frame))
    if extra_points is not None and len(extra_points):
        parts.append(as_points(extra_points))
    merged = np.vstack(parts) if len(parts) > 1 else static
    return SceneSnapshot(frame, merged, scene.static_index(cell), static.shape[0])


def k_nearest(snap: SceneSnapshot, center, k: int) -> np.ndarray:
    """The min(K, N) nearest points to center, ordered by ascending distance.

    Ties at equal distance resolve to the lower insertion index, so results
    are reproducible and match a brute-force sort exactly.
    """
    idx = snap.k_nearest_indices(center, k)
    return snap.points[idx]


# ---------------------------------------------------------------------------
# ASCII PLY I/O


def save_ply(cloud: PointCloud, path) -> None:
    """Write an ASCII PLY with double x/y/z (exact float round-trip)."""
    pts = cloud.points
    with open(path, "w", encoding="ascii") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {pts.shape[0]}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write("end_header\n")
        for x, y, z in pts:
            fh.write(f"{x!r} {y!r} {z!r}\n")


def load_ply(path) -> PointCloud:
    """Read an ASCII PLY with float/double x, y, z vertex properties."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PlyParseError("missing 'ply' magic", 1)
    n_vertex = None
    props: list[str] = []
    header_end = None
    in_vertex = False
    for ln, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1:2] != ["ascii"]:
                raise PlyParseError(f"unsupported format {' '.join(tok[1:])!r}", ln)
        elif tok[0] == "element":
            in_vertex = tok[1:2] == ["vertex"]
            if in_vertex:
                try:
                    n_vertex = int(tok[2])
                except (IndexError, ValueError):
                    raise PlyParseError("bad vertex count", ln) from None
        elif tok[0] == "property" and in_vertex:
            if len(tok) != 3 or tok[1] not in ("float", "float32", "double", "float64"):
                raise PlyParseError(f"unsupported vertex property {raw.strip()!r}", ln)
            props.append(tok[2])
        elif tok[0] == "end_header":
            header_end = ln
            break
    if header_end is None:
        raise PlyParseError("missing end_header", len(lines))
    if n_vertex is None:
        raise PlyParseError("no vertex element declared", header_end)
    for axis in ("x", "y", "z"):
        if axis not in props:
            raise PlyParseError(f"vertex element lacks property {axis!r}", header_end)
    cols = [props.index(a) for a in ("x", "y", "z")]
    body = lines[header_end:]
    if len(body) < n_vertex:
        raise PlyParseError(
            f"header declares {n_vertex} vertices but only {len(body)} data lines present",
            header_end + len(body),
        )
    pts = np.empty((n_vertex, 3))
    for i in range(n_vertex):
        ln = header_end + 1 + i
        tok = body[i].split()
        if len(tok) < len(props):
            raise PlyParseError(f"expected {len(props)} values, got {len(tok)}", ln)
        try:
            for a, c in enumerate(cols):
                pts[i, a] = float(tok[c])
        except ValueError:
            raise PlyParseError(f"non-numeric coordinate in {body[i]!r}", ln) from None
    if not np.isfinite(pts).all():
        raise ValueError("PLY contains non-finite coordinates")
    return PointCloud(pts)


# ---------------------------------------------------------------------------
# Synthetic scene generation


def _require_positive(spec: dict, keys: list[str], where: str) -> None:
    for key in keys:
        vals = np.atleast_1d(np.asarray(spec[key], dtype=np.float64))
        if (vals <= 0).any():
            raise ValueError(f"{where}: {key} must be positive, got {spec[key]}")


def _sample_rect(rng, corner, edge_u, edge_v, density) -> np.ndarray:
    """Uniform random samples on a parallelogram surface patch."""
    area = float(np.linalg.norm(np.cross(edge_u, edge_v)))
    count = max(1, int(round(area * density)))
    uv = rng.random((count, 2))
    return corner + uv[:, :1] * edge_u + uv[:, 1:] * edge_v


def _box_points(rng, center, dims, density, with_bottom=False) -> np.ndarray:
    cx, cy, cz = center
    dx, dy, dz = dims
    x0, y0, z0 = cx - dx / 2, cy - dy / 2, cz - dz / 2
    ex = np.array([dx, 0.0, 0.0])
    ey = np.array([0.0, dy, 0.0])
    ez = np.array([0.0, 0.0, dz])
    c000 = np.array([x0, y0, z0])
    faces = [
        (c000 + ez, ex, ey),  # top
        (c000, ex, ez),  # -y side
        (c000 + ey, ex, ez),  # +y side
        (c000, ey, ez),  # -x side
        (c000 + ex, ey, ez),  # +x side
    ]
    if with_bottom:
        faces.append((c000, ex, ey))
    return np.vstack([_sample_rect(rng, *f, density) for f in faces])


def _column_points(rng, center_xy, radius, height, density, base_z=0.0) -> np.ndarray:
    side_area = 2.0 * math.pi * radius * height
    count = max(1, int(round(side_area * density)))
    theta = rng.random(count) * 2.0 * math.pi
    z = rng.random(count) * height + base_z
    side = np.column_stack(
        [center_xy[0] + radius * np.cos(theta), center_xy[1] + radius * np.sin(theta), z]
    )
    top_count = max(1, int(round(math.pi * radius * radius * density)))
    rr = radius * np.sqrt(rng.random(top_count))
    tt = rng.random(top_count) * 2.0 * math.pi
    top = np.column_stack(
        [center_xy[0] + rr * np.cos(tt), center_xy[1] + rr * np.sin(tt),
         np.full(top_count, base_z + height)]
    )
    return np.vstack([side, top])


def _stairs_points(rng, spec, density) -> np.ndarray:
    origin = np.asarray(spec.get("origin", [0.0, 0.0, 0.0]), dtype=np.float64)
    rise = float(spec["rise"])
    run = float(spec["run"])
    count = int(spec["count"])
    width = float(spec.get("width", 2.0))
    direction = np.asarray(spec.get("direction", [1.0, 0.0]), dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    lateral = np.array([-direction[1], direction[0]])
    du = np.array([direction[0] * run, direction[1] * run, 0.0])
    dv = np.array([lateral[0] * width, lateral[1] * width, 0.0])
    parts = []
    for i in range(count):
        step_base = origin + np.array([direction[0] * run * i, direction[1] * run * i, 0.0])
        tread = step_base + np.array([0.0, 0.0, (i + 1) * rise])
        parts.append(_sample_rect(rng, tread, du, dv, density))
        riser = step_base + np.array([0.0, 0.0, i * rise])
        parts.append(_sample_rect(rng, riser, np.array([0.0, 0.0, rise]), dv, density))
    return np.vstack(parts)


def _mover_cloud(rng, shape: dict, density: float) -> np.ndarray:
    kind = shape.get("kind", "column")
    if kind == "box":
        dims = np.asarray(shape["dims"], dtype=np.float64)
        _require_positive(shape, ["dims"], "mover box")
        center = np.array([0.0, 0.0, dims[2] / 2.0])
        return _box_points(rng, center, dims, density)
    if kind == "column":
        _require_positive(shape, ["radius", "height"], "mover column")
        return _column_points(rng, np.zeros(2), float(shape["radius"]), float(shape["height"]), density)
    raise ValueError(f"mover shape kind {kind!r} not supported")


def generate_synthetic(spec: dict, seed: int) -> DynamicScene:
    """Deterministic synthetic scene from a primitive-list JSON document.

    Supported primitive kinds: floor, box, stairs, column. `movers` become
    keyframed actors. Same (spec, seed) always yields the identical scene.
    """
    rng = np.random.default_rng(np.uint64(seed))
    density_default = float(spec.get("density", DEFAULT_DENSITY))
    if density_default <= 0:
        raise ValueError(f"density must be positive, got {density_default}")
    parts: list[np.ndarray] = []
    for idx, prim in enumerate(spec.get("primitives", [])):
        kind = prim.get("kind")
        where = f"primitives[{idx}] ({kind})"
        density = float(prim.get("density", density_default))
        if density <= 0:
            raise ValueError(f"{where}: density must be positive, got {density}")
        if kind == "floor":
            _require_positive(prim, ["extent"], where)
            extent = np.asarray(prim["extent"], dtype=np.float64)
            center = np.asarray(prim.get("center", [0.0, 0.0]), dtype=np.float64)
            z = float(prim.get("z", 0.0))
            corner = np.array([center[0] - extent[0] / 2, center[1] - extent[1] / 2, z])
            parts.append(
                _sample_rect(rng, corner, np.array([extent[0], 0, 0]), np.array([0, extent[1], 0]), density)
            )
        elif kind == "box":
            _require_positive(prim, ["dims"], where)
            parts.append(
                _box_points(rng, np.asarray(prim["center"], dtype=np.float64),
                            np.asarray(prim["dims"], dtype=np.float64), density)
            )
        elif kind == "stairs":
            _require_positive(prim, ["rise", "run", "count"], where)
            parts.append(_stairs_points(rng, prim, density))
        elif kind == "column":
            _require_positive(prim, ["radius", "height"], where)
            parts.append(
                _column_points(rng, np.asarray(prim["center"], dtype=np.float64),
                               float(prim["radius"]), float(prim["height"]), density,
                               base_z=float(prim.get("base_z", 0.0)))
            )
        else:
            raise ValueError(f"{where}: unknown primitive kind")
    static = PointCloud(np.vstack(parts)) if parts else PointCloud.empty()
    actors = []
    for m_idx, mover in enumerate(spec.get("movers", [])):
        cloud = PointCloud(_mover_cloud(rng, mover.get("shape", {}), float(mover.get("density", density_default))))
        keys = mover.get("keyframes", [])
        if not keys:
            raise ValueError(f"movers[{m_idx}]: needs at least one keyframe")
        actors.append(
            MovingActor(
                id=str(mover.get("id", f"mover{m_idx}")),
                cloud=cloud,
                key_frames=np.array([k["frame"] for k in keys], dtype=np.int64),
                key_translations=np.array([k["translation"] for k in keys], dtype=np.float64),
                key_yaws=np.array([k.get("yaw", 0.0) for k in keys], dtype=np.float64),
            )
        )
    return DynamicScene(static_cloud=static, actors=actors,
                        frame_rate=float(spec.get("frame_rate", 30.0)))
