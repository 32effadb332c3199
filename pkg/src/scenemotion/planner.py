"""Elevation-graph planning: walkability, per-state goal filters, stochastic
goal sampling, and A* over the BEV grid.

Grid nodes are BEV cells carrying absolute elevation. Walkable edges join
8-neighboring occupied cells whose elevation step is at most `step_max`;
diagonal moves additionally require both adjacent orthogonal steps to be
walkable (no corner cutting).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .body import AnchorState, yaw_to_rot6d
from .perception import BevMaps

# 8-neighborhood: 4 orthogonal then 4 diagonal steps
DIRS8 = np.array([(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)])
DIR_COSTS = np.array([1.0, 1.0, 1.0, 1.0] + [math.sqrt(2.0)] * 4)
# diagonal direction -> indices of its two orthogonal components in DIRS8
_DIAG_ORTH = {4: (0, 2), 5: (0, 3), 6: (1, 2), 7: (1, 3)}


class NoFeasibleGoal(Exception):
    """Raised when the per-state goal filter is empty."""


@dataclass(frozen=True)
class PlannerConfig:
    """Goal sampling and walkability parameters (meters unless noted)."""

    sigma_t: float = 2.0        # goal sampling std around the hint
    step_max: float = 0.25      # max walkable elevation step
    sit_rise: tuple = (0.3, 0.6)    # elevation rise for idle->sit transitions
    lie_rise: tuple = (0.3, 0.8)    # rise window for lying surfaces
    epsilon: float = 0.3        # goal-reached tolerance
    h_root: float = 0.9         # pelvis height above support when standing
    h_root_sit: float = 0.25    # pelvis height above the seat
    h_root_lie: float = 0.15    # pelvis height above a lying surface

    def __post_init__(self):
        if self.sigma_t <= 0 or self.step_max <= 0 or self.epsilon <= 0:
            raise ValueError("sigma_t, step_max and epsilon must be positive")
        for name in ("sit_rise", "lie_rise"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must be a nonempty positive range")

    def root_height(self, state: AnchorState) -> float:
        if state == AnchorState.SITTING:
            return self.h_root_sit
        if state == AnchorState.LYING:
            return self.h_root_lie
        return self.h_root


@dataclass
class ElevationGraph:
    """Grid graph over BEV cells with per-direction walkability flags."""

    elevation: np.ndarray  # (M, M) absolute z of cell support
    occupied: np.ndarray   # (M, M)
    walkable: np.ndarray   # (M, M, 8) edge flags, symmetric
    cell: float
    origin: np.ndarray     # (2,) world xy of the grid lower corner

    @property
    def m(self) -> int:
        return self.elevation.shape[0]

    def cell_of(self, xy) -> tuple[int, int]:
        i = int(math.floor((xy[0] - self.origin[0]) / self.cell))
        j = int(math.floor((xy[1] - self.origin[1]) / self.cell))
        return min(max(i, 0), self.m - 1), min(max(j, 0), self.m - 1)

    def center_of(self, cell) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=np.float64) + 0.5) * self.cell

    def node_walkable(self) -> np.ndarray:
        """(M, M) cells with at least one walkable edge."""
        return self.walkable.any(axis=2)

    def main_component(self) -> np.ndarray:
        """(M, M) mask of the largest walkable-connected component.

        Goal masks for idle/locomotion use this so isolated walkable islands
        (furniture tops, other bodies) are never offered as walking targets.
        """
        walk = self.node_walkable()
        labels = np.full(walk.shape, -1, dtype=np.int64)
        best_label, best_size = -1, 0
        next_label = 0
        for si in range(self.m):
            for sj in range(self.m):
                if not walk[si, sj] or labels[si, sj] >= 0:
                    continue
                stack = [(si, sj)]
                labels[si, sj] = next_label
                size = 0
                while stack:
                    ci, cj = stack.pop()
                    size += 1
                    for d, (di, dj) in enumerate(DIRS8):
                        if not self.walkable[ci, cj, d]:
                            continue
                        ni, nj = ci + di, cj + dj
                        if labels[ni, nj] < 0:
                            labels[ni, nj] = next_label
                            stack.append((ni, nj))
                if size > best_size:
                    best_size, best_label = size, next_label
                next_label += 1
        return labels == best_label


@dataclass(frozen=True)
class GoalFilter:
    """Boolean feasibility mask over BEV cells for one target state."""

    mask: np.ndarray
    target_state: AnchorState


def build_graph(bev: BevMaps, cfg: PlannerConfig) -> ElevationGraph:
    """Derive walkability from elevation steps between neighboring cells."""
    occ = bev.occupancy
    elev = bev.elevation + bev.root[2]  # absolute support height
    m = occ.shape[0]
    walk = np.zeros((m, m, 8), dtype=bool)

    def shifted_ok(d):
        di, dj = DIRS8[d]
        ok = np.zeros((m, m), dtype=bool)
        src = (slice(max(0, -di), m - max(0, di)), slice(max(0, -dj), m - max(0, dj)))
        dst = (slice(max(0, di), m - max(0, -di)), slice(max(0, dj), m - max(0, -dj)))
        both = occ[src] & occ[dst]
        step = np.abs(elev[dst] - elev[src])
        ok[src] = both & (step <= cfg.step_max)
        return ok

    for d in range(4):
        walk[:, :, d] = shifted_ok(d)
    for d, (o1, o2) in _DIAG_ORTH.items():
        diag_ok = shifted_ok(d)
        di, dj = DIRS8[d]
        # no corner cutting: both orthogonal steps from the source must be
        # walkable, and the orthogonal steps completing the square too
        o1i, o1j = DIRS8[o1]
        o2i, o2j = DIRS8[o2]
        via1 = walk[:, :, o1] & _shift_mask(walk[:, :, o2], o1i, o1j)
        via2 = walk[:, :, o2] & _shift_mask(walk[:, :, o1], o2i, o2j)
        walk[:, :, d] = diag_ok & via1 & via2
    return ElevationGraph(elevation=elev, occupied=occ.copy(), walkable=walk,
                          cell=bev.cell, origin=bev.origin.copy())


def _shift_mask(mask: np.ndarray, di: int, dj: int) -> np.ndarray:
    """mask value at (i + di, j + dj), False outside the grid."""
    m = mask.shape[0]
    out = np.zeros_like(mask)
    src = (slice(max(0, di), m - max(0, -di)), slice(max(0, dj), m - max(0, -dj)))
    dst = (slice(max(0, -di), m - max(0, di)), slice(max(0, -dj), m - max(0, dj)))
    out[dst] = mask[src]
    return out


def feasible_mask(graph: ElevationGraph, target_state: AnchorState,
                  cfg: PlannerConfig) -> GoalFilter:
    """Per-state goal feasibility from elevation transitions.

    Idle/locomotion goals live on the main walkable component. Sitting
    requires a cell raised `sit_rise` above at least one adjacent walkable
    cell; lying uses `lie_rise` and needs two such neighbors on opposite
    sides (room for the body to lie across).
    """
    if target_state == AnchorState.INVALID:
        raise ValueError("INVALID is not a goal state")
    if target_state in (AnchorState.IDLE, AnchorState.LOCOMOTION):
        return GoalFilter(graph.main_component(), target_state)
    lo, hi = cfg.sit_rise if target_state == AnchorState.SITTING else cfg.lie_rise
    walk = graph.node_walkable() & graph.main_component()
    qualify = np.zeros((graph.m, graph.m, 8), dtype=bool)
    for d, (di, dj) in enumerate(DIRS8):
        n_walk = _shift_mask(walk, di, dj)
        n_elev = _shift_mask_float(graph.elevation, di, dj)
        rise = graph.elevation - n_elev
        qualify[:, :, d] = graph.occupied & n_walk & (rise >= lo) & (rise <= hi)
    if target_state == AnchorState.SITTING:
        mask = qualify.any(axis=2)
    else:
        # opposite-direction pairs in DIRS8: (0,1), (2,3), (4,7), (5,6)
        pairs = [(0, 1), (2, 3), (4, 7), (5, 6)]
        mask = np.zeros((graph.m, graph.m), dtype=bool)
        for a, b in pairs:
            mask |= qualify[:, :, a] & qualify[:, :, b]
    return GoalFilter(mask, target_state)


def goal_weights(t_hat, filt: GoalFilter, graph: ElevationGraph, cfg: PlannerConfig
                 ) -> tuple[np.ndarray, np.ndarray]:
    """(cells, probabilities) of the truncated-Gaussian goal distribution."""
    cells = np.argwhere(filt.mask)
    if cells.shape[0] == 0:
        raise NoFeasibleGoal(f"no feasible goal for state {filt.target_state.name}")
    centers = graph.origin + (cells + 0.5) * graph.cell
    t_hat = np.asarray(t_hat, dtype=np.float64).reshape(-1)[:2]
    d2 = ((centers - t_hat) ** 2).sum(axis=1)
    logw = -d2 / (2.0 * cfg.sigma_t ** 2)
    w = np.exp(logw - logw.max())
    return cells, w / w.sum()


def sample_goal(t_hat, filt: GoalFilter, graph: ElevationGraph, cfg: PlannerConfig,
                rng: np.random.Generator) -> tuple[np.ndarray, tuple[int, int]]:
    """Sample a goal cell ~ N(t_hat, sigma_t^2) restricted to the filter mask.

    Returns the goal position (cell center xy, support elevation plus the
    state's root-height offset) and the sampled cell.
    """
    cells, probs = goal_weights(t_hat, filt, graph, cfg)
    pick = int(rng.choice(cells.shape[0], p=probs))
    cell = (int(cells[pick, 0]), int(cells[pick, 1]))
    center = graph.center_of(cell)
    z = graph.elevation[cell] + cfg.root_height(filt.target_state)
    return np.array([center[0], center[1], z]), cell


def _shift_mask_float(arr: np.ndarray, di: int, dj: int, fill: float = math.inf) -> np.ndarray:
    m = arr.shape[0]
    out = np.full_like(arr, fill)
    src = (slice(max(0, di), m - max(0, -di)), slice(max(0, dj), m - max(0, -dj)))
    dst = (slice(max(0, -di), m - max(0, di)), slice(max(0, -dj), m - max(0, dj)))
    out[dst] = arr[src]
    return out


def _octile(a, b) -> float:
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return max(dx, dy) + (math.sqrt(2.0) - 1.0) * min(dx, dy)


def astar(graph: ElevationGraph, start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]]:
    """Minimal-cost cell path over walkable edges (1 orthogonal, sqrt2 diagonal).

    Octile heuristic (admissible and consistent); ties broken toward the
    lower linear cell index. Returns [] when the goal is unreachable.
    """
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    if not (graph.occupied[start] and graph.occupied[goal]):
        return []
    if start == goal:
        return [start]
    m = graph.m
    lin = lambda c: c[0] * m + c[1]
    g_cost = {start: 0.0}
    parent = {}
    heap = [(_octile(start, goal), lin(start), start)]
    closed = set()
    while heap:
        f, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = [cur]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            return path[::-1]
        closed.add(cur)
        ci, cj = cur
        for d, (di, dj) in enumerate(DIRS8):
            if not graph.walkable[ci, cj, d]:
                continue
            nxt = (ci + di, cj + dj)
            if nxt in closed:
                continue
            cand = g_cost[cur] + DIR_COSTS[d]
            if cand < g_cost.get(nxt, math.inf) - 1e-12:
                g_cost[nxt] = cand
                parent[nxt] = cur
                heapq.heappush(heap, (cand + _octile(nxt, goal), lin(nxt), nxt))
    return []


def path_cost(path: list[tuple[int, int]]) -> float:
    """Horizontal cost of a cell path in cell units."""
    cost = 0.0
    for a, b in zip(path[:-1], path[1:]):
        cost += math.hypot(b[0] - a[0], b[1] - a[1])
    return cost


def orient_goal(path: list[tuple[int, int]], graph: ElevationGraph) -> np.ndarray:
    """6D goal orientation: yaw faces the final path segment, level pitch/roll."""
    if not path:
        raise ValueError("orient_goal needs a non-empty path")
    if len(path) == 1:
        return yaw_to_rot6d(0.0)
    a = graph.center_of(path[-2])
    b = graph.center_of(path[-1])
    d = b - a
    return yaw_to_rot6d(math.atan2(d[1], d[0]))


def goal_reached(t, t_goal, epsilon: float) -> bool:
    """Horizontal distance strictly below the tolerance."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    t_goal = np.asarray(t_goal, dtype=np.float64).reshape(-1)
    return math.hypot(t[0] - t_goal[0], t[1] - t_goal[1]) < epsilon


def plan_path(graph: ElevationGraph, start: tuple[int, int], goal: tuple[int, int]
              ) -> list[tuple[int, int]]:
    """A* path with virtual first/last steps for off-graph endpoints.

    Sitting targets (and a character standing up from one) live on cells
    without walkable edges; the path then runs between the best adjacent
    walkable cells and keeps the raised endpoint as an explicit transition
    step. Returns [] when no connection exists.
    """
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    if not (graph.occupied[start] and graph.occupied[goal]):
        return []
    walk = graph.node_walkable()

    def adjacent_walkable(cell, toward):
        best = None
        for di, dj in DIRS8:
            ni, nj = cell[0] + di, cell[1] + dj
            if 0 <= ni < graph.m and 0 <= nj < graph.m and walk[ni, nj]:
                key = (math.hypot(ni - toward[0], nj - toward[1]), ni * graph.m + nj)
                if best is None or key < best[0]:
                    best = (key, (ni, nj))
        return None if best is None else best[1]

    prefix: list[tuple[int, int]] = []
    suffix: list[tuple[int, int]] = []
    s, g = start, goal
    if start == goal:
        return [start]
    if not walk[s]:
        step = adjacent_walkable(s, goal)
        if step is None:
            return []
        prefix, s = [start], step
    if not walk[g]:
        step = adjacent_walkable(g, s)
        if step is None:
            return []
        suffix, g = [goal], step
    core = astar(graph, s, g)
    if not core:
        return []
    return prefix + core + suffix
