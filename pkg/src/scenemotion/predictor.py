"""Pluggable goal / route / pose predictors producing k-frame hypothesized
motions.

The procedural predictor is the deterministic reference: goals are sampled
through the elevation-graph filter, routes traverse the planned cell path
with a trapezoidal speed profile, and poses combine per-state base codes
with an explicit stepping model that keeps the stance foot planted (so
contact, phase and the no-skating correction are all exercised end to end).
The network predictor runs the same interfaces through forward-only CVAE
decoders with seeded weights, proving shapes and wiring rather than learned
behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .body import (AnchorState, BodyModel, MotionSeq, PoseCode, RouteFrame,
                   THETA_H_DIM, THETA_P_DIM, one_hot_state, rot6d_to_matrix,
                   rot6d_valid_mask, yaw_to_rot6d, IDENTITY_ROT6D, N_STATES)
from .perception import BevMaps, SphericalDepthMap
from .planner import (ElevationGraph, GoalFilter, NoFeasibleGoal, PlannerConfig,
                      feasible_mask, orient_goal, plan_path, sample_goal)
from .scene import SceneSnapshot

GOAL_LATENT_DIM = 32
POSE_LATENT_DIM = 64
GOAL_COND_DIM = 128
SPEED_LOCO = 0.1  # m/s above which a frame counts as locomotion
STATE_WINDOW = 6  # frames over which state transitions cross-fade
STATE_SMOOTHING = 0.1
STEP_RATE = 0.7  # gait cycles per meter travelled
SWING_LIFT = 0.05  # swing foot apex height, m


class UnreachableGoal(Exception):
    """No walkable connection from the current cell to the goal cell."""


class NowhereToGo(Exception):
    """Every goal-state filter came back empty."""


@dataclass
class PredictorContext:
    """Everything a predictor may read at one step (immutable by convention)."""

    snapshot: SceneSnapshot
    route0: RouteFrame
    pose0: PoseCode
    state0: AnchorState
    phase0: float
    spherical: SphericalDepthMap
    bev: BevMaps
    graph: ElevationGraph
    frame: int
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    fps: float = 30.0
    features: "FeatureBundle | None" = None


@dataclass(frozen=True)
class GoalProposal:
    t_g: np.ndarray  # (3,)
    r_g: np.ndarray  # (6,)
    target_state: AnchorState
    cell: tuple[int, int]


@dataclass(frozen=True)
class GaussianLatent:
    """Diagonal Gaussian over a latent code (mu, log sigma per dimension)."""

    mu: np.ndarray
    log_sigma: np.ndarray


@dataclass(frozen=True)
class GoalStateMix:
    """Configured target-state mixture, renormalized over nonempty filters."""

    locomotion: float = 0.7
    sitting: float = 0.2
    idle: float = 0.1
    lying: float = 0.0

    def items(self):
        return [
            (AnchorState.LOCOMOTION, self.locomotion),
            (AnchorState.SITTING, self.sitting),
            (AnchorState.IDLE, self.idle),
            (AnchorState.LYING, self.lying),
        ]


@dataclass
class RoutePrediction:
    t: np.ndarray  # (k, 3)
    r: np.ndarray  # (k, 6)
    path: list  # planned cells actually traversed (may be empty for network routes)


def _facing_xy(r6: np.ndarray) -> np.ndarray:
    """Horizontal forward direction of a 6D orientation (unit, +x fallback)."""
    fwd = np.asarray(r6, dtype=np.float64)[:3][:2]
    n = np.linalg.norm(fwd)
    return fwd / n if n > 1e-8 else np.array([1.0, 0.0])


def _yaw_of(r6: np.ndarray) -> float:
    fwd = _facing_xy(r6)
    return math.atan2(fwd[1], fwd[0])


def choose_goal_state(graph: ElevationGraph, cfg: PlannerConfig, mix: GoalStateMix,
                      rng: np.random.Generator) -> tuple[AnchorState, GoalFilter]:
    """Draw a target state from the mixture, restricted to nonempty filters."""
    options = []
    for state, weight in mix.items():
        if weight <= 0:
            continue
        filt = feasible_mask(graph, state, cfg)
        if filt.mask.any():
            options.append((state, weight, filt))
    if not options:
        raise NowhereToGo("every goal-state filter is empty")
    weights = np.array([w for _, w, _ in options])
    pick = int(rng.choice(len(options), p=weights / weights.sum()))
    return options[pick][0], options[pick][2]


def propose_goal_procedural(ctx: PredictorContext, cfg: PlannerConfig, mix: GoalStateMix,
                            rng: np.random.Generator,
                            forward_range: tuple[float, float] = (2.0, 6.0)) -> GoalProposal:
    """Goal hint a few meters ahead, snapped through the per-state filter."""
    state, filt = choose_goal_state(ctx.graph, cfg, mix, rng)
    d = rng.uniform(*forward_range)
    t_hat = ctx.route0.t[:2] + _facing_xy(ctx.route0.r) * d
    t_g, cell = sample_goal(t_hat, filt, ctx.graph, cfg, rng)
    path = plan_path(ctx.graph, ctx.graph.cell_of(ctx.route0.t[:2]), cell)
    if path:
        r_g = orient_goal(path, ctx.graph)
    else:
        d_xy = t_g[:2] - ctx.route0.t[:2]
        r_g = yaw_to_rot6d(math.atan2(d_xy[1], d_xy[0])) if np.linalg.norm(d_xy) > 1e-9 \
            else yaw_to_rot6d(_yaw_of(ctx.route0.r))
    return GoalProposal(t_g=t_g, r_g=r_g, target_state=state, cell=cell)


# ---------------------------------------------------------------------------
# Procedural route


def _polyline_interp(points: np.ndarray, s: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    x = np.interp(s, cum, points[:, 0])
    y = np.interp(s, cum, points[:, 1])
    return np.array([x, y])


def trapezoid_speeds(total: float, k: int, dt: float, v0: float = 0.0,
                     accel: float = 1.0, v_max: float = 1.4) -> np.ndarray:
    """Per-frame speeds of a bounded-acceleration dash over `total` meters,
    braking with v = sqrt(2 a s_rem) so the end is reached at rest."""
    v = min(max(v0, 0.0), v_max)
    s = 0.0
    out = np.zeros(k)
    for i in range(k):
        s_rem = max(total - s, 0.0)
        v = min(v_max, v + accel * dt, math.sqrt(2.0 * accel * s_rem))
        step = min(v * dt, s_rem)
        s += step
        out[i] = step / dt
    return out


def predict_route_procedural(ctx: PredictorContext, goal: GoalProposal, cfg: PlannerConfig,
                             k: int = 60, path: list | None = None,
                             accel: float = 1.0, v_max: float = 1.4,
                             yaw_hold_speed: float = 0.05) -> RoutePrediction:
    """Traverse the planned cell path with a trapezoidal speed profile.

    z follows cell support + standing root height; raised targets (sitting,
    lying) stop at the approach cell and transition onto the goal position
    over a short window. Holds position once the end is reached.
    """
    graph = ctx.graph
    t0 = ctx.route0.t
    if path is None:
        path = plan_path(graph, graph.cell_of(t0[:2]), goal.cell)
    if not path:
        raise UnreachableGoal(f"no walkable path to cell {goal.cell}")
    transition = goal.target_state in (AnchorState.SITTING, AnchorState.LYING)
    walk_cells = path[:-1] if (transition and len(path) > 1) else path
    poly = np.vstack([t0[:2]] + [graph.center_of(c) for c in walk_cells])
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    total = float(seg.sum())
    dt = 1.0 / ctx.fps

    v0 = float(np.linalg.norm(ctx.velocity[:2]))
    speeds = trapezoid_speeds(total, k, dt, v0=v0, accel=accel, v_max=v_max)
    s = np.cumsum(speeds) * dt
    t = np.empty((k, 3))
    yaw = np.empty(k)
    prev_yaw = _yaw_of(ctx.route0.r)
    prev_xy = t0[:2]
    arrived = None
    for i in range(k):
        xy = _polyline_interp(poly, min(s[i], total))
        cell = graph.cell_of(xy)
        t[i, :2] = xy
        t[i, 2] = graph.elevation[cell] + cfg.h_root
        step = xy - prev_xy
        if np.linalg.norm(step) / dt >= yaw_hold_speed:
            prev_yaw = math.atan2(step[1], step[0])
        yaw[i] = prev_yaw
        prev_xy = xy
        if arrived is None and s[i] >= total - 1e-9:
            arrived = i

    # soften the first frames' z toward the path height (stand-up ramps)
    ramp = np.minimum(1.0, (np.arange(k) + 1) / STATE_WINDOW)
    t[:, 2] = (1.0 - ramp) * t0[2] + ramp * t[:, 2]

    if transition and arrived is not None:
        for j in range(arrived, k):
            w = min(1.0, (j - arrived + 1) / STATE_WINDOW)
            t[j, :2] = (1.0 - w) * t[j, :2] + w * goal.t_g[:2]
            t[j, 2] = (1.0 - w) * t[j, 2] + w * goal.t_g[2]
    r = np.stack([yaw_to_rot6d(a) for a in yaw])
    return RoutePrediction(t=t, r=r, path=list(path))


# ---------------------------------------------------------------------------
# Procedural pose / state / phase


@dataclass(frozen=True)
class PoseParams:
    """Shipped per-state base pose codes and the gait oscillation direction.

    The first six pose dimensions steer the feet and are owned by the
    stepping solver, so bases and gait keep them zero.
    """

    bases: np.ndarray  # (4, 56)
    gait: np.ndarray   # (56,)
    amplitude: float = 1.0


def default_pose_params(seed: int = 555) -> PoseParams:
    rng = np.random.default_rng(seed)
    bases = rng.standard_normal((N_STATES, THETA_P_DIM + THETA_H_DIM)) * 0.4
    gait = rng.standard_normal(THETA_P_DIM + THETA_H_DIM) * 0.15
    bases[:, :6] = 0.0
    gait[:6] = 0.0
    return PoseParams(bases=bases, gait=gait)


def _smooth_states(raw: np.ndarray, window: int = STATE_WINDOW,
                   smoothing: float = STATE_SMOOTHING) -> np.ndarray:
    """Box-filter one-hot rows (rows keep summing to 1), then mix in a
    uniform floor so probabilities are never exactly zero."""
    k = raw.shape[0]
    pad = window // 2
    padded = np.vstack([np.repeat(raw[:1], pad, axis=0), raw,
                        np.repeat(raw[-1:], window - pad - 1, axis=0)])
    kernel = np.ones(window) / window
    out = np.empty_like(raw)
    for c in range(raw.shape[1]):
        out[:, c] = np.convolve(padded[:, c], kernel, mode="valid")
    out = (1.0 - smoothing) * out + smoothing / raw.shape[1]
    return out / out.sum(axis=1, keepdims=True)


def _stance_segments(loco: np.ndarray, phases: np.ndarray) -> list[tuple[str, int, int]]:
    """Maximal (foot, start, end) stance intervals on locomotion frames;
    left foot is stance while phase < 0.5, right foot otherwise."""
    segments = []
    k = loco.shape[0]
    i = 0
    while i < k:
        if not loco[i]:
            i += 1
            continue
        foot = "left" if phases[i] % 1.0 < 0.5 else "right"
        j = i
        while j < k and loco[j] and (("left" if phases[j] % 1.0 < 0.5 else "right") == foot):
            j += 1
        segments.append((foot, i, j))
        i = j
    return segments


def predict_pose_procedural(ctx: PredictorContext, goal: GoalProposal,
                            route: RoutePrediction, body: BodyModel,
                            cfg: PlannerConfig, params: PoseParams | None = None,
                            k: int = 60) -> MotionSeq:
    """States from speed/goal rules, phase by step-rate summation, pose codes
    from state-mixed bases plus the foot-planting solver."""
    if params is None:
        params = default_pose_params()
    if route.t.shape[0] != k:
        raise ValueError(f"route length {route.t.shape[0]} != k {k}")
    dt = 1.0 / ctx.fps
    deltas = np.diff(np.vstack([ctx.route0.t[None, :], route.t]), axis=0)
    speed = np.linalg.norm(deltas[:, :2], axis=1) / dt
    near_goal = np.hypot(route.t[:, 0] - goal.t_g[0], route.t[:, 1] - goal.t_g[1]) < cfg.epsilon

    raw_states = np.empty(k, dtype=np.int64)
    for i in range(k):
        if speed[i] > SPEED_LOCO:
            raw_states[i] = AnchorState.LOCOMOTION
        elif near_goal[i] and goal.target_state == AnchorState.SITTING:
            raw_states[i] = AnchorState.SITTING
        elif near_goal[i] and goal.target_state == AnchorState.LYING:
            raw_states[i] = AnchorState.LYING
        else:
            raw_states[i] = AnchorState.IDLE
    loco = raw_states == AnchorState.LOCOMOTION

    omega = STEP_RATE * np.linalg.norm(deltas[:, :2], axis=1)
    phases = np.zeros(k)
    carry = ctx.phase0 if ctx.state0 == AnchorState.LOCOMOTION else 0.0
    for i in range(k):
        if loco[i]:
            carry = (carry + omega[i]) % 1.0
            phases[i] = carry
        else:
            carry = 0.0

    one_hot = np.zeros((k, N_STATES))
    one_hot[np.arange(k), raw_states] = 1.0
    states = _smooth_states(one_hot)

    theta = states @ params.bases  # (k, 56)
    osc = states[:, AnchorState.LOCOMOTION] * params.amplitude * np.sin(2.0 * math.pi * phases)
    theta += osc[:, None] * params.gait[None, :]
    theta_p = theta[:, :THETA_P_DIM].copy()
    theta_h = theta[:, THETA_P_DIM:].copy()

    _solve_feet(ctx, route, body, theta_p, loco, phases)
    return MotionSeq(t=route.t.copy(), r=route.r.copy(), theta_p=theta_p,
                     theta_h=theta_h, states=states, phases=phases)


def _foot_rest(body: BodyModel, side: str) -> np.ndarray:
    return body.rest_joints[body.marker_index(f"{side}_foot")]


def _rigid_foot(body: BodyModel, t: np.ndarray, rot: np.ndarray, side: str) -> np.ndarray:
    return t + rot @ _foot_rest(body, side)


def _solve_feet(ctx: PredictorContext, route: RoutePrediction, body: BodyModel,
                theta_p: np.ndarray, loco: np.ndarray, phases: np.ndarray) -> None:
    """Fill theta_p[:, 0:6] so the stance foot stays planted while the swing
    foot advances to its next footfall (world targets solved through the
    body-frame foot axes). Non-locomotion frames leave the feet rigid."""
    from .body import FOOT_AXIS_SCALE

    k = route.t.shape[0]
    if not loco.any():
        theta_p[:, :6] = 0.0
        return
    rots = [rot6d_to_matrix(route.r[i]) for i in range(k)]
    rigid = {
        "left": np.vstack([_rigid_foot(body, route.t[i], rots[i], "left") for i in range(k)]),
        "right": np.vstack([_rigid_foot(body, route.t[i], rots[i], "right") for i in range(k)]),
    }
    rot0 = rot6d_to_matrix(ctx.route0.r)
    start_world = {
        side: _rigid_foot(body, ctx.route0.t, rot0, side)
        + rot0 @ (FOOT_AXIS_SCALE * ctx.pose0.theta_p[off : off + 3])
        for side, off in (("left", 0), ("right", 3))
    }
    segments = _stance_segments(loco, phases)
    targets = {side: np.array(rigid[side]) for side in ("left", "right")}  # default: rigid

    by_foot = {"left": [], "right": []}
    for foot, i, j in segments:
        by_foot[foot].append((i, j))
    for side in ("left", "right"):
        segs = by_foot[side]
        prev_end = 0
        prev_pos = start_world[side]
        for idx, (i, j) in enumerate(segs):
            # a stance continuing from the current frame keeps the foot where
            # it already is; later stances plant at the body-rigid position
            footfall = start_world[side] if i == 0 else rigid[side][i]
            # swing from prev_pos into this footfall across [prev_end, i)
            span = i - prev_end
            for f in range(prev_end, i):
                if not loco[f]:
                    continue
                prog = (f - prev_end + 1) / max(span, 1)
                pos = (1.0 - prog) * prev_pos + prog * footfall
                pos = pos.copy()
                pos[2] += SWING_LIFT * math.sin(math.pi * min(prog, 1.0))
                targets[side][f] = pos
            targets[side][i:j] = footfall
            prev_end = j
            prev_pos = footfall
        # after the last stance: ease back to rigid tracking (handled by default)

    for i in range(k):
        if not loco[i]:
            theta_p[i, :6] = 0.0
            continue
        rot_t = rots[i].T
        for side, off in (("left", 0), ("right", 3)):
            delta_world = targets[side][i] - rigid[side][i]
            theta_p[i, off : off + 3] = (rot_t @ delta_world) / FOOT_AXIS_SCALE


# ---------------------------------------------------------------------------
# Predictor front-ends used by the engine


@dataclass
class ProceduralPredictor:
    """Deterministic reference predictor (no learned weights)."""

    planner_cfg: PlannerConfig
    mix: GoalStateMix
    body: BodyModel
    pose_params: PoseParams = field(default_factory=default_pose_params)

    def propose_goal(self, ctx: PredictorContext, rng: np.random.Generator) -> GoalProposal:
        return propose_goal_procedural(ctx, self.planner_cfg, self.mix, rng)

    def predict(self, ctx: PredictorContext, goal: GoalProposal, k: int,
                rng: np.random.Generator, path: list | None = None) -> tuple[MotionSeq, list]:
        route = predict_route_procedural(ctx, goal, self.planner_cfg, k=k, path=path)
        motion = predict_pose_procedural(ctx, goal, route, self.body, self.planner_cfg,
                                         self.pose_params, k=k)
        return motion, route.path


# ---------------------------------------------------------------------------
# Network-backed variants


@dataclass
class FeatureBundle:
    f_p: np.ndarray
    f_a: np.ndarray
    f_b: np.ndarray

    @property
    def f_s(self) -> np.ndarray:
        return nn.assemble_scene_feature(self.f_p, self.f_a, self.f_b)


START_VEC_DIM = 6 + THETA_P_DIM + THETA_H_DIM + N_STATES + 1  # 67
EXPERT_IN_DIM = 64 + POSE_LATENT_DIM + 2 + THETA_P_DIM + THETA_H_DIM  # 186


@dataclass
class NetworkBundle:
    """All forward nets of the network predictor, JSON round-trippable."""

    point_net: nn.NetworkSpec
    spherical_net: nn.NetworkSpec
    bev_net: nn.NetworkSpec
    goal_cond: nn.NetworkSpec     # f_s ++ start vec -> 128 condition
    goal_decoder: nn.NetworkSpec  # z_g ++ condition -> 9 (goal route frame)
    move_lstm: nn.LstmSpec        # route frames (9) -> moving feature 256
    route_mlp: nn.NetworkSpec     # f_s ++ f_g ++ f_sp -> k * 9
    route_feat: nn.NetworkSpec    # k * 9 -> 64 route feature
    pose_cond: nn.NetworkSpec     # f_s ++ f_g ++ f_sp ++ f_r -> 128 condition
    route_lstm: nn.LstmSpec       # per-frame route query features (64)
    state_head: nn.NetworkSpec    # h_i ++ condition -> 4 logits
    phase_head: nn.NetworkSpec    # rel transform ++ h_i -> 1 phase step
    expert_w: np.ndarray          # (4, 56, EXPERT_IN_DIM)
    expert_b: np.ndarray          # (4, 56)
    horizon: int = 60

    def to_json(self) -> dict:
        doc = {"horizon": self.horizon}
        for name in ("point_net", "spherical_net", "bev_net", "goal_cond", "goal_decoder",
                     "route_mlp", "route_feat", "pose_cond", "state_head", "phase_head"):
            doc[name] = getattr(self, name).to_json()
        for name in ("move_lstm", "route_lstm"):
            doc[name] = getattr(self, name).to_json()
        doc["expert_w"] = {"shape": list(self.expert_w.shape), "data": self.expert_w.ravel().tolist()}
        doc["expert_b"] = {"shape": list(self.expert_b.shape), "data": self.expert_b.ravel().tolist()}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "NetworkBundle":
        kw = {"horizon": int(doc.get("horizon", 60))}
        for name in ("point_net", "spherical_net", "bev_net", "goal_cond", "goal_decoder",
                     "route_mlp", "route_feat", "pose_cond", "state_head", "phase_head"):
            kw[name] = nn.NetworkSpec.from_json(doc[name])
        for name in ("move_lstm", "route_lstm"):
            kw[name] = nn.LstmSpec.from_json(doc[name])
        for name in ("expert_w", "expert_b"):
            kw[name] = np.asarray(doc[name]["data"], dtype=np.float64).reshape(doc[name]["shape"])
        return cls(**kw)


def make_default_bundle(seed: int = 7, horizon: int = 60) -> NetworkBundle:
    """Seeded random weights with the documented wiring and dimensions."""
    def rng_for(tag):
        return np.random.default_rng([seed, tag])

    def mlp(tag, dims):
        rng = rng_for(tag)
        layers = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            layers.append(nn._rng_linear(rng, b, a))
            if i < len(dims) - 2:
                layers.append(nn.Layer("relu"))
        return nn.NetworkSpec(layers=layers, name=f"net{tag}")

    rng_e = rng_for(99)
    return NetworkBundle(
        point_net=nn.default_point_net(seed * 1000 + 1),
        spherical_net=nn.default_spherical_net(seed * 1000 + 2),
        bev_net=nn.default_bev_net(seed * 1000 + 3),
        goal_cond=mlp(10, [nn.F_S_DIM + START_VEC_DIM, 256, GOAL_COND_DIM]),
        goal_decoder=mlp(11, [GOAL_LATENT_DIM + GOAL_COND_DIM, 128, 64, 9]),
        move_lstm=nn.default_lstm(seed * 1000 + 4, 9, nn.F_G_DIM),
        route_mlp=mlp(12, [nn.F_S_DIM + nn.F_G_DIM + nn.F_SP_DIM, 512, horizon * 9]),
        route_feat=mlp(13, [horizon * 9, 128, nn.F_R_DIM]),
        pose_cond=mlp(14, [nn.F_S_DIM + nn.F_G_DIM + nn.F_SP_DIM + nn.F_R_DIM, 256, 128]),
        route_lstm=nn.default_lstm(seed * 1000 + 5, 9, 64),
        state_head=mlp(15, [64 + 128, 64, N_STATES]),
        phase_head=mlp(16, [9 + 64, 32, 1]),
        expert_w=rng_e.standard_normal((N_STATES, THETA_P_DIM + THETA_H_DIM, EXPERT_IN_DIM))
        / math.sqrt(EXPERT_IN_DIM),
        expert_b=rng_e.standard_normal((N_STATES, THETA_P_DIM + THETA_H_DIM)) * 0.01,
        horizon=horizon,
    )


def compute_features(ctx: PredictorContext, bundle: NetworkBundle,
                     sample_count: int = 1024) -> FeatureBundle:
    """Scene features from the context maps and a farthest-point subset of
    the local cloud (root-relative coordinates)."""
    root = ctx.route0.t
    idx = ctx.snapshot.k_nearest_indices(root, min(2500, len(ctx.snapshot)))
    local = ctx.snapshot.points[idx] - root
    sampled = nn.farthest_point_sample(local, sample_count)
    return FeatureBundle(
        f_p=nn.encode_points(sampled, bundle.point_net),
        f_a=nn.encode_spherical(ctx.spherical, bundle.spherical_net),
        f_b=nn.encode_bev(ctx.bev, bundle.bev_net),
    )


def _ensure_features(ctx: PredictorContext, bundle: NetworkBundle) -> FeatureBundle:
    if ctx.features is None:
        ctx.features = compute_features(ctx, bundle)
    return ctx.features


def _start_vec(ctx: PredictorContext) -> np.ndarray:
    probs = one_hot_state(ctx.state0) if ctx.state0 != AnchorState.INVALID \
        else np.full(N_STATES, 1.0 / N_STATES)
    return np.concatenate([ctx.route0.r, ctx.pose0.theta_p, ctx.pose0.theta_h,
                           probs, [ctx.phase0]])


def _route_vec(t_rel: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.concatenate([t_rel, r])


def _sanitize_rot6d(r: np.ndarray) -> np.ndarray:
    out = np.array(r, dtype=np.float64)
    bad = ~rot6d_valid_mask(out)
    out[bad] = IDENTITY_ROT6D
    return out


def propose_goal_network(ctx: PredictorContext, bundle: NetworkBundle, cfg: PlannerConfig,
                         mix: GoalStateMix, rng: np.random.Generator,
                         z: np.ndarray | None = None) -> GoalProposal:
    """CVAE-style goal: decode (z, condition) into a goal hint, then snap it
    through the same filter/sampling machinery as the procedural path."""
    feats = _ensure_features(ctx, bundle)
    cond = nn.forward(bundle.goal_cond, np.concatenate([feats.f_s, _start_vec(ctx)]))
    state, filt = choose_goal_state(ctx.graph, cfg, mix, rng)
    if z is None:
        z = rng.standard_normal(GOAL_LATENT_DIM)
    out = nn.forward(bundle.goal_decoder, np.concatenate([z, cond]))
    t_hat = ctx.route0.t[:2] + out[:2]
    t_g, cell = sample_goal(t_hat, filt, ctx.graph, cfg, rng)
    path = plan_path(ctx.graph, ctx.graph.cell_of(ctx.route0.t[:2]), cell)
    if path:
        r_g = orient_goal(path, ctx.graph)
    else:
        r_g = _sanitize_rot6d(out[None, 3:])[0]
    return GoalProposal(t_g=t_g, r_g=r_g, target_state=state, cell=cell)


def _moving_feature(ctx: PredictorContext, goal: GoalProposal, bundle: NetworkBundle) -> np.ndarray:
    seq = np.vstack([
        _route_vec(np.zeros(3), ctx.route0.r),
        _route_vec(goal.t_g - ctx.route0.t, goal.r_g),
    ])
    f_g, _ = nn.lstm_forward(bundle.move_lstm, seq)
    return f_g


def predict_route_network(ctx: PredictorContext, goal: GoalProposal, bundle: NetworkBundle,
                          k: int = 60) -> RoutePrediction:
    feats = _ensure_features(ctx, bundle)
    if k != bundle.horizon:
        raise nn.NetworkConfigError(f"bundle horizon {bundle.horizon} != requested k {k}")
    f_g = _moving_feature(ctx, goal, bundle)
    f_sp = np.concatenate([ctx.pose0.theta_p, ctx.pose0.theta_h])
    out = nn.forward(bundle.route_mlp, np.concatenate([feats.f_s, f_g, f_sp])).reshape(k, 9)
    t = ctx.route0.t[None, :] + out[:, :3]
    r = _sanitize_rot6d(out[:, 3:])
    return RoutePrediction(t=t, r=r, path=[])


def predict_pose_network(ctx: PredictorContext, goal: GoalProposal, route: RoutePrediction,
                         bundle: NetworkBundle, rng: np.random.Generator,
                         k: int = 60, z: np.ndarray | None = None) -> MotionSeq:
    """Decoder forward: per-frame state probabilities (softmax head), phase
    steps accumulated by cumulative summation, pose codes from the
    state-weighted mixture of expert parameter sets."""
    feats = _ensure_features(ctx, bundle)
    f_g = _moving_feature(ctx, goal, bundle)
    f_sp = np.concatenate([ctx.pose0.theta_p, ctx.pose0.theta_h])
    rel = route.t - ctx.route0.t[None, :]
    route_flat = np.concatenate([rel, route.r], axis=1).reshape(-1)
    f_r = nn.forward(bundle.route_feat, route_flat)
    cond = nn.forward(bundle.pose_cond, np.concatenate([feats.f_s, f_g, f_sp, f_r]))
    if z is None:
        z = rng.standard_normal(POSE_LATENT_DIM)

    frames = np.concatenate([rel, route.r], axis=1)  # (k, 9)
    _, hs = nn.lstm_forward(bundle.route_lstm, frames)
    logits = nn.forward(bundle.state_head, np.concatenate([hs, np.tile(cond, (k, 1))], axis=1))
    logits -= logits.max(axis=1, keepdims=True)
    states = np.exp(logits)
    states /= states.sum(axis=1, keepdims=True)

    prev = np.vstack([_route_vec(np.zeros(3), ctx.route0.r)[None, :], frames[:-1]])
    rel_step = frames - prev
    omega = nn.forward(bundle.phase_head, np.concatenate([rel_step, hs], axis=1))[:, 0]
    loco = states.argmax(axis=1) == AnchorState.LOCOMOTION
    phases = np.zeros(k)
    carry = ctx.phase0 if ctx.state0 == AnchorState.LOCOMOTION else 0.0
    for i in range(k):
        if loco[i]:
            carry = (carry + omega[i]) % 1.0
            phases[i] = carry
        else:
            carry = 0.0

    trig = np.column_stack([np.sin(2 * math.pi * phases), np.cos(2 * math.pi * phases)])
    inp = np.concatenate([hs, np.tile(z, (k, 1)), trig,
                          np.tile(np.concatenate([ctx.pose0.theta_p, ctx.pose0.theta_h]), (k, 1))],
                         axis=1)  # (k, EXPERT_IN_DIM)
    w_mix = np.einsum("fc,cij->fij", states, bundle.expert_w)
    b_mix = states @ bundle.expert_b.reshape(N_STATES, -1)
    theta = np.einsum("fij,fj->fi", w_mix, inp) + b_mix
    return MotionSeq(t=route.t.copy(), r=route.r.copy(),
                     theta_p=theta[:, :THETA_P_DIM], theta_h=theta[:, THETA_P_DIM:],
                     states=states, phases=phases)


@dataclass
class NetworkPredictor:
    """Network-backed predictor: same interfaces, seeded forward weights."""

    planner_cfg: PlannerConfig
    mix: GoalStateMix
    body: BodyModel
    bundle: NetworkBundle

    def propose_goal(self, ctx: PredictorContext, rng: np.random.Generator) -> GoalProposal:
        return propose_goal_network(ctx, self.bundle, self.planner_cfg, self.mix, rng)

    def predict(self, ctx: PredictorContext, goal: GoalProposal, k: int,
                rng: np.random.Generator, path: list | None = None) -> tuple[MotionSeq, list]:
        route = predict_route_network(ctx, goal, self.bundle, k=k)
        motion = predict_pose_network(ctx, goal, route, self.bundle, rng, k=k)
        return motion, path if path else []
