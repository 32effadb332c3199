"""Frame-loop orchestration: snapshot, perceive, (re)sample goals, predict a
k-frame hypothesis, fold it into the latent plan, emit one execution frame.

Three modes share the machinery:
  demos            - full iterative update (blend + spectrum fusion + yaw
                     correction + no-skating) every frame
  concat_baseline  - predict every k frames, concatenate the hypotheses
  per_frame_baseline - horizon-1 prediction each frame, no latent plan

Determinism: one numpy Generator seeded from the config drives every draw;
draws happen per frame, per character in declaration order (goal state,
forward distance, goal cell, then any predictor latents). Characters step in
lockstep and see each other through ~200 points sampled along the other
bodies' bones at the previous frame's pose.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .blending import BlendConfig, blend_update, lowpass_blend, no_skate, \
    rebuild_trajectory, yaw_correction
from .body import (AnchorState, BodyModel, ContactThresholds, MotionSeq, PoseCode,
                   RouteFrame, default_body_model, densify_body, joints_batch,
                   one_hot_state, yaw_to_rot6d)
from .perception import PerceptionConfig, perceive
from .planner import PlannerConfig, build_graph, goal_reached, plan_path
from .predictor import (GoalProposal, GoalStateMix, NetworkPredictor, NowhereToGo,
                        PredictorContext, ProceduralPredictor, UnreachableGoal,
                        make_default_bundle, NetworkBundle)
from .scene import DynamicScene, snapshot

MODES = ("demos", "concat_baseline", "per_frame_baseline")


@dataclass(frozen=True)
class CharacterInit:
    position: tuple = (0.0, 0.0, 0.9)
    yaw: float = 0.0


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "procedural"  # "procedural" | "network"
    weights_path: str | None = None
    seed: int = 7


@dataclass
class EngineConfig:
    frames: int = 300
    seed: int = 0
    mode: str = "demos"
    characters: list = field(default_factory=lambda: [CharacterInit()])
    blend: BlendConfig = field(default_factory=BlendConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    contact: ContactThresholds = field(default_factory=ContactThresholds)
    goal_mix: GoalStateMix = field(default_factory=GoalStateMix)
    predictor: PredictorSpec = field(default_factory=PredictorSpec)
    goal_retries: int = 5

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.characters:
            raise ValueError("at least one character required")


@dataclass
class CharacterState:
    route: RouteFrame
    pose: PoseCode
    state_probs: np.ndarray
    phase: float
    latent: MotionSeq | None = None
    goal: GoalProposal | None = None
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    buffer: MotionSeq | None = None  # concat baseline block
    buffer_at: int = -1
    emitted: list = field(default_factory=list)  # per-frame emitted tuples


@dataclass
class RunResult:
    motions: list  # MotionSeq per character
    diagnostics: list  # one dict per (frame, character)
    warnings: list


def build_predictor(cfg: EngineConfig, body: BodyModel):
    spec = cfg.predictor
    if spec.kind == "procedural":
        return ProceduralPredictor(planner_cfg=cfg.planner, mix=cfg.goal_mix, body=body)
    if spec.kind == "network":
        if spec.weights_path:
            import json

            with open(spec.weights_path, "r", encoding="utf-8") as fh:
                bundle = NetworkBundle.from_json(json.load(fh))
        else:
            bundle = make_default_bundle(spec.seed, horizon=cfg.blend.k)
        return NetworkPredictor(planner_cfg=cfg.planner, mix=cfg.goal_mix, body=body,
                                bundle=bundle)
    raise ValueError(f"unknown predictor kind {spec.kind!r}")


def _init_character(init: CharacterInit) -> CharacterState:
    return CharacterState(
        route=RouteFrame(np.asarray(init.position, dtype=np.float64), yaw_to_rot6d(init.yaw)),
        pose=PoseCode.zero(),
        state_probs=one_hot_state(AnchorState.IDLE, smoothing=0.1),
        phase=0.0,
    )


def _injected_clouds(chars, body: BodyModel, skip: int) -> np.ndarray | None:
    """Other characters' bodies as scene points (bone-sampled)."""
    parts = []
    for idx, ch in enumerate(chars):
        if idx == skip:
            continue
        joints = joints_batch(body, ch.route.t[None], ch.route.r[None],
                              ch.pose.theta_p[None])[0]
        parts.append(densify_body(joints))
    if not parts:
        return None
    return np.vstack(parts)


def _resample_path_velocities(poly: np.ndarray, k: int) -> np.ndarray:
    """k horizontal velocity samples of the planned polyline, arc-length
    resampled so the whole path spans the plan horizon."""
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    total = float(seg.sum())
    if total <= 1e-12:
        return np.zeros((k, 2))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, total, k + 1)
    x = np.interp(s, cum, poly[:, 0])
    y = np.interp(s, cum, poly[:, 1])
    pts = np.column_stack([x, y])
    return np.diff(pts, axis=0)


def _min_actor_clearance(world: DynamicScene, frame: int, pos: np.ndarray) -> float:
    """Horizontal distance from pos to the nearest moving-actor point."""
    best = math.inf
    for actor in world.actors:
        pts = actor.points_at(frame)
        if pts.shape[0]:
            d = np.hypot(pts[:, 0] - pos[0], pts[:, 1] - pos[1]).min()
            best = min(best, float(d))
    return best


class Engine:
    """Steps a set of characters through a dynamic scene."""

    def __init__(self, world: DynamicScene, cfg: EngineConfig, body: BodyModel | None = None):
        self.world = world
        self.cfg = cfg
        self.body = body if body is not None else default_body_model()
        self.predictor = build_predictor(cfg, self.body)
        self.rng = np.random.default_rng(cfg.seed)
        self.chars = [_init_character(c) for c in cfg.characters]
        self.warnings: list[str] = []
        self.diagnostics: list[dict] = []

    # -- context assembly ---------------------------------------------------

    def _context(self, ch: CharacterState, ci: int, frame: int) -> PredictorContext:
        t0 = time.perf_counter()
        extra = _injected_clouds(self.chars, self.body, skip=ci)
        snap = snapshot(self.world, frame, extra_points=extra)
        t1 = time.perf_counter()
        sph, bev = perceive(snap, ch.route.t, self.cfg.perception)
        t2 = time.perf_counter()
        graph = build_graph(bev, self.cfg.planner)
        t3 = time.perf_counter()
        ctx = PredictorContext(
            snapshot=snap, route0=ch.route, pose0=ch.pose,
            state0=AnchorState(int(np.argmax(ch.state_probs))), phase0=ch.phase,
            spherical=sph, bev=bev, graph=graph, frame=frame,
            velocity=ch.velocity.copy(), fps=self.world.frame_rate,
        )
        self._times = {"snapshot_ms": (t1 - t0) * 1e3, "perceive_ms": (t2 - t1) * 1e3,
                       "plan_ms": (t3 - t2) * 1e3}
        return ctx

    # -- goal management + prediction ----------------------------------------

    def _predict(self, ctx: PredictorContext, ch: CharacterState, k: int
                 ) -> tuple[GoalProposal | None, MotionSeq, list, bool, str | None]:
        """Returns (goal, hypothesis, planned path, new_goal, warning)."""
        goal = ch.goal
        if goal is not None and goal_reached(ch.route.t, goal.t_g, self.cfg.planner.epsilon):
            goal = None
        new_goal = False
        warning = None
        for _ in range(self.cfg.goal_retries):
            try:
                if goal is None:
                    goal = self.predictor.propose_goal(ctx, self.rng)
                    new_goal = True
                path = plan_path(ctx.graph, ctx.graph.cell_of(ctx.route0.t[:2]), goal.cell)
                hyp, tstar = self.predictor.predict(ctx, goal, k, self.rng,
                                                    path=path if path else None)
                return goal, hyp, tstar, new_goal, warning
            except UnreachableGoal as exc:
                warning = str(exc)
                goal = None
            except NowhereToGo as exc:
                warning = str(exc)
                break
        hold = MotionSeq.hold(ch.route, ch.pose, ch.state_probs, ch.phase, k)
        return None, hold, [], new_goal, warning or "goal retries exhausted; holding"

    # -- per-mode stepping ----------------------------------------------------

    def _emit(self, ch: CharacterState, motion: MotionSeq, frame_idx: int) -> None:
        rf, pose = motion.frame(0)
        fps = self.world.frame_rate
        ch.velocity = (rf.t - ch.route.t) * fps
        ch.route = rf
        ch.pose = pose
        ch.state_probs = motion.states[0].copy()
        ch.phase = float(motion.phases[0])
        ch.emitted.append((rf.t, rf.r, pose.theta_p, pose.theta_h,
                           motion.states[0].copy(), float(motion.phases[0])))

    def _step_demos(self, ch: CharacterState, ci: int, frame: int) -> dict:
        cfg = self.cfg
        ctx = self._context(ch, ci, frame)
        t0 = time.perf_counter()
        goal, hyp, tstar, new_goal, warning = self._predict(ctx, ch, cfg.blend.k)
        t1 = time.perf_counter()
        if ch.latent is None:
            latent = hyp
        else:
            latent = blend_update(ch.latent, hyp, cfg.blend)
            prev_xy = ch.route.t[:2]
            if tstar:
                poly = np.vstack([prev_xy] + [ctx.graph.center_of(c) for c in tstar])
                v_star = _resample_path_velocities(poly, cfg.blend.k)
                v_dd = np.diff(np.vstack([prev_xy[None, :], latent.t[:, :2]]), axis=0)
                v_bar = lowpass_blend(v_star, v_dd, cfg.blend)
                desired = rebuild_trajectory(v_bar, prev_xy)
                latent = yaw_correction(latent, desired, cfg.blend)
            latent = no_skate((ch.route, ch.pose), latent, self.body, cfg.blend)
        t2 = time.perf_counter()
        ch.goal = goal
        ch.latent = latent
        self._emit(ch, latent, frame)
        if warning:
            self.warnings.append(f"frame {frame} char {ci}: {warning}")
        return {
            "predict_ms": (t1 - t0) * 1e3, "blend_ms": (t2 - t1) * 1e3,
            "goal_event": int(new_goal), "warning": warning or "",
            "goal": goal,
        }

    def _step_concat(self, ch: CharacterState, ci: int, frame: int) -> dict:
        cfg = self.cfg
        k = cfg.blend.k
        info = {"predict_ms": 0.0, "blend_ms": 0.0, "goal_event": 0, "warning": "", "goal": ch.goal}
        if ch.buffer is None or frame - ch.buffer_at >= k:
            ctx = self._context(ch, ci, frame)
            t0 = time.perf_counter()
            goal, hyp, _, new_goal, warning = self._predict(ctx, ch, k)
            info.update(predict_ms=(time.perf_counter() - t0) * 1e3,
                        goal_event=int(new_goal), warning=warning or "", goal=goal)
            ch.goal = goal
            ch.buffer = hyp
            ch.buffer_at = frame
            if warning:
                self.warnings.append(f"frame {frame} char {ci}: {warning}")
        offset = frame - ch.buffer_at
        sub = MotionSeq(
            t=ch.buffer.t[offset : offset + 1], r=ch.buffer.r[offset : offset + 1],
            theta_p=ch.buffer.theta_p[offset : offset + 1],
            theta_h=ch.buffer.theta_h[offset : offset + 1],
            states=ch.buffer.states[offset : offset + 1],
            phases=ch.buffer.phases[offset : offset + 1],
        )
        self._emit(ch, sub, frame)
        return info

    def _step_per_frame(self, ch: CharacterState, ci: int, frame: int) -> dict:
        ctx = self._context(ch, ci, frame)
        t0 = time.perf_counter()
        horizon = 1
        if isinstance(self.predictor, NetworkPredictor):
            horizon = self.predictor.bundle.horizon
        goal, hyp, _, new_goal, warning = self._predict(ctx, ch, horizon)
        predict_ms = (time.perf_counter() - t0) * 1e3
        ch.goal = goal
        first = MotionSeq(t=hyp.t[:1], r=hyp.r[:1], theta_p=hyp.theta_p[:1],
                          theta_h=hyp.theta_h[:1], states=hyp.states[:1], phases=hyp.phases[:1])
        self._emit(ch, first, frame)
        if warning:
            self.warnings.append(f"frame {frame} char {ci}: {warning}")
        return {"predict_ms": predict_ms, "blend_ms": 0.0, "goal_event": int(new_goal),
                "warning": warning or "", "goal": goal}

    # -- driver ---------------------------------------------------------------

    def step_all(self, frame: int) -> None:
        step_fn = {"demos": self._step_demos, "concat_baseline": self._step_concat,
                   "per_frame_baseline": self._step_per_frame}[self.cfg.mode]
        for ci, ch in enumerate(self.chars):
            t0 = time.perf_counter()
            info = step_fn(ch, ci, frame)
            total_ms = (time.perf_counter() - t0) * 1e3
            goal = info.pop("goal", None)
            row = {
                "frame": frame, "char": ci,
                "x": float(ch.route.t[0]), "y": float(ch.route.t[1]), "z": float(ch.route.t[2]),
                "speed": float(np.linalg.norm(ch.velocity[:2])),
                "state": int(np.argmax(ch.state_probs)),
                "phase": ch.phase,
                "goal_x": float(goal.t_g[0]) if goal else math.nan,
                "goal_y": float(goal.t_g[1]) if goal else math.nan,
                "goal_state": goal.target_state.name if goal else "",
                "clearance": _min_actor_clearance(self.world, frame, ch.route.t),
                "step_ms": total_ms,
                **self._times,
                **info,
            }
            self.diagnostics.append(row)

    def run(self) -> RunResult:
        for frame in range(self.cfg.frames):
            self.step_all(frame)
        motions = []
        for ch in self.chars:
            t, r, tp, th, st, ph = zip(*ch.emitted)
            motions.append(MotionSeq(np.stack(t), np.stack(r), np.stack(tp),
                                     np.stack(th), np.stack(st), np.array(ph)))
        return RunResult(motions=motions, diagnostics=self.diagnostics,
                         warnings=self.warnings)


def run(world: DynamicScene, cfg: EngineConfig, body: BodyModel | None = None) -> RunResult:
    """Run the configured mode for cfg.frames frames."""
    return Engine(world, cfg, body).run()


def run_baseline_concat(world: DynamicScene, cfg: EngineConfig,
                        body: BodyModel | None = None) -> RunResult:
    cfg2 = _with_mode(cfg, "concat_baseline")
    return Engine(world, cfg2, body).run()


def run_baseline_per_frame(world: DynamicScene, cfg: EngineConfig,
                           body: BodyModel | None = None) -> RunResult:
    cfg2 = _with_mode(cfg, "per_frame_baseline")
    return Engine(world, cfg2, body).run()


def _with_mode(cfg: EngineConfig, mode: str) -> EngineConfig:
    return EngineConfig(
        frames=cfg.frames, seed=cfg.seed, mode=mode, characters=list(cfg.characters),
        blend=cfg.blend, perception=cfg.perception, planner=cfg.planner,
        contact=cfg.contact, goal_mix=cfg.goal_mix, predictor=cfg.predictor,
        goal_retries=cfg.goal_retries,
    )
