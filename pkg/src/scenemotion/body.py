"""Human state representation and anchor-based annotation.

A body frame is a root translation plus a 6D continuous rotation; poses are
compact latent codes decoded by a simplified 21-joint linear body model.
Action states (idle / locomotion / sitting / lying) are derived from which
contact markers are *anchored*: in scene contact and not moving.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scene import SceneSnapshot

N_JOINTS = 21
THETA_P_DIM = 32
THETA_H_DIM = 24

JOINT_NAMES = [
    "pelvis", "spine", "chest", "neck", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle", "l_foot",
    "r_hip", "r_knee", "r_ankle", "r_foot",
    "gluteus", "back",
]

MARKER_NAMES = ["left_foot", "right_foot", "gluteus", "back"]

# joint index pairs used to densify a body into scene points for other agents
BONES = [
    (0, 1), (1, 2), (2, 3), (3, 4),
    (2, 5), (5, 6), (6, 7),
    (2, 8), (8, 9), (9, 10),
    (0, 11), (11, 12), (12, 13), (13, 14),
    (0, 15), (15, 16), (16, 17), (17, 18),
    (0, 19), (1, 20),
]


class AnchorState(enum.IntEnum):
    IDLE = 0
    LOCOMOTION = 1
    SITTING = 2
    LYING = 3
    INVALID = 4


N_STATES = 4  # probability vectors cover the four valid states


@dataclass(frozen=True)
class RouteFrame:
    """Root translation (m) and orientation as a 6D continuous rotation."""

    t: np.ndarray  # (3,)
    r: np.ndarray  # (6,)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        r = np.asarray(self.r, dtype=np.float64).reshape(6)
        if not (np.isfinite(t).all() and np.isfinite(r).all()):
            raise ValueError("RouteFrame requires finite values")
        if np.linalg.norm(r[:3]) <= 1e-8:
            raise ValueError("degenerate 6D rotation")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class PoseCode:
    """Compact body/hand pose coordinates in an abstract latent space."""

    theta_p: np.ndarray  # (32,)
    theta_h: np.ndarray  # (24,)

    def __post_init__(self):
        tp = np.asarray(self.theta_p, dtype=np.float64).reshape(THETA_P_DIM)
        th = np.asarray(self.theta_h, dtype=np.float64).reshape(THETA_H_DIM)
        if not (np.isfinite(tp).all() and np.isfinite(th).all()):
            raise ValueError("PoseCode requires finite values")
        object.__setattr__(self, "theta_p", tp)
        object.__setattr__(self, "theta_h", th)

    @classmethod
    def zero(cls) -> "PoseCode":
        return cls(np.zeros(THETA_P_DIM), np.zeros(THETA_H_DIM))


@dataclass(frozen=True)
class ContactThresholds:
    """Contact/static thresholds for anchor detection (configurable)."""

    radius: float = 0.15  # horizontal support-search radius, m
    distance: float = 0.05  # max vertical gap for contact, m
    movement: float = 0.01  # max marker displacement per frame, m


IDENTITY_ROT6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rot6d_to_matrix(r) -> np.ndarray:
    """Gram-Schmidt a 6-vector (two column seeds) into a rotation matrix."""
    r = np.asarray(r, dtype=np.float64).reshape(6)
    a, b = r[:3], r[3:]
    na = np.linalg.norm(a)
    if na <= 1e-8:
        raise ValueError("degenerate 6D rotation")
    c1 = a / na
    b_perp = b - (b @ c1) * c1
    nb = np.linalg.norm(b_perp)
    if nb <= 1e-8:
        raise ValueError("degenerate 6D rotation")
    c2 = b_perp / nb
    c3 = np.cross(c1, c2)
    return np.column_stack([c1, c2, c3])


def matrix_to_rot6d(mat) -> np.ndarray:
    """Inverse embedding: the rotation's first two columns."""
    mat = np.asarray(mat, dtype=np.float64).reshape(3, 3)
    return np.concatenate([mat[:, 0], mat[:, 1]])


def yaw_to_rot6d(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c, s, 0.0, -s, c, 0.0])


def rot6d_valid_mask(r: np.ndarray) -> np.ndarray:
    """Rows of (n, 6) that Gram-Schmidt to a proper rotation."""
    r = np.asarray(r, dtype=np.float64).reshape(-1, 6)
    a, b = r[:, :3], r[:, 3:]
    na = np.linalg.norm(a, axis=1)
    ok = na > 1e-8
    c1 = np.zeros_like(a)
    c1[ok] = a[ok] / na[ok, None]
    b_perp = b - np.einsum("ij,ij->i", b, c1)[:, None] * c1
    return ok & (np.linalg.norm(b_perp, axis=1) > 1e-8)


@dataclass(frozen=True)
class BodyModel:
    """21-joint linear body: rest offsets + pose displacement basis.

    joints = R @ (rest + basis . theta_p) + t. The default model keeps the
    four contact markers out of the random basis directions: theta_p[0:3]
    and theta_p[3:6] displace the left/right foot along world-aligned axes
    (0.3 m per unit), gluteus/back never move relative to the root, and the
    remaining 26 basis columns are seeded random orthonormal directions over
    the other joints. Contact states therefore follow from the route and the
    explicitly controlled feet.
    """

    rest_joints: np.ndarray  # (21, 3)
    pose_basis: np.ndarray  # (63, 32), row-major over (joint, axis)
    marker_map: dict = field(default_factory=dict)

    def __post_init__(self):
        rest = np.asarray(self.rest_joints, dtype=np.float64).reshape(N_JOINTS, 3)
        basis = np.asarray(self.pose_basis, dtype=np.float64).reshape(N_JOINTS * 3, THETA_P_DIM)
        if not (np.isfinite(rest).all() and np.isfinite(basis).all()):
            raise ValueError("BodyModel requires finite arrays")
        markers = dict(self.marker_map)
        for name in MARKER_NAMES:
            if name not in markers:
                raise ValueError(f"marker_map missing {name!r}")
            if not (0 <= int(markers[name]) < N_JOINTS):
                raise ValueError(f"marker {name!r} index out of range")
        object.__setattr__(self, "rest_joints", rest)
        object.__setattr__(self, "pose_basis", basis)
        object.__setattr__(self, "marker_map", markers)

    def marker_index(self, name: str) -> int:
        return int(self.marker_map[name])

    def to_json(self) -> dict:
        return {
            "rest_joints": self.rest_joints.tolist(),
            "pose_basis": self.pose_basis.tolist(),
            "marker_map": {k: int(v) for k, v in self.marker_map.items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BodyModel":
        return cls(
            rest_joints=np.asarray(doc["rest_joints"], dtype=np.float64),
            pose_basis=np.asarray(doc["pose_basis"], dtype=np.float64),
            marker_map=doc["marker_map"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "BodyModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


_DEFAULT_REST = np.array([
    [0.00, 0.00, 0.00],   # pelvis (root)
    [0.00, 0.00, 0.15],   # spine
    [0.00, 0.00, 0.35],   # chest
    [0.00, 0.00, 0.52],   # neck
    [0.00, 0.00, 0.65],   # head
    [0.00, 0.20, 0.45],   # l_shoulder
    [0.00, 0.22, 0.17],   # l_elbow
    [0.00, 0.23, -0.08],  # l_wrist
    [0.00, -0.20, 0.45],  # r_shoulder
    [0.00, -0.22, 0.17],  # r_elbow
    [0.00, -0.23, -0.08], # r_wrist
    [0.00, 0.10, -0.05],  # l_hip
    [0.00, 0.10, -0.48],  # l_knee
    [0.00, 0.10, -0.85],  # l_ankle
    [0.12, 0.10, -0.90],  # l_foot
    [0.00, -0.10, -0.05], # r_hip
    [0.00, -0.10, -0.48], # r_knee
    [0.00, -0.10, -0.85], # r_ankle
    [0.12, -0.10, -0.90], # r_foot
    [-0.08, 0.00, -0.25], # gluteus
    [-0.12, 0.00, 0.10],  # back
])

FOOT_AXIS_SCALE = 0.3  # meters of foot displacement per unit theta on dims 0..5

_MARKER_JOINTS = (14, 18, 19, 20)  # l_foot, r_foot, gluteus, back


def default_body_model(seed: int = 20240) -> BodyModel:
    """The shipped body: documented rest pose, structured + random basis."""
    basis = np.zeros((N_JOINTS * 3, THETA_P_DIM))
    for axis in range(3):
        basis[14 * 3 + axis, axis] = FOOT_AXIS_SCALE  # left foot xyz
        basis[18 * 3 + axis, 3 + axis] = FOOT_AXIS_SCALE  # right foot xyz
    free_rows = [
        j * 3 + a
        for j in range(N_JOINTS)
        if j not in _MARKER_JOINTS
        for a in range(3)
    ]
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((len(free_rows), THETA_P_DIM - 6))
    q, _ = np.linalg.qr(gauss)
    basis[np.ix_(free_rows, range(6, THETA_P_DIM))] = 0.25 * q
    return BodyModel(
        rest_joints=_DEFAULT_REST.copy(),
        pose_basis=basis,
        marker_map={"left_foot": 14, "right_foot": 18, "gluteus": 19, "back": 20},
    )


def forward_kinematics(body: BodyModel, rf: RouteFrame, pose: PoseCode) -> np.ndarray:
    """(21, 3) world joint positions: R @ (rest + basis theta_p) + t."""
    rot = rot6d_to_matrix(rf.r)
    local = body.rest_joints + (body.pose_basis @ pose.theta_p).reshape(N_JOINTS, 3)
    return local @ rot.T + rf.t


def joints_batch(body: BodyModel, t: np.ndarray, r: np.ndarray, theta_p: np.ndarray) -> np.ndarray:
    """(n, 21, 3) joints for per-frame arrays t (n,3), r (n,6), theta_p (n,32)."""
    n = t.shape[0]
    out = np.empty((n, N_JOINTS, 3))
    disp = theta_p @ body.pose_basis.T  # (n, 63)
    local = body.rest_joints[None, :, :] + disp.reshape(n, N_JOINTS, 3)
    for i in range(n):
        rot = rot6d_to_matrix(r[i])
        out[i] = local[i] @ rot.T + t[i]
    return out


def marker_positions(body: BodyModel, t, r, theta_p) -> np.ndarray:
    """(n, 4, 3) positions of [left_foot, right_foot, gluteus, back]."""
    joints = joints_batch(body, np.atleast_2d(t), np.atleast_2d(r), np.atleast_2d(theta_p))
    idx = [body.marker_index(n) for n in MARKER_NAMES]
    return joints[:, idx, :]


def densify_body(joints: np.ndarray, per_bone: int = 10) -> np.ndarray:
    """Sample ~200 points along the skeleton bones (fixed interpolation)."""
    w = np.linspace(0.0, 1.0, per_bone)[:, None]
    parts = [joints[a][None, :] * (1 - w) + joints[b][None, :] * w for a, b in BONES]
    return np.vstack(parts)


# ---------------------------------------------------------------------------
# Anchor flags, states, phase


def anchor_flags(body: BodyModel, window, snap: SceneSnapshot,
                 thresholds: ContactThresholds = ContactThresholds()) -> np.ndarray:
    """(n, 4) anchor booleans per frame for the four contact markers.

    A marker is anchored iff it is in contact (local scene support within
    `distance` below/above it) and static (moved less than `movement` since
    the previous frame). Frame 0 reuses frame 1's displacement.
    """
    if len(window) < 2:
        raise ValueError("anchor detection needs a window of at least 2 frames")
    t = np.stack([rf.t for rf, _ in window])
    r = np.stack([rf.r for rf, _ in window])
    tp = np.stack([p.theta_p for _, p in window])
    markers = marker_positions(body, t, r, tp)  # (n, 4, 3)
    disp = np.linalg.norm(np.diff(markers, axis=0), axis=2)  # (n-1, 4)
    disp = np.vstack([disp[0:1], disp])
    static = disp < thresholds.movement
    contact = np.zeros(markers.shape[:2], dtype=bool)
    for i in range(markers.shape[0]):
        for m in range(4):
            mx, my, mz = markers[i, m]
            support = snap.support_height((mx, my), thresholds.radius,
                                          z_cap=mz + thresholds.distance)
            contact[i, m] = support > -math.inf and (mz - support) < thresholds.distance
    return contact & static


def states_from_flags(flags: np.ndarray) -> list[AnchorState]:
    """Fig-3 style rules: which anchored parts imply which action state."""
    states = []
    for lf, rf, gl, bk in flags:
        if bk:
            states.append(AnchorState.LYING)
        elif gl:
            states.append(AnchorState.SITTING)
        elif lf and rf:
            states.append(AnchorState.IDLE)
        elif lf or rf:
            states.append(AnchorState.LOCOMOTION)
        else:
            states.append(AnchorState.INVALID)
    return states


def annotate_state(body: BodyModel, window, snap: SceneSnapshot,
                   thresholds: ContactThresholds = ContactThresholds()) -> list[AnchorState]:
    """Per-frame action state of a (RouteFrame, PoseCode) window in a scene."""
    return states_from_flags(anchor_flags(body, window, snap, thresholds))


def compute_phase(states, left_anchor, right_anchor) -> np.ndarray:
    """Gait phase in [0, 1) from foot-contact onsets.

    Within each maximal locomotion run: 0.0 at a left-foot contact onset,
    0.5 at a right-foot onset, linear in time between onsets (wrapping
    mod 1), extrapolated at the nearest segment's rate before the first /
    after the last onset. Runs with a single onset hold its value; runs with
    none, and every non-locomotion frame, get phase 0.
    """
    states = list(states)
    left = np.asarray(left_anchor, dtype=bool)
    right = np.asarray(right_anchor, dtype=bool)
    n = len(states)
    phases = np.zeros(n)
    i = 0
    while i < n:
        if states[i] != AnchorState.LOCOMOTION:
            i += 1
            continue
        j = i
        while j < n and states[j] == AnchorState.LOCOMOTION:
            j += 1
        onsets = []  # (frame, value); at most one onset kept per frame
        for f in range(i, j):
            if left[f] and (f == 0 or not left[f - 1]):
                onsets.append((f, 0.0))
            if right[f] and (f == 0 or not right[f - 1]):
                if not (onsets and onsets[-1][0] == f):
                    onsets.append((f, 0.5))
        if len(onsets) == 0:
            i = j
            continue
        if len(onsets) == 1:
            phases[i:j] = onsets[0][1]
            i = j
            continue
        # unwrapped phase at each onset: consecutive onsets always advance
        frames = np.array([f for f, _ in onsets], dtype=np.float64)
        unwrapped = [onsets[0][1]]
        for (_, v_prev), (_, v_next) in zip(onsets[:-1], onsets[1:]):
            step = (v_next - v_prev) % 1.0
            if step == 0.0:
                step = 1.0
            unwrapped.append(unwrapped[-1] + step)
        unwrapped = np.array(unwrapped)
        ts = np.arange(i, j, dtype=np.float64)
        vals = np.interp(ts, frames, unwrapped)
        head_rate = (unwrapped[1] - unwrapped[0]) / (frames[1] - frames[0])
        tail_rate = (unwrapped[-1] - unwrapped[-2]) / (frames[-1] - frames[-2])
        before = ts < frames[0]
        after = ts > frames[-1]
        vals[before] = unwrapped[0] + (ts[before] - frames[0]) * head_rate
        vals[after] = unwrapped[-1] + (ts[after] - frames[-1]) * tail_rate
        phases[i:j] = vals % 1.0
        i = j
    return phases


# ---------------------------------------------------------------------------
# Motion sequences


@dataclass
class MotionSeq:
    """Fixed-length motion: routes, pose codes, state probabilities, phases.

    Stored struct-of-arrays; every per-frame list has equal length and state
    probability rows are nonnegative and sum to 1 (within 1e-6).
    """

    t: np.ndarray        # (k, 3)
    r: np.ndarray        # (k, 6)
    theta_p: np.ndarray  # (k, 32)
    theta_h: np.ndarray  # (k, 24)
    states: np.ndarray   # (k, 4)
    phases: np.ndarray   # (k,)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.r = np.asarray(self.r, dtype=np.float64)
        self.theta_p = np.asarray(self.theta_p, dtype=np.float64)
        self.theta_h = np.asarray(self.theta_h, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)
        k = self.t.shape[0]
        shapes = {
            "t": (k, 3), "r": (k, 6), "theta_p": (k, THETA_P_DIM),
            "theta_h": (k, THETA_H_DIM), "states": (k, N_STATES), "phases": (k,),
        }
        for name, want in shapes.items():
            arr = getattr(self, name)
            if arr.shape != want:
                raise ValueError(f"MotionSeq.{name}: expected shape {want}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"MotionSeq.{name}: non-finite values")
        if (self.states < -1e-9).any():
            raise ValueError("state probabilities must be nonnegative")
        sums = self.states.sum(axis=1)
        if k and not np.allclose(sums, 1.0, atol=1e-6):
            raise ValueError("state probabilities must sum to 1")

    def __len__(self):
        return self.t.shape[0]

    def frame(self, i: int) -> tuple[RouteFrame, PoseCode]:
        return (RouteFrame(self.t[i], self.r[i]), PoseCode(self.theta_p[i], self.theta_h[i]))

    def state_at(self, i: int) -> AnchorState:
        return AnchorState(int(np.argmax(self.states[i])))

    def copy(self) -> "MotionSeq":
        return MotionSeq(self.t.copy(), self.r.copy(), self.theta_p.copy(),
                         self.theta_h.copy(), self.states.copy(), self.phases.copy())

    @classmethod
    def hold(cls, rf: RouteFrame, pose: PoseCode, state_probs, phase: float, k: int) -> "MotionSeq":
        """k identical frames (used for hold-in-place fallbacks)."""
        probs = np.asarray(state_probs, dtype=np.float64).reshape(N_STATES)
        return cls(
            t=np.tile(rf.t, (k, 1)), r=np.tile(rf.r, (k, 1)),
            theta_p=np.tile(pose.theta_p, (k, 1)), theta_h=np.tile(pose.theta_h, (k, 1)),
            states=np.tile(probs / probs.sum(), (k, 1)), phases=np.full(k, phase % 1.0),
        )


def one_hot_state(state: AnchorState, smoothing: float = 0.0) -> np.ndarray:
    """Probability 4-vector for a valid state, optionally uniform-smoothed."""
    if state == AnchorState.INVALID:
        raise ValueError("INVALID has no probability encoding")
    probs = np.full(N_STATES, smoothing / N_STATES)
    probs[int(state)] += 1.0 - smoothing
    return probs


def write_motion_jsonl(path, motion: MotionSeq, start_frame: int = 0) -> None:
    """One frame per line: frame, t, r, theta_p, theta_h, state, phase."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(motion)):
            rec = {
                "frame": start_frame + i,
                "t": motion.t[i].tolist(),
                "r": motion.r[i].tolist(),
                "theta_p": motion.theta_p[i].tolist(),
                "theta_h": motion.theta_h[i].tolist(),
                "state": motion.states[i].tolist(),
                "phase": float(motion.phases[i]),
            }
            fh.write(json.dumps(rec) + "\n")


def read_motion_jsonl(path) -> tuple[MotionSeq, np.ndarray]:
    """Load a motion file; returns (motion, frame indices)."""
    frames, t, r, tp, th, st, ph = [], [], [], [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no}: invalid JSON ({exc})") from None
            frames.append(int(rec["frame"]))
            t.append(rec["t"])
            r.append(rec["r"])
            tp.append(rec["theta_p"])
            th.append(rec["theta_h"])
            st.append(rec["state"])
            ph.append(rec["phase"])
    motion = MotionSeq(np.array(t), np.array(r), np.array(tp), np.array(th),
                       np.array(st), np.array(ph))
    return motion, np.array(frames, dtype=np.int64)
