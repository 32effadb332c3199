"""Iterative latent-motion update: time-variant blending, velocity-spectrum
low-pass fusion with the planned grid trajectory, yaw correction, and the
no-skating translation.

The latent motion is a k-frame plan living in the Cartesian product of
Euclidean trajectory, 6D rotation space, pose-code space, state simplex and
phase circle. Each step the fresh k-frame hypothesis is folded in with a
blending weight that decays toward the head of the plan, so the executed
frame stays continuous while the tail tracks new predictions quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .body import BodyModel, MotionSeq, AnchorState, PoseCode, RouteFrame, \
    marker_positions, rot6d_valid_mask


@dataclass(frozen=True)
class BlendConfig:
    """Scalars of the latent update.

    k: plan horizon (frames). nu: blending sharpness; the weight on the old
    plan at offset tau is ((k - tau - 1) / k) ** nu. m: the future frame at
    which yaw correction compares planned vs desired trajectory. kappa:
    fraction of anchored-marker drift removed by the no-skating translation.
    lowpass_cutoff: highest DFT bin (inclusive) taken from the planned
    trajectory's velocity spectrum; mirrored conjugate bins are kept too.
    """

    k: int = 60
    nu: float = 4.0
    m: int = 15
    kappa: float = 0.6
    lowpass_cutoff: int = 3
    lowpass_shape: str = "hard"  # "hard" | "raised_cosine"

    def __post_init__(self):
        if not (0 <= self.m < self.k):
            raise ValueError("m must satisfy 0 <= m < k")
        if not (0.0 <= self.kappa <= 1.0):
            raise ValueError("kappa must lie in [0, 1]")
        if not (0 <= self.lowpass_cutoff <= self.k // 2):
            raise ValueError("lowpass_cutoff must lie in [0, k/2]")
        if self.lowpass_shape not in ("hard", "raised_cosine"):
            raise ValueError("lowpass_shape must be 'hard' or 'raised_cosine'")


def blend_weights(cfg: BlendConfig) -> np.ndarray:
    """Per-offset weight on the previous plan: ((k - tau - 1) / k) ** nu."""
    tau = np.arange(cfg.k, dtype=np.float64)
    return ((cfg.k - tau - 1.0) / cfg.k) ** cfg.nu


def _blend_phase(p_hyp: np.ndarray, p_prev: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Convex blend on the unit circle along the shortest arc."""
    delta = (p_prev - p_hyp + 0.5) % 1.0 - 0.5
    return (p_hyp + w * delta) % 1.0


def blend_update(prev: MotionSeq, hyp: MotionSeq, cfg: BlendConfig) -> MotionSeq:
    """Fold the fresh hypothesis into the previous latent plan.

    out[tau] = (1 - w) * hyp[tau] + w * prev[tau + 1] with w = alpha ** nu,
    alpha = (k - tau - 1) / k. At tau = k - 1 the weight is exactly zero and
    the placeholder frame past the previous plan is skipped outright, so the
    last output frame equals the hypothesis bit for bit. Orientation rows
    that blend to a degenerate 6D vector fall back to the dominant input.
    """
    k = cfg.k
    if not (len(prev) == len(hyp) == k):
        raise ValueError(f"blend_update needs two length-{k} motions")
    w = blend_weights(cfg)[: k - 1, None]
    t = np.empty_like(hyp.t)
    r = np.empty_like(hyp.r)
    theta_p = np.empty_like(hyp.theta_p)
    theta_h = np.empty_like(hyp.theta_h)
    states = np.empty_like(hyp.states)
    phases = np.empty_like(hyp.phases)

    t[:-1] = (1.0 - w) * hyp.t[:-1] + w * prev.t[1:]
    r[:-1] = (1.0 - w) * hyp.r[:-1] + w * prev.r[1:]
    theta_p[:-1] = (1.0 - w) * hyp.theta_p[:-1] + w * prev.theta_p[1:]
    theta_h[:-1] = (1.0 - w) * hyp.theta_h[:-1] + w * prev.theta_h[1:]
    states[:-1] = (1.0 - w) * hyp.states[:-1] + w * prev.states[1:]
    states[:-1] /= states[:-1].sum(axis=1, keepdims=True)
    phases[:-1] = _blend_phase(hyp.phases[:-1], prev.phases[1:], w[:, 0])

    t[-1] = hyp.t[-1]
    r[-1] = hyp.r[-1]
    theta_p[-1] = hyp.theta_p[-1]
    theta_h[-1] = hyp.theta_h[-1]
    states[-1] = hyp.states[-1]
    phases[-1] = hyp.phases[-1]

    bad = ~rot6d_valid_mask(r[:-1])  # last row is verbatim hypothesis
    if bad.any():
        rows = np.flatnonzero(bad)
        use_prev = w[rows, 0] >= 0.5
        r[rows] = np.where(use_prev[:, None], prev.r[rows + 1], hyp.r[rows])
    return MotionSeq(t, r, theta_p, theta_h, states, phases)


# ---------------------------------------------------------------------------
# Velocity spectrum fusion


def dft(v: np.ndarray) -> np.ndarray:
    """Exact discrete Fourier transform along axis 0 (direct O(n^2) form)."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    if n < 1:
        raise ValueError("dft needs at least one sample")
    jk = np.outer(np.arange(n), np.arange(n))
    w = np.exp(-2j * math.pi * jk / n)
    return w @ v


def idft(f: np.ndarray) -> np.ndarray:
    """Real part of the inverse DFT along axis 0."""
    f = np.asarray(f, dtype=np.complex128)
    n = f.shape[0]
    if n < 1:
        raise ValueError("idft needs at least one sample")
    jk = np.outer(np.arange(n), np.arange(n))
    w = np.exp(2j * math.pi * jk / n)
    return np.real(w @ f) / n


def lowpass_gain(n: int, cfg: BlendConfig) -> np.ndarray:
    """Per-bin gain l of the low-pass filter; conjugate-symmetric by
    construction (depends only on min(j, n - j)) so blends stay real."""
    j = np.arange(n)
    dist = np.minimum(j, n - j)
    nc = cfg.lowpass_cutoff
    if cfg.lowpass_shape == "hard":
        return (dist <= nc).astype(np.float64)
    gain = np.zeros(n)
    gain[dist <= nc] = 1.0
    if nc > 0:
        roll = (dist > nc) & (dist < 2 * nc)
        gain[roll] = 0.5 * (1.0 + np.cos(math.pi * (dist[roll] - nc) / nc))
    return gain


def lowpass_blend(v_star: np.ndarray, v_dotdot: np.ndarray, cfg: BlendConfig) -> np.ndarray:
    """Fuse velocity sequences in spectrum space: low bins from the planned
    trajectory, the rest from the latent one; back-transformed real."""
    v_star = np.asarray(v_star, dtype=np.float64)
    v_dotdot = np.asarray(v_dotdot, dtype=np.float64)
    if v_star.shape != v_dotdot.shape:
        raise ValueError("velocity sequences must share a shape")
    f_star = dft(v_star)
    f_dd = dft(v_dotdot)
    gain = lowpass_gain(v_star.shape[0], cfg)
    if v_star.ndim > 1:
        gain = gain.reshape(-1, *([1] * (v_star.ndim - 1)))
    f_bar = gain * f_star + (1.0 - gain) * f_dd
    return idft(f_bar)


def rebuild_trajectory(v_bar: np.ndarray, origin) -> np.ndarray:
    """Positions from blended velocities: out[tau] = origin + sum v[0..tau]."""
    v_bar = np.asarray(v_bar, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    return origin + np.cumsum(v_bar, axis=0)


# ---------------------------------------------------------------------------
# Route corrections


def yaw_correction(latent: MotionSeq, desired_xy: np.ndarray, cfg: BlendConfig) -> MotionSeq:
    """Rotate the plan about the current root so frame m matches the desired
    trajectory's bearing; the same z rotation composes into every frame's
    orientation. Degenerate lever arms (under 1e-6 m) leave the plan as is.
    """
    desired_xy = np.asarray(desired_xy, dtype=np.float64)
    c = latent.t[0, :2]
    a = latent.t[cfg.m, :2] - c
    b = desired_xy[cfg.m] - c
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-6 or nb < 1e-6:
        return latent
    theta = math.atan2(a[0] * b[1] - a[1] * b[0], a @ b)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    rot2 = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
    out = latent.copy()
    out.t[:, :2] = (latent.t[:, :2] - c) @ rot2.T + c
    rot3 = np.array([[cos_t, -sin_t, 0.0], [sin_t, cos_t, 0.0], [0.0, 0.0, 1.0]])
    out.r[:, :3] = latent.r[:, :3] @ rot3.T
    out.r[:, 3:] = latent.r[:, 3:] @ rot3.T
    return out


def anchored_marker(state: AnchorState, phase: float) -> list[str]:
    """Marker(s) that should stay planted given state and gait phase."""
    if state == AnchorState.LOCOMOTION:
        return ["left_foot"] if (phase % 1.0) < 0.5 else ["right_foot"]
    if state == AnchorState.IDLE:
        return ["left_foot", "right_foot"]
    if state == AnchorState.SITTING:
        return ["gluteus"]
    if state == AnchorState.LYING:
        return ["back"]
    return []


def no_skate(prev_exec: tuple[RouteFrame, PoseCode], latent: MotionSeq,
             body: BodyModel, cfg: BlendConfig) -> MotionSeq:
    """Translate the whole plan by kappa * (x_prev - x_now) where x is the
    anchored marker's mean position under the previous execution frame and
    the plan's first frame. The anchored part follows the plan's current
    state probabilities and phase."""
    markers = anchored_marker(latent.state_at(0), float(latent.phases[0]))
    if not markers:
        return latent
    prev_rf, prev_pose = prev_exec
    from .body import MARKER_NAMES  # local to avoid polluting module surface
    idx = [MARKER_NAMES.index(m) for m in markers]
    x_prev = marker_positions(body, prev_rf.t, prev_rf.r, prev_pose.theta_p)[0, idx].mean(axis=0)
    x_now = marker_positions(body, latent.t[0], latent.r[0], latent.theta_p[0])[0, idx].mean(axis=0)
    shift = cfg.kappa * (x_prev - x_now)
    out = latent.copy()
    out.t += shift
    return out
