"""Evaluation losses and motion metrics (pure functions, no gradients).

The reconstruction losses pin the supervision formulas the predictors would
be trained with; the physical metrics (contact, non-collision, skating) use
the 21-joint body and BEV support surfaces, so reported numbers are named
`mpjpe_21` / `noncol_bev` to keep them distinct from mesh-based variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .blending import anchored_marker
from .body import (AnchorState, BodyModel, ContactThresholds, MARKER_NAMES,
                   MotionSeq, joints_batch, marker_positions)
from .perception import PerceptionConfig, bev_project
from .parallel import parallel_map
from .scene import SceneSnapshot


@dataclass(frozen=True)
class LossWeights:
    """Multipliers of the goal / pose training objectives."""

    lambda1: float = 0.3   # goal KL
    lambda2: float = 0.7   # pose KL
    lambda3: float = 10.0  # joint reconstruction
    lambda4: float = 10.0  # marker ("vertex") reconstruction
    lambda5: float = 1.0   # pose-parameter reconstruction
    lambda6: float = 1.0   # state cross entropy
    lambda7: float = 1.0   # phase-step L1


def kl_std_normal(mu, log_sigma) -> float:
    """KL(N(mu, sigma^2) || N(0, I)) = 0.5 sum(sigma^2 + mu^2 - 1 - 2 log sigma)."""
    mu = np.asarray(mu, dtype=np.float64)
    log_sigma = np.asarray(log_sigma, dtype=np.float64)
    sigma2 = np.exp(2.0 * log_sigma)
    return float(0.5 * np.sum(sigma2 + mu * mu - 1.0 - 2.0 * log_sigma))


def goal_loss(t_gt, r_gt, t_pred, r_pred, mu, log_sigma, lw: LossWeights = LossWeights()) -> float:
    """L1 on goal position and orientation plus weighted latent KL."""
    t_gt = np.asarray(t_gt, dtype=np.float64).reshape(3)
    r_gt = np.asarray(r_gt, dtype=np.float64).reshape(6)
    t_pred = np.asarray(t_pred, dtype=np.float64).reshape(3)
    r_pred = np.asarray(r_pred, dtype=np.float64).reshape(6)
    return float(np.abs(t_gt - t_pred).sum() + np.abs(r_gt - r_pred).sum()
                 + lw.lambda1 * kl_std_normal(mu, log_sigma))


def route_loss(t_gt, r_gt, t_pred, r_pred) -> float:
    """Summed per-frame L1 on positions and orientations."""
    t_gt = np.asarray(t_gt, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    t_pred = np.asarray(t_pred, dtype=np.float64)
    r_pred = np.asarray(r_pred, dtype=np.float64)
    if t_gt.shape != t_pred.shape or r_gt.shape != r_pred.shape:
        raise ValueError("route_loss requires matching shapes")
    return float(np.abs(t_gt - t_pred).sum() + np.abs(r_gt - r_pred).sum())


def phase_steps(phases: np.ndarray) -> np.ndarray:
    """Wrapped forward differences of a phase sequence; step 0 is 0."""
    phases = np.asarray(phases, dtype=np.float64)
    d = (np.diff(phases) + 0.5) % 1.0 - 0.5
    return np.concatenate([[0.0], d])


def cross_entropy_states(gt: np.ndarray, pred: np.ndarray, eps: float = 1e-12) -> float:
    """- sum_i sum_c gt log pred over all frames and states."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    return float(-(gt * np.log(np.maximum(pred, eps))).sum())


def pose_losses(gt: MotionSeq, pred: MotionSeq, body: BodyModel,
                lw: LossWeights = LossWeights(),
                mu=None, log_sigma=None) -> dict:
    """All pose-supervision terms plus their weighted total.

    Joint/marker reconstruction evaluates the body model at the ground-truth
    route with each motion's pose codes, so the terms isolate pose error.
    """
    if len(gt) != len(pred):
        raise ValueError("pose_losses requires equal-length motions")
    kl = kl_std_normal(mu, log_sigma) if mu is not None else 0.0
    j_gt = joints_batch(body, gt.t, gt.r, gt.theta_p)
    j_pred = joints_batch(body, gt.t, gt.r, pred.theta_p)
    l_joint = float(np.abs(j_gt - j_pred).sum())
    m_gt = marker_positions(body, gt.t, gt.r, gt.theta_p)
    m_pred = marker_positions(body, gt.t, gt.r, pred.theta_p)
    l_vert = float(np.abs(m_gt - m_pred).sum())
    l_theta = float(np.abs(gt.theta_p - pred.theta_p).sum()
                    + np.abs(gt.theta_h - pred.theta_h).sum())
    l_state = cross_entropy_states(gt.states, pred.states)
    l_phase = float(np.abs(phase_steps(gt.phases) - phase_steps(pred.phases)).sum())
    total = (lw.lambda2 * kl + lw.lambda3 * l_joint + lw.lambda4 * l_vert
             + lw.lambda5 * l_theta + lw.lambda6 * l_state + lw.lambda7 * l_phase)
    return {
        "kl": kl, "joint": l_joint, "vert": l_vert, "theta": l_theta,
        "state": l_state, "phase": l_phase, "total": total,
    }


def mpjpe(gt: MotionSeq, pred: MotionSeq, body: BodyModel) -> float:
    """Mean per-joint position error in millimeters (21-joint body)."""
    if len(gt) != len(pred):
        raise ValueError("mpjpe requires equal-length motions")
    j_gt = joints_batch(body, gt.t, gt.r, gt.theta_p)
    j_pred = joints_batch(body, pred.t, pred.r, pred.theta_p)
    err = np.linalg.norm(j_gt - j_pred, axis=2)
    return float(err.mean() * 1000.0)


def _snapshots_for(motion: MotionSeq, snapshots) -> list[SceneSnapshot]:
    if isinstance(snapshots, SceneSnapshot):
        return [snapshots] * len(motion)
    snapshots = list(snapshots)
    if len(snapshots) != len(motion):
        raise ValueError("need one snapshot per frame (or a single static one)")
    return snapshots


def contact_score(motion: MotionSeq, snapshots, body: BodyModel,
                  thresholds: ContactThresholds = ContactThresholds()) -> float:
    """Fraction of frames with at least one contact marker on scene support."""
    snaps = _snapshots_for(motion, snapshots)
    markers = marker_positions(body, motion.t, motion.r, motion.theta_p)

    def frame_contact(i):
        for m in range(markers.shape[1]):
            mx, my, mz = markers[i, m]
            support = snaps[i].support_height((mx, my), thresholds.radius,
                                              z_cap=mz + thresholds.distance)
            if support > -math.inf and (mz - support) < thresholds.distance:
                return 1.0
        return 0.0

    hits = parallel_map(frame_contact, range(len(motion)))
    return float(np.mean(hits)) if len(motion) else 1.0


def non_collision_score(motion: MotionSeq, snapshots, body: BodyModel,
                        pcfg: PerceptionConfig = PerceptionConfig(),
                        tolerance: float = 0.02) -> float:
    """Fraction of joints above the local BEV support surface.

    A joint collides when it sits in an occupied BEV bin more than
    `tolerance` below that bin's support height.
    """
    snaps = _snapshots_for(motion, snapshots)
    joints = joints_batch(body, motion.t, motion.r, motion.theta_p)

    def frame_collisions(i):
        root = motion.t[i]
        near = snaps[i].points[snaps[i].k_nearest_indices(root, pcfg.k2)]
        bev = bev_project(near, root, pcfg)
        bad = 0
        for j in range(joints.shape[1]):
            cell = bev.cell_of(joints[i, j, :2])
            if not bev.occupancy[cell]:
                continue
            support = bev.elevation[cell] + root[2]
            if joints[i, j, 2] < support - tolerance:
                bad += 1
        return bad

    total = joints.shape[0] * joints.shape[1]
    if total == 0:
        return 1.0
    bad = sum(parallel_map(frame_collisions, range(len(motion))))
    return 1.0 - bad / total


def skating(motion: MotionSeq, body: BodyModel) -> float:
    """Average per-frame drift (m) of the anchored marker between frames."""
    n = len(motion)
    if n < 2:
        return 0.0
    markers = marker_positions(body, motion.t, motion.r, motion.theta_p)
    drifts = []
    for i in range(1, n):
        names = anchored_marker(motion.state_at(i), float(motion.phases[i]))
        if not names:
            continue
        idx = [MARKER_NAMES.index(nm) for nm in names]
        prev = markers[i - 1, idx].mean(axis=0)
        cur = markers[i, idx].mean(axis=0)
        drifts.append(float(np.linalg.norm(cur - prev)))
    return float(np.mean(drifts)) if drifts else 0.0


# ---------------------------------------------------------------------------
# Perception similarity


def motion_descriptors(motion: MotionSeq, fps: float = 30.0, window: int = 30) -> np.ndarray:
    """Per-window motion descriptors used by the Frechet metric.

    Each window yields [mean speed, std speed, mean |yaw rate|, occupancy of
    the four states, mean |phase step|] -> an (n_windows, 8) array.
    """
    n = len(motion)
    v = np.diff(motion.t[:, :2], axis=0) * fps
    speed = np.linalg.norm(v, axis=1)
    yaw = np.arctan2(motion.r[:, 1], motion.r[:, 0])
    yaw_rate = np.abs((np.diff(yaw) + math.pi) % (2 * math.pi) - math.pi) * fps
    steps = np.abs(phase_steps(motion.phases))
    states = motion.states
    rows = []
    for start in range(0, max(n - window + 1, 1), window):
        end = min(start + window, n)
        sl = slice(start, max(end - 1, start + 1))
        rows.append(np.concatenate([
            [speed[sl].mean() if speed[sl].size else 0.0,
             speed[sl].std() if speed[sl].size else 0.0,
             yaw_rate[sl].mean() if yaw_rate[sl].size else 0.0],
            states[start:end].mean(axis=0),
            [steps[start:end].mean()],
        ]))
    return np.vstack(rows)


def frechet_distance_diag(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """Frechet distance between diagonal-Gaussian fits of two feature sets:
    ||mu_a - mu_b||^2 + sum_i (sigma_a,i - sigma_b,i)^2."""
    a = np.asarray(feats_a, dtype=np.float64)
    b = np.asarray(feats_b, dtype=np.float64)
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    sd_a, sd_b = a.std(axis=0), b.std(axis=0)
    return float(((mu_a - mu_b) ** 2).sum() + ((sd_a - sd_b) ** 2).sum())


# ---------------------------------------------------------------------------
# Report assembly


def evaluate_motion(motion: MotionSeq, snapshots, body: BodyModel,
                    pcfg: PerceptionConfig = PerceptionConfig(),
                    thresholds: ContactThresholds = ContactThresholds(),
                    reference: MotionSeq | None = None,
                    fps: float = 30.0) -> dict:
    """Physical metrics of a motion, plus reconstruction metrics when a
    reference motion of equal length is supplied."""
    report = {
        "frames": len(motion),
        "contact": contact_score(motion, snapshots, body, thresholds),
        "noncol_bev": non_collision_score(motion, snapshots, body, pcfg),
        "skating_m_per_frame": skating(motion, body),
    }
    if reference is not None:
        report["mpjpe_21"] = mpjpe(reference, motion, body)
        report["route_l1"] = route_loss(reference.t, reference.r, motion.t, motion.r)
        report["pose_losses"] = pose_losses(reference, motion, body)
        report["frechet_diag"] = frechet_distance_diag(
            motion_descriptors(reference, fps), motion_descriptors(motion, fps))
    return report
