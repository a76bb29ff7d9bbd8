"""Reward-based receding-horizon planner.

Candidates come from a small enumerable library (accel levels x steer
profiles, plus the all-zero maintain trajectory) so that offline scoring can
re-evaluate every logged candidate exactly. Each candidate is scored by its
expected reward under the predictor's ego-conditioned mode distribution and
the argmax is executed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    ACCEL_LIMIT,
    CAR_RADIUS,
    DT_DEFAULT,
    ROBOT_RADIUS,
    TURN_LIMIT,
    ActionTraj,
    AgentState,
    Context,
    DrivingCorridor,
    JointState,
    NavWorld,
    RngStream,
    rollout_positions,
)
from .predictor import PredictionSet


@dataclass(frozen=True)
class RewardWeights:
    """Linear reward weights: progress, lane-keeping, collision, control."""

    w_progress: float = 1.0
    w_lane: float = -0.5
    w_col: float = -10.0
    w_ctrl: float = -0.1

    def __post_init__(self):
        vals = (self.w_progress, self.w_lane, self.w_col, self.w_ctrl)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("weights must be finite")
        if self.w_col >= 0:
            raise ValueError("w_col must be negative")
        if self.w_progress <= 0:
            raise ValueError("w_progress must be positive")


STEER_PROFILES = ("straight", "lane_left", "lane_right")


@dataclass(frozen=True)
class PlannerHandle:
    weights: RewardWeights = field(default_factory=RewardWeights)
    accel_levels: tuple[float, ...] = (-3.0, -1.0, 0.0, 1.0)
    steer_profiles: tuple[str, ...] = STEER_PROFILES
    two_stage: bool = False
    horizon: int = 30
    dt: float = DT_DEFAULT
    accel_jitter: float = 0.05
    n_modes: int = 1
    lane_change_turn: float = 0.25
    speed_cap: float = 10.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.speed_cap <= 0:
            raise ValueError("speed_cap must be positive")
        for p in self.steer_profiles:
            if p not in STEER_PROFILES:
                raise ValueError(f"unknown steer profile {p!r}")

    @property
    def n_candidates(self) -> int:
        n_acc = len(self.accel_levels) ** (2 if self.two_stage else 1)
        return n_acc * len(self.steer_profiles) + 1


def _steer_sequence(profile: str, T: int, turn: float) -> np.ndarray:
    w = np.zeros(T)
    half = T // 2
    if profile == "lane_left":
        w[:half] = turn
        w[half:] = -turn
    elif profile == "lane_right":
        w[:half] = -turn
        w[half:] = turn
    return w


def _cap_speed(accel: np.ndarray, v0: float, cap: float, dt: float) -> np.ndarray:
    """Clamp an acceleration sequence so rolled-out speed never exceeds cap."""
    out = np.empty_like(accel)
    v = v0
    for k in range(len(accel)):
        a = min(float(accel[k]), (cap - v) / dt)
        a = min(max(a, -ACCEL_LIMIT), ACCEL_LIMIT)
        out[k] = a
        v = max(0.0, v + a * dt)
    return out


def sample_candidates(handle: PlannerHandle, state: AgentState, ctx: Context,
                      rng: RngStream, start_t: int = 0) -> list[ActionTraj]:
    """Enumerate the candidate library with rng jitter on accelerations.

    Index 0 is always the maintain trajectory; every candidate's acceleration
    is clamped so speed stays at or below the handle's speed cap.
    """
    gen = rng.generator()
    T = handle.horizon
    cap = handle.speed_cap
    maintain = _cap_speed(np.zeros(T), state.speed, cap, handle.dt)
    cands = [ActionTraj(np.column_stack([maintain, np.zeros(T)]), start_t=start_t)]
    if handle.two_stage:
        accel_seqs = []
        half = T // 2
        for a1 in handle.accel_levels:
            for a2 in handle.accel_levels:
                seq = np.full(T, a2)
                seq[:half] = a1
                accel_seqs.append(seq)
    else:
        accel_seqs = [np.full(T, a) for a in handle.accel_levels]
    for accel in accel_seqs:
        for profile in handle.steer_profiles:
            jit = gen.normal(0.0, handle.accel_jitter)
            a = np.clip(accel + jit, -ACCEL_LIMIT, ACCEL_LIMIT)
            a = _cap_speed(a, state.speed, cap, handle.dt)
            w = np.clip(_steer_sequence(profile, T, handle.lane_change_turn),
                        -TURN_LIMIT, TURN_LIMIT)
            cands.append(ActionTraj(np.column_stack([a, w]), start_t=start_t))
    return cands


def _crop_length(ego: ActionTraj, humans: Sequence[ActionTraj]) -> int:
    L = len(ego)
    for h in humans:
        L = min(L, len(h))
    if L < 1:
        raise ValueError("incompatible trajectory lengths")
    return L


def reward_terms(handle: PlannerHandle, ego: ActionTraj,
                 humans: Sequence[ActionTraj], joint: JointState, ctx: Context,
                 human_radii: Optional[Sequence[float]] = None):
    """(progress, mean sq lane offset, summed overlap, sum sq actions)."""
    L = _crop_length(ego, humans) if humans else len(ego)
    ego_states = rollout_positions(joint.robot, ego, handle.dt)[:L]
    acts = ego.actions[:L]
    if isinstance(ctx, DrivingCorridor):
        progress = float(ego_states[-1, 0] - joint.robot.x)
        centers = np.array(ctx.lane_centers)
        offs = np.abs(ego_states[:, 1][:, None] - centers[None, :]).min(axis=1)
        lane = float(np.mean(offs ** 2))
    elif isinstance(ctx, NavWorld):
        goal = np.array(ctx.goal_primary)
        d0 = float(np.hypot(joint.robot.x - goal[0], joint.robot.y - goal[1]))
        d1 = float(np.hypot(ego_states[-1, 0] - goal[0], ego_states[-1, 1] - goal[1]))
        progress = d0 - d1
        lane = 0.0
    else:
        raise TypeError(f"unsupported context {type(ctx)}")
    col = 0.0
    if humans:
        radii = list(human_radii) if human_radii is not None else [CAR_RADIUS] * len(humans)
        for idx, (htraj, r) in enumerate(zip(humans, radii)):
            h_xy = rollout_positions(joint.humans[idx], htraj, handle.dt)[:L]
            d = np.hypot(ego_states[:, 0] - h_xy[:, 0], ego_states[:, 1] - h_xy[:, 1])
            col += float(np.maximum(0.0, ROBOT_RADIUS + r - d).sum())
    ctrl = float((acts ** 2).sum())
    return progress, lane, col, ctrl


def reward(handle: PlannerHandle, ego: ActionTraj, humans: Sequence[ActionTraj],
           joint: JointState, ctx: Context,
           human_radii: Optional[Sequence[float]] = None) -> float:
    """R = w_progress*progress + w_lane*lane + w_col*overlap + w_ctrl*ctrl."""
    progress, lane, col, ctrl = reward_terms(handle, ego, humans, joint, ctx, human_radii)
    w = handle.weights
    return (w.w_progress * progress + w.w_lane * lane
            + w.w_col * col + w.w_ctrl * ctrl)


@dataclass
class ReplanEntry:
    """Log of one replanning decision: candidates, predictions, rewards."""

    t: int
    candidates: list[ActionTraj]
    predicted_humans: PredictionSet
    candidate_rewards_predicted: list[float]
    executed_index: int
    predicted_reward_samples: list[tuple[float, float]]  # (reward, weight)

    def __post_init__(self):
        if not (0 <= self.executed_index < len(self.candidates)):
            raise ValueError("executed_index out of range")
        if len(self.candidate_rewards_predicted) != len(self.candidates):
            raise ValueError("candidate reward list must parallel candidates")


def _overlap_sum(ego_xy: np.ndarray, h_xy: np.ndarray, r: float) -> float:
    L = min(len(ego_xy), len(h_xy))
    d = np.hypot(ego_xy[:L, 0] - h_xy[:L, 0], ego_xy[:L, 1] - h_xy[:L, 1])
    return float(np.maximum(0.0, ROBOT_RADIUS + r - d).sum())


def plan(handle: PlannerHandle, predictor, joint: JointState,
         history: Sequence[JointState], ctx: Context, rng: RngStream,
         human_radii: Optional[Sequence[float]] = None
         ) -> tuple[ActionTraj, ReplanEntry]:
    """Score every candidate by expected reward under the predictor's modes
    and execute the argmax (ties to the lowest candidate index).

    Expected reward decomposes exactly: progress/lane/control depend only on
    the candidate, and the collision term is additive over humans, so the
    expectation over independent per-human modes is a per-human weighted sum.
    """
    candidates = sample_candidates(handle, joint.robot, ctx, rng, start_t=joint.t)
    if not candidates:
        raise ValueError("empty candidate set")
    M = len(joint.humans)
    radii = list(human_radii) if human_radii is not None else [CAR_RADIUS] * M
    w = handle.weights

    expected = []
    pred_sets = []
    for cand in candidates:
        pred = predictor.predict(joint, history, cand, ctx, handle.n_modes)
        pred_sets.append(pred)
        progress, lane, _, ctrl = reward_terms(handle, cand, [], joint, ctx)
        exp_r = w.w_progress * progress + w.w_lane * lane + w.w_ctrl * ctrl
        ego_xy = rollout_positions(joint.robot, cand, handle.dt)
        for i in range(M):
            for mp in pred.humans[i]:
                h_xy = rollout_positions(joint.humans[i], mp.traj, handle.dt)
                exp_r += w.w_col * mp.prob * _overlap_sum(ego_xy, h_xy, radii[i])
        expected.append(exp_r)

    chosen_idx = int(np.argmax(expected))
    chosen = candidates[chosen_idx]
    chosen_pred = pred_sets[chosen_idx]

    # Reward of the chosen plan under every joint prediction mode combo.
    samples: list[tuple[float, float]] = []
    if M == 0:
        samples.append((reward(handle, chosen, [], joint, ctx), 1.0))
    else:
        combos = [((), 1.0)]
        for i in range(M):
            combos = [(idx + (k,), p * chosen_pred.humans[i][k].prob)
                      for idx, p in combos
                      for k in range(len(chosen_pred.humans[i]))]
        for idx, weight in combos:
            htrajs = [chosen_pred.humans[i][idx[i]].traj for i in range(M)]
            r = reward(handle, chosen, htrajs, joint, ctx, radii)
            samples.append((r, float(weight)))

    entry = ReplanEntry(
        t=joint.t,
        candidates=candidates,
        predicted_humans=chosen_pred,
        candidate_rewards_predicted=[float(r) for r in expected],
        executed_index=chosen_idx,
        predicted_reward_samples=samples,
    )
    return chosen, entry
