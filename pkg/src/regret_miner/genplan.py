"""Reward-free generative planner path for the social-nav world.

A discrete codebook (categorical encoder over latent codes conditioned on the
human cue and robot goal, diagonal-Gaussian decoder over the concatenated
joint action trajectory) stands in for a learned trajectory model. Regret is
computed without rewards: candidate likelihoods come from kernel-density
window masses around the executed and counterfactual actions, conditioned on
the human's realized behavior.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .core import (
    TURN_LIMIT,
    ActionTraj,
    AgentState,
    NavWorld,
    RngStream,
    unicycle_step,
    wrap_angle,
)

GOALS = ("Primary", "Backup")
HUMAN_CLASSES = ("left", "straight", "right")

NAV_STEPS = 6
NAV_DT = 1.0
ROBOT_NAV_SPEED = 0.8
HUMAN_NAV_SPEED = 0.5
YIELD_PROB = 0.8
PROXIMITY_TRIGGER = 1.0
N_CUE_BUCKETS = 12

_HUMAN_TARGETS = {"left": (-3.0, 3.0), "straight": (0.0, 0.0), "right": (3.0, 3.0)}

# Fixed internal stream for decoder sampling, so likelihood evaluation is a
# deterministic function of (codebook, query, n_samples).
_KDE_SEED = 987654321


class OutOfSupportError(ValueError):
    """Raised when the conditioning denominator has no sampled support."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

def _nav_positions(start_xy, heading0: float, speed: float,
                   turns: np.ndarray) -> np.ndarray:
    """Positions after each of the 6 constant-speed steps."""
    state = AgentState(start_xy[0], start_xy[1], heading0, speed)
    out = np.empty((len(turns), 2))
    for k, w in enumerate(turns):
        state = unicycle_step(state, 0.0, float(w), NAV_DT)
        out[k] = (state.x, state.y)
    return out


def classify_human_direction(human_traj: ActionTraj,
                             ctx: Optional[NavWorld] = None) -> int:
    """0 left / 1 straight / 2 right, by nearest rollout endpoint target."""
    ctx = ctx if ctx is not None else NavWorld()
    end = _nav_positions(ctx.human_start, -math.pi / 2, HUMAN_NAV_SPEED,
                         human_traj.actions[:, 1])[-1]
    targets = [_HUMAN_TARGETS[c] for c in HUMAN_CLASSES]
    d = [math.hypot(end[0] - tx, end[1] - ty) for tx, ty in targets]
    return int(np.argmin(d))


def classify_final_goal(robot_traj: ActionTraj,
                        ctx: Optional[NavWorld] = None) -> str:
    """Goal whose location is nearer the robot's rollout endpoint."""
    ctx = ctx if ctx is not None else NavWorld()
    end = _nav_positions(ctx.robot_start, math.pi / 2, ROBOT_NAV_SPEED,
                         robot_traj.actions[:, 1])[-1]
    d_primary = math.hypot(end[0] - ctx.goal_primary[0], end[1] - ctx.goal_primary[1])
    d_backup = math.hypot(end[0] - ctx.goal_backup[0], end[1] - ctx.goal_backup[1])
    return GOALS[0] if d_primary <= d_backup else GOALS[1]


@dataclass(frozen=True)
class NavSample:
    """One synthetic social-nav episode.

    delta_h is the human's scalar cue in [0,1]; goal is the robot's intended
    goal; outcome_class indexes (human direction x robot final goal).
    """

    delta_h: float
    goal: str
    human_traj: ActionTraj
    robot_traj: ActionTraj
    outcome_class: int

    def __post_init__(self):
        if not (0.0 <= self.delta_h <= 1.0):
            raise ValueError("delta_h must be in [0, 1]")
        if self.goal not in GOALS:
            raise ValueError(f"goal must be one of {GOALS}")
        if len(self.human_traj) != NAV_STEPS or len(self.robot_traj) != NAV_STEPS:
            raise ValueError(f"trajectories must have exactly {NAV_STEPS} steps")
        if not (0 <= self.outcome_class < 6):
            raise ValueError("outcome_class must be in 0..5")
        derived = classify_human_direction(self.human_traj) * 2 + \
            GOALS.index(self.goal)
        if derived != self.outcome_class:
            raise ValueError(
                f"outcome_class {self.outcome_class} inconsistent with "
                f"(human direction x robot goal) classification {derived}"
            )


@dataclass
class Codebook:
    """Categorical encoder + per-code diagonal-Gaussian decoder.

    encoder has shape (cue buckets, goals, K) with each row a distribution;
    means/stds have shape (K, 12): robot turn commands then human turn
    commands, one scalar per timestep per agent.
    """

    K: int
    encoder: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    noise_sigma: float = 0.05

    def __post_init__(self):
        self.encoder = np.asarray(self.encoder, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)
        if self.encoder.shape != (N_CUE_BUCKETS, len(GOALS), self.K):
            raise ValueError("encoder table shape mismatch")
        sums = self.encoder.sum(axis=2)
        if not np.allclose(sums, 1.0, atol=1e-12):
            raise ValueError("encoder rows must sum to 1 within 1e-12")
        if self.means.shape != (self.K, 2 * NAV_STEPS):
            raise ValueError("decoder means shape mismatch")
        if self.stds.shape != (self.K, 2 * NAV_STEPS):
            raise ValueError("decoder stds shape mismatch")
        if not np.all(self.stds > 0):
            raise ValueError("decoder variances must be positive")

    def encoder_row(self, delta_h: float, goal: str) -> np.ndarray:
        b = cue_bucket(delta_h)
        return self.encoder[b, GOALS.index(goal)]


@dataclass(frozen=True)
class SensorModel:
    """Binary obstacle sensor with optional forced output."""

    detect_true_positive: float = 1.0
    detect_false_positive: float = 0.0
    injected_fault: Optional[bool] = None

    def __post_init__(self):
        for p in (self.detect_true_positive, self.detect_false_positive):
            if not (0.0 <= p <= 1.0):
                raise ValueError("sensor probabilities must be in [0, 1]")

    def sense(self, obstacle_present: bool, gen: np.random.Generator) -> bool:
        if self.injected_fault is not None:
            return bool(self.injected_fault)
        p = self.detect_true_positive if obstacle_present else self.detect_false_positive
        return bool(gen.uniform() < p)


def cue_bucket(delta_h: float) -> int:
    return min(N_CUE_BUCKETS - 1, int(delta_h * N_CUE_BUCKETS))


# ---------------------------------------------------------------------------
# Synthetic rule dataset
# ---------------------------------------------------------------------------

def _pc_turn(state: AgentState, target, gain: float = 1.0) -> float:
    desired = math.atan2(target[1] - state.y, target[0] - state.x)
    return float(np.clip(gain * wrap_angle(desired - state.heading),
                         -TURN_LIMIT, TURN_LIMIT))


def _simulate_human(cue_class: str, gen: np.random.Generator,
                    exec_noise: float, ctx: NavWorld) -> tuple[ActionTraj, np.ndarray]:
    target = _HUMAN_TARGETS[cue_class]
    state = AgentState(ctx.human_start[0], ctx.human_start[1], -math.pi / 2,
                       HUMAN_NAV_SPEED)
    turns = np.empty(NAV_STEPS)
    pos = np.empty((NAV_STEPS, 2))
    for k in range(NAV_STEPS):
        w = _pc_turn(state, target) + gen.normal(0.0, exec_noise)
        w = float(np.clip(w, -TURN_LIMIT, TURN_LIMIT))
        state = unicycle_step(state, 0.0, w, NAV_DT)
        turns[k] = w
        pos[k] = (state.x, state.y)
    acts = np.column_stack([np.zeros(NAV_STEPS), turns])
    return ActionTraj(acts, start_t=0), pos


def _simulate_robot(goal: str, human_pos: np.ndarray, gen: np.random.Generator,
                    exec_noise: float, ctx: NavWorld,
                    yield_draw: Optional[bool] = None
                    ) -> tuple[ActionTraj, bool, str]:
    """Returns (robot_traj, triggered, final_goal)."""
    targets = {"Primary": ctx.goal_primary, "Backup": ctx.goal_backup}
    current = goal
    state = AgentState(ctx.robot_start[0], ctx.robot_start[1], math.pi / 2,
                       ROBOT_NAV_SPEED)
    triggered = False
    turns = np.empty(NAV_STEPS)
    for k in range(NAV_STEPS):
        d = math.hypot(state.x - human_pos[k][0], state.y - human_pos[k][1])
        if not triggered and d < PROXIMITY_TRIGGER:
            triggered = True
            do_yield = yield_draw if yield_draw is not None \
                else bool(gen.uniform() < YIELD_PROB)
            if do_yield:
                current = GOALS[1 - GOALS.index(current)]
        w = _pc_turn(state, targets[current]) + gen.normal(0.0, exec_noise)
        w = float(np.clip(w, -TURN_LIMIT, TURN_LIMIT))
        state = unicycle_step(state, 0.0, w, NAV_DT)
        turns[k] = w
    acts = np.column_stack([np.zeros(NAV_STEPS), turns])
    return ActionTraj(acts, start_t=0), triggered, current


def _cue_class(delta: float) -> str:
    if delta < 1.0 / 3.0:
        return "left"
    if delta > 2.0 / 3.0:
        return "right"
    return "straight"


def simulate_nav_scene(delta_h: float, goal: str, rng: RngStream,
                       epsilon_sigma: float = 0.05, exec_noise: float = 0.05,
                       yield_draw: Optional[bool] = None):
    """One episode of the rule world.

    Returns (NavSample, triggered flag, final goal). The human heads left /
    straight / right according to its noisy cue; the robot runs proportional
    control to its goal and, on first coming within the proximity threshold
    of the human, diverts to the other goal with probability 0.8 (or per
    yield_draw when forced).
    """
    ctx = NavWorld()
    gen = rng.generator()
    eps = gen.normal(0.0, epsilon_sigma)
    cls = _cue_class(delta_h + eps)
    human_traj, human_pos = _simulate_human(cls, gen, exec_noise, ctx)
    robot_traj, triggered, final_goal = _simulate_robot(
        goal, human_pos, gen, exec_noise, ctx, yield_draw)
    outcome = HUMAN_CLASSES.index(cls) * 2 + GOALS.index(goal)
    sample = NavSample(delta_h=delta_h, goal=goal, human_traj=human_traj,
                       robot_traj=robot_traj, outcome_class=outcome)
    return sample, triggered, final_goal


def generate_nav_dataset(n: int = 10_000, epsilon_sigma: float = 0.05,
                         rng: Optional[RngStream] = None,
                         stats: Optional[dict] = None) -> list[NavSample]:
    """Uniform cue and goal draws; if a dict is passed as stats, it is filled
    with 'triggered' and 'yielded' episode counts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    root = rng if rng is not None else RngStream(0)
    if stats is not None:
        stats.update(triggered=0, yielded=0)
    out = []
    for i in range(n):
        child = root.derive(4, i)
        gen = child.generator()
        delta = float(gen.uniform())
        goal = GOALS[int(gen.integers(0, 2))]
        sample, trig, final = simulate_nav_scene(delta, goal, child.derive(1),
                                                 epsilon_sigma=epsilon_sigma)
        if stats is not None:
            stats["triggered"] += int(trig)
            stats["yielded"] += int(final != goal)
        out.append(sample)
    return out


# ---------------------------------------------------------------------------
# Codebook fit / sample
# ---------------------------------------------------------------------------

def _class_to_code(outcome_class: int, K: int) -> int:
    if K >= 6:
        return outcome_class
    return outcome_class % K


def _joint_vector(s: NavSample) -> np.ndarray:
    return np.concatenate([s.robot_traj.actions[:, 1], s.human_traj.actions[:, 1]])


def fit_codebook(data: Sequence[NavSample], K: int = 6,
                 smoothing: float = 0.5, noise_sigma: float = 0.05) -> Codebook:
    """Codes are anchored to outcome classes; the encoder is the smoothed
    empirical code frequency per (cue bucket, goal); the decoder is the
    per-code sample mean/std of the concatenated joint turn trajectory."""
    if not data:
        raise ValueError("data must be non-empty")
    if K < 1:
        raise ValueError("K must be >= 1")
    codes = np.array([_class_to_code(s.outcome_class, K) for s in data])
    counts = np.bincount(codes, minlength=K)
    if np.any(counts < 2):
        missing = [int(z) for z in np.flatnonzero(counts < 2)]
        raise ValueError(f"codes {missing} have fewer than 2 samples")
    enc = np.full((N_CUE_BUCKETS, len(GOALS), K), smoothing)
    for s, z in zip(data, codes):
        enc[cue_bucket(s.delta_h), GOALS.index(s.goal), z] += 1.0
    enc /= enc.sum(axis=2, keepdims=True)
    means = np.empty((K, 2 * NAV_STEPS))
    stds = np.empty((K, 2 * NAV_STEPS))
    vecs = np.array([_joint_vector(s) for s in data])
    for z in range(K):
        sel = vecs[codes == z]
        means[z] = sel.mean(axis=0)
        stds[z] = np.maximum(sel.std(axis=0), 1e-3)
    return Codebook(K=K, encoder=enc, means=means, stds=stds,
                    noise_sigma=noise_sigma)


def plan_generative(cb: Codebook, delta_h: float, goal: str,
                    rng: RngStream) -> tuple[ActionTraj, ActionTraj]:
    """Sample a code from the encoder row, decode mean + jitter, split."""
    gen = rng.generator()
    row = cb.encoder_row(delta_h, goal)
    z = int(gen.choice(cb.K, p=row))
    joint = cb.means[z] + cb.noise_sigma * gen.standard_normal(2 * NAV_STEPS)
    joint = np.clip(joint, -TURN_LIMIT, TURN_LIMIT)
    robot = ActionTraj(np.column_stack([np.zeros(NAV_STEPS), joint[:NAV_STEPS]]))
    human = ActionTraj(np.column_stack([np.zeros(NAV_STEPS), joint[NAV_STEPS:]]))
    return robot, human


# ---------------------------------------------------------------------------
# KDE likelihoods
# ---------------------------------------------------------------------------

def kde_window_mass(samples, bandwidth: float, center: float,
                    delta: float) -> float:
    """Mass of the Gaussian KDE within [center-delta, center+delta]:
    (1/n) sum_i [Phi((c+d-x_i)/h) - Phi((c-d-x_i)/h)]."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("samples must be a non-empty vector")
    if bandwidth <= 0 or delta <= 0:
        raise ValueError("bandwidth and delta must be positive")
    hi = ndtr((center + delta - x) / bandwidth)
    lo = ndtr((center - delta - x) / bandwidth)
    return float(np.mean(hi - lo))


def _code_draws(cb: Codebook, n_samples: int) -> np.ndarray:
    """(K, n_samples, 12) decoder draws from a fixed internal stream."""
    out = np.empty((cb.K, n_samples, 2 * NAV_STEPS))
    for z in range(cb.K):
        gen = RngStream(_KDE_SEED, 11).derive(z, n_samples).generator()
        out[z] = cb.means[z] + cb.stds[z] * gen.standard_normal(
            (n_samples, 2 * NAV_STEPS))
    return out


def _window_masses(draws: np.ndarray, queries: np.ndarray, delta: float,
                   bandwidth: float) -> np.ndarray:
    """draws (K, n, D), queries (..., D) -> masses (K, ..., D)."""
    q = queries[np.newaxis, ..., np.newaxis, :]       # (1, ..., 1, D)
    d = draws.reshape(draws.shape[0], *([1] * (queries.ndim - 1)),
                      draws.shape[1], draws.shape[2])  # (K, 1.., n, D)
    hi = ndtr((q + delta - d) / bandwidth)
    lo = ndtr((q - delta - d) / bandwidth)
    return np.mean(hi - lo, axis=-2)                   # (K, ..., D)


_DEN_FLOOR = 1e-300


def counterfactual_prob(cb: Codebook, robot_traj: ActionTraj,
                        observed_human_traj: ActionTraj, delta_h: float,
                        goal: str, n_samples: int = 250, delta: float = 0.1,
                        bandwidth: float = 0.05) -> float:
    """P(robot actions | observed human actions, cue, goal) under the code
    mixture, via per-timestep KDE window masses multiplied across timesteps
    and agents; the denominator marginalizes the robot dimensions."""
    if len(robot_traj) != NAV_STEPS or len(observed_human_traj) != NAV_STEPS:
        raise ValueError(f"trajectories must have exactly {NAV_STEPS} steps")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    w = cb.encoder_row(delta_h, goal)
    draws = _code_draws(cb, n_samples)
    query = np.concatenate([robot_traj.actions[:, 1],
                            observed_human_traj.actions[:, 1]])
    masses = _window_masses(draws, query, delta, bandwidth)  # (K, 12)
    num = float(np.dot(w, masses.prod(axis=1)))
    den = float(np.dot(w, masses[:, NAV_STEPS:].prod(axis=1)))
    if den < _DEN_FLOOR:
        raise OutOfSupportError(
            "observed human behavior has no support under the codebook")
    return float(np.clip(num / den, 0.0, 1.0))


def default_hindsight_candidates(executed: ActionTraj,
                                 ctx: Optional[NavWorld] = None
                                 ) -> list[ActionTraj]:
    """9 proportional-control trajectories (3 bearings x 3 gains) plus the
    executed trajectory (always last)."""
    ctx = ctx if ctx is not None else NavWorld()
    mid = ((ctx.goal_primary[0] + ctx.goal_backup[0]) / 2.0,
           (ctx.goal_primary[1] + ctx.goal_backup[1]) / 2.0)
    cands = []
    for target in (ctx.goal_primary, ctx.goal_backup, mid):
        for gain in (0.5, 1.0, 2.0):
            state = AgentState(ctx.robot_start[0], ctx.robot_start[1],
                               math.pi / 2, ROBOT_NAV_SPEED)
            turns = np.empty(NAV_STEPS)
            for k in range(NAV_STEPS):
                wv = _pc_turn(state, target, gain)
                state = unicycle_step(state, 0.0, wv, NAV_DT)
                turns[k] = wv
            cands.append(ActionTraj(np.column_stack([np.zeros(NAV_STEPS), turns])))
    cands.append(executed)
    return cands


def generative_regret(cb: Codebook, executed_robot_traj: ActionTraj,
                      observed_human_traj: ActionTraj, delta_h: float,
                      goal: str,
                      hindsight_candidates: Optional[Sequence[ActionTraj]] = None,
                      n_samples: int = 250, delta: float = 0.1,
                      bandwidth: float = 0.05) -> float:
    """Mean over timesteps of (max candidate likelihood - executed
    likelihood), with per-timestep likelihoods from the code-mixture KDE."""
    if hindsight_candidates is None:
        cands = default_hindsight_candidates(executed_robot_traj)
    else:
        cands = list(hindsight_candidates)
    exec_idx = None
    for i, c in enumerate(cands):
        if c == executed_robot_traj:
            exec_idx = i
            break
    if exec_idx is None:
        raise ValueError("executed trajectory must be in hindsight_candidates")

    w = cb.encoder_row(delta_h, goal)
    draws = _code_draws(cb, n_samples)
    obs = observed_human_traj.actions[:, 1]
    cand_turns = np.stack([c.actions[:, 1] for c in cands])  # (C, 6)

    m_h = _window_masses(draws[:, :, NAV_STEPS:], obs, delta, bandwidth)  # (K, 6)
    m_r = _window_masses(draws[:, :, :NAV_STEPS], cand_turns,
                         delta, bandwidth)                     # (K, C, 6)
    den = np.einsum("k,kt->t", w, m_h)                        # (6,)
    if np.any(den < _DEN_FLOOR):
        raise OutOfSupportError(
            "observed human behavior has no support under the codebook")
    num = np.einsum("k,kt,kct->ct", w, m_h, m_r)              # (C, 6)
    lik = np.clip(num / den[np.newaxis, :], 0.0, 1.0)
    per_t = lik.max(axis=0) - lik[exec_idx]
    return float(np.mean(per_t))


# ---------------------------------------------------------------------------
# Mismatch scenario builders (nominal / collision / irrelevant)
# ---------------------------------------------------------------------------

def divert_shape_candidate() -> ActionTraj:
    """Noise-free robot trajectory of the yield policy branch: proportional
    control to the primary goal until the proximity trigger, then to backup."""
    sample, triggered, _ = simulate_nav_scene(
        0.5, "Primary", RngStream(7, 13), epsilon_sigma=0.0, exec_noise=0.0,
        yield_draw=True)
    assert triggered
    return sample.robot_traj


def build_mismatch_scenarios(cb: Codebook, rng: RngStream, n_reps: int = 30,
                             **regret_kw) -> dict[str, float]:
    """Mean generative regret for the three canned deployments.

    nominal: head-on human, robot yields to the backup goal (the common
    branch). collision: head-on human, robot pushes to the primary goal
    through the human's path. irrelevant: crossing human the robot never
    interacts with; the robot's path is unaffected regardless of what was
    anticipated for the human.
    """
    configs = {
        "nominal": (0.5, "Primary", True),
        "collision": (0.5, "Primary", False),
        "irrelevant": (1.0 / 6.0, "Primary", None),
    }
    divert = divert_shape_candidate()
    out = {}
    for name, (delta_h, goal, yield_draw) in configs.items():
        vals = []
        for i in range(n_reps):
            sample, _, _ = simulate_nav_scene(
                rng.derive(hashn(name), i, 0).generator().uniform(
                    *{"nominal": (0.4, 0.6), "collision": (0.4, 0.6),
                      "irrelevant": (0.05, 0.28)}[name]),
                goal, rng.derive(hashn(name), i), epsilon_sigma=0.0,
                exec_noise=0.02, yield_draw=yield_draw)
            cands = default_hindsight_candidates(sample.robot_traj)
            cands.insert(0, divert)
            vals.append(generative_regret(cb, sample.robot_traj,
                                          sample.human_traj, sample.delta_h,
                                          goal, hindsight_candidates=cands,
                                          **regret_kw))
        out[name] = float(np.mean(vals))
    return out


def hashn(name: str) -> int:
    """Stable small integer tag for a scenario name (process-independent)."""
    return sum((i + 1) * b for i, b in enumerate(name.encode())) % 65521


# ---------------------------------------------------------------------------
# Perception-failure case study
# ---------------------------------------------------------------------------

def _perception_robot(goal: str, gen: np.random.Generator, exec_noise: float,
                      ctx: NavWorld) -> ActionTraj:
    target = ctx.goal_primary if goal == "Primary" else ctx.goal_backup
    state = AgentState(ctx.robot_start[0], ctx.robot_start[1], math.pi / 2,
                       ROBOT_NAV_SPEED)
    turns = np.empty(NAV_STEPS)
    for k in range(NAV_STEPS):
        w = _pc_turn(state, target) + gen.normal(0.0, exec_noise)
        w = float(np.clip(w, -TURN_LIMIT, TURN_LIMIT))
        state = unicycle_step(state, 0.0, w, NAV_DT)
        turns[k] = w
    return ActionTraj(np.column_stack([np.zeros(NAV_STEPS), turns]))


def _fit_perception_codebook(n_fit: int, exec_noise: float,
                             rng: RngStream) -> Codebook:
    """K=2 codebook over robot behavior: code 0 = clear path to the primary
    goal, code 1 = obstacle ahead, divert to the backup goal. The encoder
    keys on the goal implied by the ground-truth obstacle bit; human
    dimensions are inert (no walker in this world)."""
    ctx = NavWorld()
    vecs = {0: [], 1: []}
    for i in range(n_fit):
        for bit in (0, 1):
            gen = rng.derive(bit, i).generator()
            goal = "Primary" if bit == 0 else "Backup"
            traj = _perception_robot(goal, gen, exec_noise, ctx)
            vec = np.concatenate([traj.actions[:, 1], np.zeros(NAV_STEPS)])
            vecs[bit].append(vec)
    means = np.empty((2, 2 * NAV_STEPS))
    stds = np.empty((2, 2 * NAV_STEPS))
    for bit in (0, 1):
        arr = np.array(vecs[bit])
        means[bit] = arr.mean(axis=0)
        stds[bit] = np.maximum(arr.std(axis=0), 1e-3)
    enc = np.zeros((N_CUE_BUCKETS, len(GOALS), 2))
    enc[:, 0, 0] = 1.0   # goal Primary rows -> code 0
    enc[:, 1, 1] = 1.0   # goal Backup rows -> code 1
    return Codebook(K=2, encoder=enc, means=means, stds=stds,
                    noise_sigma=exec_noise)


def perception_case_study(sensor: SensorModel,
                          n_samples_per_condition: int = 500,
                          rng: Optional[RngStream] = None,
                          delta: float = 0.1, bandwidth: float = 0.05,
                          n_samples: int = 250,
                          exec_noise: float = 0.02) -> list[tuple[str, float]]:
    """Four deployments of an obstacle-conditional goal policy.

    The robot diverts to the backup goal iff its sensor reports an obstacle.
    Regret conditions on the ground-truth obstacle bit, so deployments where
    the sensed bit disagrees with reality score high.
    """
    if rng is None:
        rng = RngStream(0)
    ctx = NavWorld()
    cb = _fit_perception_codebook(200, exec_noise, rng.derive(0))
    flat_human = ActionTraj(np.zeros((NAV_STEPS, 2)))
    conditions = [
        ("obstacle-detected", True, True),
        ("obstacle-missed", True, False),
        ("empty-clear", False, False),
        ("empty-false-alarm", False, True),
    ]
    results = []
    for tag, obstacle, forced_reading in conditions:
        forced = replace(sensor, injected_fault=forced_reading)
        true_goal = "Backup" if obstacle else "Primary"
        vals = []
        for i in range(n_samples_per_condition):
            gen = rng.derive(hashn(tag), i).generator()
            sensed = forced.sense(obstacle, gen)
            exec_goal = "Backup" if sensed else "Primary"
            executed = _perception_robot(exec_goal, gen, exec_noise, ctx)
            vals.append(generative_regret(
                cb, executed, flat_human, 0.5, true_goal,
                n_samples=n_samples, delta=delta, bandwidth=bandwidth))
        results.append((tag, float(np.mean(vals))))
    return results


# ---------------------------------------------------------------------------
# Serialization (nav/1, codebook/1)
# ---------------------------------------------------------------------------

def nav_samples_to_json(samples: Sequence[NavSample]) -> str:
    return json.dumps({
        "schema": "nav/1",
        "samples": [
            {
                "delta_h": s.delta_h,
                "goal": s.goal,
                "human_actions": s.human_traj.actions.tolist(),
                "robot_actions": s.robot_traj.actions.tolist(),
                "outcome_class": s.outcome_class,
            }
            for s in samples
        ],
    })


def nav_samples_from_json(text: str) -> list[NavSample]:
    doc = json.loads(text)
    if doc.get("schema") != "nav/1":
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    return [
        NavSample(
            delta_h=d["delta_h"],
            goal=d["goal"],
            human_traj=ActionTraj(np.array(d["human_actions"])),
            robot_traj=ActionTraj(np.array(d["robot_actions"])),
            outcome_class=d["outcome_class"],
        )
        for d in doc["samples"]
    ]


def codebook_to_json(cb: Codebook) -> str:
    return json.dumps({
        "schema": "codebook/1",
        "K": cb.K,
        "encoder": cb.encoder.tolist(),
        "means": cb.means.tolist(),
        "stds": cb.stds.tolist(),
        "noise_sigma": cb.noise_sigma,
    })


def codebook_from_json(text: str) -> Codebook:
    doc = json.loads(text)
    if doc.get("schema") != "codebook/1":
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    return Codebook(
        K=doc["K"],
        encoder=np.array(doc["encoder"]),
        means=np.array(doc["means"]),
        stds=np.array(doc["stds"]),
        noise_sigma=doc["noise_sigma"],
    )
