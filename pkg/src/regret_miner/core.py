"""Shared geometry, state containers, unicycle dynamics, and seeded RNG streams.

Everything downstream (simulation, planning, scoring) builds on the small
vocabulary defined here: agent states on SE(2) x speed, bounded action
trajectories, world contexts, and a hierarchical deterministic RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# Default integration step (seconds) and scene horizon (steps).
DT_DEFAULT = 0.1
HORIZON_DEFAULT = 200

# Action component bounds: |accel| m/s^2, |turn_rate| rad/s.
ACCEL_LIMIT = 4.0
TURN_LIMIT = 1.0

# Footprint radii (meters) by agent class.
ROBOT_RADIUS = 1.0
CAR_RADIUS = 1.0
TRUCK_RADIUS = 1.8
PEDESTRIAN_RADIUS = 0.3

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class AgentState:
    """Pose and forward speed of one agent.

    heading is stored wrapped to [-pi, pi); speed is non-negative (m/s).
    """

    x: float
    y: float
    heading: float
    speed: float = 0.0

    def __post_init__(self):
        _require_finite("AgentState", self.x, self.y, self.heading, self.speed)
        if self.speed < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "AgentState") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class JointState:
    """World snapshot at discrete time t: robot plus all humans."""

    robot: AgentState
    humans: tuple[AgentState, ...]
    t: int = 0

    def __post_init__(self):
        object.__setattr__(self, "humans", tuple(self.humans))
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")


class ActionTraj:
    """A bounded (accel, turn_rate) action sequence starting at step start_t.

    actions has shape (T, 2) with T >= 1; components are validated against
    the given magnitude bounds (defaults ACCEL_LIMIT / TURN_LIMIT) and the
    stored array is frozen read-only.
    """

    __slots__ = ("actions", "start_t")

    def __init__(self, actions, start_t: int = 0,
                 accel_limit: float = ACCEL_LIMIT, turn_limit: float = TURN_LIMIT):
        arr = np.asarray(actions, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise ValueError(f"actions must have shape (T>=1, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("actions must be finite")
        if np.any(np.abs(arr[:, 0]) > accel_limit + 1e-12):
            raise ValueError(f"|accel| exceeds bound {accel_limit}")
        if np.any(np.abs(arr[:, 1]) > turn_limit + 1e-12):
            raise ValueError(f"|turn_rate| exceeds bound {turn_limit}")
        if start_t < 0:
            raise ValueError(f"start_t must be >= 0, got {start_t}")
        arr = arr.copy()
        arr.setflags(write=False)
        self.actions = arr
        self.start_t = int(start_t)

    def __len__(self) -> int:
        return self.actions.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActionTraj):
            return NotImplemented
        return self.start_t == other.start_t and np.array_equal(self.actions, other.actions)

    def __repr__(self) -> str:
        return f"ActionTraj(T={len(self)}, start_t={self.start_t})"


@dataclass(frozen=True)
class DrivingCorridor:
    """Straight multi-lane corridor along +x.

    lane_centers are lateral (y) offsets of each lane center; lane_width is
    shared by all lanes; length is the corridor extent in x.
    """

    lane_centers: tuple[float, ...] = (0.0, 3.7)
    lane_width: float = 3.7
    length: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "lane_centers", tuple(float(c) for c in self.lane_centers))
        if len(self.lane_centers) < 1:
            raise ValueError("need at least one lane")
        if self.lane_width <= 0 or self.length <= 0:
            raise ValueError("lane_width and length must be positive")

    def nearest_center(self, y: float) -> float:
        return min(self.lane_centers, key=lambda c: abs(y - c))


@dataclass(frozen=True)
class NavWorld:
    """Open-floor navigation world with a primary and a backup goal."""

    goal_primary: tuple[float, float] = (0.0, 5.0)
    goal_backup: tuple[float, float] = (4.0, 0.0)
    human_start: tuple[float, float] = (0.0, 3.0)
    robot_start: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("goal_primary", "goal_backup", "human_start", "robot_start"):
            v = getattr(self, name)
            object.__setattr__(self, name, (float(v[0]), float(v[1])))
        if self.goal_primary == self.goal_backup:
            raise ValueError("goals must be distinct")


Context = Union[DrivingCorridor, NavWorld]


@dataclass(frozen=True)
class RngStream:
    """Deterministic hierarchical RNG handle.

    A (seed, stream_id) pair names one stream; derive(*ids) folds extra
    integers into a child stream via SeedSequence so sibling streams are
    independent and reproducible regardless of draw order elsewhere.
    """

    seed: int
    stream_id: int = 0

    def derive(self, *ids: int) -> "RngStream":
        ss = np.random.SeedSequence(entropy=(self.seed, self.stream_id) + tuple(int(i) for i in ids))
        child_seed, child_stream = (int(x) for x in ss.generate_state(2, dtype=np.uint64))
        return RngStream(child_seed, child_stream)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=(self.seed, self.stream_id))
        return np.random.Generator(np.random.Philox(ss))


def dubins_step(state: AgentState, turn_rate: float, speed: float,
                dt: float = DT_DEFAULT) -> AgentState:
    """One step of constant-speed Dubins dynamics (xdot = v cos h, ydot = v sin h,
    hdot = u), integrated exactly over dt.

    For turn_rate == 0 this is the straight-line update x += v cos(h) dt;
    for turn_rate != 0 the exact circular arc is used, which makes the step
    invariant to substep refinement (stepping dt is identical to stepping
    dt/k k times). Speed is carried through unchanged.
    """
    _require_finite("dubins_step", turn_rate, speed, dt)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    h0 = state.heading
    if abs(turn_rate) < 1e-12:
        dx = speed * math.cos(h0) * dt
        dy = speed * math.sin(h0) * dt
    else:
        h1 = h0 + turn_rate * dt
        dx = (speed / turn_rate) * (math.sin(h1) - math.sin(h0))
        dy = -(speed / turn_rate) * (math.cos(h1) - math.cos(h0))
    return AgentState(
        x=state.x + dx,
        y=state.y + dy,
        heading=wrap_angle(h0 + turn_rate * dt),
        speed=max(0.0, speed),
    )


def unicycle_step(state: AgentState, accel: float, turn_rate: float,
                  dt: float = DT_DEFAULT) -> AgentState:
    """One unicycle step: speed updates first (clamped at 0), then a
    dubins_step at the new speed."""
    new_speed = max(0.0, state.speed + accel * dt)
    return dubins_step(state, turn_rate, new_speed, dt)


def unicycle_rollout(state: AgentState, traj: ActionTraj,
                     dt: float = DT_DEFAULT) -> list[AgentState]:
    """Roll an action trajectory forward from state.

    Returns the T states reached after each of the T actions (the initial
    state is not included).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out: list[AgentState] = []
    cur = state
    for accel, turn in traj.actions:
        cur = unicycle_step(cur, float(accel), float(turn), dt)
        out.append(cur)
    return out


def rollout_positions(state: AgentState, traj: ActionTraj,
                      dt: float = DT_DEFAULT) -> np.ndarray:
    """(T, 2) array of x,y positions along a rollout."""
    return np.array([[s.x, s.y] for s in unicycle_rollout(state, traj, dt)])


def footprint_overlap(a: AgentState, b: AgentState, radius_a: float,
                      radius_b: float) -> float:
    """Penetration depth of two disc footprints: max(0, ra + rb - dist)."""
    if radius_a < 0 or radius_b < 0:
        raise ValueError("radii must be non-negative")
    return max(0.0, radius_a + radius_b - a.distance_to(b))
