"""Electrode search controller and the expanding-circle exploration pattern.

One call to :func:`step` runs one pass of the search loop: try to detect the
electrodes, turn one degree towards them if they are off-centre, then creep
forward one centimetre, or hand over to the final approach once the target is
within the actuator's reach along its Z axis.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import world as W
from .delta_kin import DeltaGeometry, in_workspace
from .errors import InvalidState
from .geometry import Vec3, camera_to_delta

MAX_ATTEMPTS = 5

# Float noise from the camera round trip must not decide whether a target
# sitting exactly at the reach limit counts as reachable.
_REACH_EPS = 1e-9


class Phase(str, enum.Enum):
    DETECTING = "Detecting"
    ROTATING = "Rotating"
    ADVANCING = "Advancing"
    FINAL_APPROACH = "FinalApproach"
    DONE = "Done"
    FAILED = "Failed"


class Reason(str, enum.Enum):
    REACHED = "Reached"
    NOT_IN_VIEW = "NotInView"
    UNREACHABLE = "Unreachable"


TERMINAL = (Phase.DONE, Phase.FAILED)


@dataclass(frozen=True)
class SearchTiming:
    """Simulated seconds charged per action."""

    rotate_s: float = 0.5
    advance_s_per_cm: float = 1.0
    detect_s: float = 0.8


@dataclass(frozen=True)
class SearchParams:
    rotate_step_deg: float = 1.0
    advance_step_cm: float = 1.0
    reach_cm: float = 11.0
    final_advance_cm: float = 4.0
    center_tolerance_deg: float = 1.0
    max_attempts: int = MAX_ATTEMPTS


@dataclass(frozen=True)
class SearchState:
    phase: Phase = Phase.DETECTING
    attempts_left: int = MAX_ATTEMPTS
    steps: int = 0
    sim_time: float = 0.0
    iterations: int = 0
    # last detected electrode position in the DeltaCharger frame
    target: Vec3 | None = None
    failure: Reason | None = None

    @property
    def terminal(self) -> bool:
        return self.phase in TERMINAL


@dataclass(frozen=True)
class SearchOutcome:
    success: bool
    reason: Reason
    steps: int
    sim_time: float
    final_target_delta_frame: Vec3 | None = None

    def __post_init__(self):
        if self.success != (self.reason is Reason.REACHED):
            raise ValueError("success must coincide with reason == Reached")


def bearing_deg(p_delta: Vec3) -> float:
    """Horizontal angle of a DeltaCharger-frame point, positive to the right."""
    return math.degrees(math.atan2(p_delta.x, p_delta.z))


def step(state: SearchState, w: W.WorldState, d: W.DetectorModel,
         rng: np.random.Generator, params: SearchParams = SearchParams(),
         timing: SearchTiming = SearchTiming()) -> tuple[SearchState, W.WorldState]:
    if state.terminal:
        raise InvalidState(f"step() called in terminal phase {state.phase.value}")

    if state.phase is Phase.FINAL_APPROACH:
        w = W.advance(w, params.final_advance_cm)
        t = state.target
        # the platform has moved forward, so the stored target is that much closer
        t = Vec3(t.x, t.y, t.z - params.final_advance_cm)
        return replace(
            state,
            phase=Phase.DONE,
            steps=state.steps + 1,
            sim_time=state.sim_time + params.final_advance_cm * timing.advance_s_per_cm,
            iterations=state.iterations + 1,
            target=t,
        ), w

    sim_time = state.sim_time + timing.detect_s
    iterations = state.iterations + 1
    obs = W.observe(w, d, rng)
    if not obs.detected:
        left = state.attempts_left - 1
        if left <= 0:
            return replace(state, phase=Phase.FAILED, attempts_left=0, sim_time=sim_time,
                           iterations=iterations, failure=Reason.NOT_IN_VIEW), w
        return replace(state, phase=Phase.DETECTING, attempts_left=left,
                       sim_time=sim_time, iterations=iterations), w

    target = camera_to_delta(obs.bbox_center_cam, d.camera_pitch, d.camera_offset)
    steps = state.steps
    rotated = False
    b = bearing_deg(target)
    if abs(b) > params.center_tolerance_deg:
        w = W.rotate(w, math.copysign(params.rotate_step_deg, b))
        steps += 1
        sim_time += timing.rotate_s
        rotated = True

    if target.z <= params.reach_cm + _REACH_EPS:
        phase = Phase.FINAL_APPROACH
    else:
        w = W.advance(w, params.advance_step_cm)
        steps += 1
        sim_time += params.advance_step_cm * timing.advance_s_per_cm
        phase = Phase.ROTATING if rotated else Phase.ADVANCING

    return replace(state, phase=phase, attempts_left=params.max_attempts, steps=steps,
                   sim_time=sim_time, iterations=iterations, target=target), w


def iteration_bound(L: float, params: SearchParams = SearchParams()) -> int:
    """Upper bound on loop passes: retries, creeping forward, one full turn."""
    return params.max_attempts + 2 * math.ceil(L) + 360


def run_search(w: W.WorldState, d: W.DetectorModel, seed: int,
               geometry: DeltaGeometry | None = None,
               params: SearchParams = SearchParams(),
               timing: SearchTiming = SearchTiming(),
               trace: list | None = None) -> SearchOutcome:
    """Drive :func:`step` to a terminal phase and grade the final target.

    If ``trace`` is a list, every ``(state, world)`` pair is appended to it,
    starting with the initial one.
    """
    geometry = geometry or DeltaGeometry()
    rng = np.random.default_rng(seed)
    state = SearchState(attempts_left=params.max_attempts)
    bound = iteration_bound(w.distance_to_electrode(), params)
    if trace is not None:
        trace.append((state, w))
    while not state.terminal:
        if state.iterations >= bound:
            state = replace(state, phase=Phase.FAILED, failure=Reason.NOT_IN_VIEW)
            break
        state, w = step(state, w, d, rng, params, timing)
        if trace is not None:
            trace.append((state, w))

    if state.phase is Phase.FAILED:
        return SearchOutcome(False, state.failure or Reason.NOT_IN_VIEW,
                             state.steps, state.sim_time)
    if not in_workspace(geometry, state.target):
        return SearchOutcome(False, Reason.UNREACHABLE, state.steps, state.sim_time)
    return SearchOutcome(True, Reason.REACHED, state.steps, state.sim_time, state.target)


EXPLORATION_RADII_CM = (50.0, 100.0, 150.0, 200.0, 250.0)


def exploration_waypoints(center: W.Pose2, radii=EXPLORATION_RADII_CM,
                          per_circle: int = 8) -> list[W.Pose2]:
    """Waypoints on concentric circles around ``center``, inner circle first.

    Each waypoint faces radially outward; the first point on every circle
    lies straight ahead of ``center``'s heading.
    """
    out = []
    for r in radii:
        for k in range(per_circle):
            yaw = center.yaw + 360.0 * k / per_circle
            a = math.radians(yaw)
            out.append(W.Pose2(center.x + r * math.sin(a), center.y + r * math.cos(a), yaw))
    return out
