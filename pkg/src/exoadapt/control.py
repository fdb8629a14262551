"""Adaptive-assistance state machine.

Lifecycle per lifting cycle: lock on a candidate, map the classified
payload class to a torque scale k_pyl, latch that command at lift onset,
ignore (but tag) anything arriving mid-cycle, cool down after the lift.
Single writer: events are fed strictly in time order through step().
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError, SequencingError
from .payload import PayloadClass, argmax_class
from .selection import LockedCandidate

DEFAULT_MEDIUM_FRACTION = 0.65
BASELINE_MEDIUM_FRACTION = 0.50
DEFAULT_COOLDOWN_S = 1.0
NOMINAL_PEAK_TORQUE_NM = 30.0


@dataclass(frozen=True)
class KpylRange:
    """Subject-specific torque-scale range; medium sits at a fraction of it."""

    k_min: float
    k_max: float
    medium_fraction: float = DEFAULT_MEDIUM_FRACTION

    def __post_init__(self):
        if not 0 < self.k_min <= self.k_max:
            raise InvalidParameterError(f"need 0 < k_min <= k_max, got ({self.k_min}, {self.k_max})")
        if not 0.0 <= self.medium_fraction <= 1.0:
            raise InvalidParameterError(f"medium_fraction {self.medium_fraction} outside [0, 1]")


def k_for_class(krange: KpylRange, cls: PayloadClass) -> float:
    """Light maps to k_min, Heavy to k_max, Medium to the configured
    fraction of the range (65% per the validated modulation rule)."""
    if cls is PayloadClass.LIGHT:
        return krange.k_min
    if cls is PayloadClass.HEAVY:
        return krange.k_max
    return krange.k_min + krange.medium_fraction * (krange.k_max - krange.k_min)


@dataclass(frozen=True)
class AssistanceCommand:
    t: float
    k_pyl: float
    source_class: PayloadClass
    source: str  # "classified" | "fallback"
    state: str   # machine state when issued

    def to_json_line(self) -> str:
        # field order is part of the format (golden-file stable)
        return json.dumps(
            {
                "t": self.t,
                "k_pyl": self.k_pyl,
                "class": self.source_class.label,
                "state": self.state,
            }
        )


@dataclass(frozen=True)
class TorqueProfile:
    """Base assistive-torque trajectory over one lifting cycle."""

    times: np.ndarray
    torques_nm: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        torques = np.asarray(self.torques_nm, dtype=float)
        if times.shape != torques.shape or times.ndim != 1 or times.size == 0:
            raise InvalidParameterError("profile needs matching nonempty time/torque series")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "torques_nm", torques)

    @property
    def peak_nm(self) -> float:
        return float(np.max(np.abs(self.torques_nm)))


def scaled_profile(profile: TorqueProfile, k: float) -> TorqueProfile:
    """Pointwise torque scaling by the commanded k_pyl."""
    return TorqueProfile(times=profile.times, torques_nm=profile.torques_nm * k)


class ControlState(Enum):
    IDLE = "idle"
    LOCKED = "locked"
    LIFTING = "lifting"
    COOLDOWN = "cooldown"


# -- events -----------------------------------------------------------------


@dataclass(frozen=True)
class LockEvent:
    t: float
    candidate: LockedCandidate | None = None


@dataclass(frozen=True)
class ClassificationEvent:
    t: float
    probs: tuple


@dataclass(frozen=True)
class LiftOnsetEvent:
    t: float
    truth: PayloadClass | None = None


@dataclass(frozen=True)
class LiftEndEvent:
    t: float


@dataclass(frozen=True)
class LateClassification:
    t: float
    predicted: PayloadClass
    probs: tuple


class ControlStateMachine:
    """Idle -> Locked -> Lifting -> Cooldown -> Idle, one command per lift.

    The command for a cycle is created at classification time and updated
    in place by later pre-onset classifications (last one wins); lift
    onset latches it into command_log. A lift reached with no
    classification latches the fallback class at onset. Classifications
    during the lift never touch the command; they are tagged late.
    """

    def __init__(
        self,
        krange: KpylRange,
        fallback: PayloadClass = PayloadClass.LIGHT,
        cooldown_s: float = DEFAULT_COOLDOWN_S,
    ):
        self.krange = krange
        self.fallback = fallback
        self.cooldown_s = cooldown_s
        self.state = ControlState.IDLE
        self.candidate: LockedCandidate | None = None
        self.pending: AssistanceCommand | None = None
        self.command_log: list[AssistanceCommand] = []
        self.late_by_lift: list[list[LateClassification]] = []
        self._late_current: list[LateClassification] | None = None
        self._last_t = -np.inf
        self._cooldown_until = -np.inf

    def advance(self, t: float):
        """Move the clock forward (cooldown expires lazily on the next event)."""
        if t < self._last_t:
            raise SequencingError(f"event at t={t} after t={self._last_t}")
        self._last_t = t
        if self.state is ControlState.COOLDOWN and t >= self._cooldown_until:
            self.state = ControlState.IDLE

    def step(self, event) -> AssistanceCommand | None:
        """Advance the machine; returns a command when one is (re)issued."""
        t = event.t
        self.advance(t)

        if isinstance(event, LockEvent):
            if self.state is ControlState.IDLE:
                self.state = ControlState.LOCKED
                self.candidate = event.candidate
                self.pending = None
            return None

        if isinstance(event, ClassificationEvent):
            if self.state is ControlState.LOCKED:
                cls = argmax_class(event.probs)
                if self.pending is not None and self.pending.source_class is cls:
                    return None
                self.pending = AssistanceCommand(
                    t=t,
                    k_pyl=k_for_class(self.krange, cls),
                    source_class=cls,
                    source="classified",
                    state=ControlState.LOCKED.value,
                )
                return self.pending
            if self.state is ControlState.LIFTING:
                self._late_current.append(
                    LateClassification(t=t, predicted=argmax_class(event.probs), probs=tuple(event.probs))
                )
            return None

        if isinstance(event, LiftOnsetEvent):
            if self.state is ControlState.LIFTING:
                raise SequencingError(f"lift onset at t={t} inside an open lifting cycle")
            latched = self.pending
            issued = None
            if latched is None:
                latched = AssistanceCommand(
                    t=t,
                    k_pyl=k_for_class(self.krange, self.fallback),
                    source_class=self.fallback,
                    source="fallback",
                    state=ControlState.LIFTING.value,
                )
                issued = latched
            self.command_log.append(latched)
            self._late_current = []
            self.late_by_lift.append(self._late_current)
            self.pending = None
            self.state = ControlState.LIFTING
            return issued

        if isinstance(event, LiftEndEvent):
            if self.state is not ControlState.LIFTING:
                raise SequencingError(f"lift end at t={t} without a matching onset")
            self.state = ControlState.COOLDOWN
            self._cooldown_until = t + self.cooldown_s
            self.candidate = None
            self._late_current = None
            return None

        raise SequencingError(f"unknown event type {type(event).__name__}")
