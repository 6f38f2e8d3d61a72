"""
Remote estimator specifications and their state machines.

Four estimators are supported.  All of them hold the most recent sample;
they differ in when (if ever) they give up on it and switch to the
stationary mode ``i*``:

* ``Martingale``  never switches.
* ``Exponential`` switches when an Exp(lam) clock started at the sample fires.
* ``Erlang``      switches after ``gamma - 1`` ticks of rate ``lam * gamma``.
* ``TauMap``      switches once more than ``tau`` time has elapsed.

``lam == 0`` is accepted for Exponential and Erlang and behaves exactly like
the martingale estimator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import InvalidSpec, InvalidStateIndex, PhaseOverflow

__all__ = [
    "Martingale",
    "Exponential",
    "Erlang",
    "TauMap",
    "EstimatorSpec",
    "EstimatorState",
    "ExpClock",
    "Deadline",
    "spec_from_json",
    "spec_to_json",
    "as_erlang",
    "initial_state",
    "on_sample",
    "on_phase_tick",
    "on_timer",
    "on_deadline",
    "advance",
    "current_estimate",
    "pending_events",
]


def _check_rate(lam, what="lambda"):
    if not (isinstance(lam, (int, float)) and math.isfinite(lam) and lam >= 0):
        raise InvalidSpec(f"{what} must be a finite nonnegative number, got {lam!r}")


@dataclass(frozen=True)
class Martingale:
    kind = "martingale"


@dataclass(frozen=True)
class Exponential:
    lam: float
    kind = "exponential"

    def __post_init__(self):
        _check_rate(self.lam)


@dataclass(frozen=True)
class Erlang:
    gamma: int
    lam: float
    kind = "erlang"

    def __post_init__(self):
        if isinstance(self.gamma, bool) or not isinstance(self.gamma, int) or self.gamma < 2:
            raise InvalidSpec(f"gamma must be an integer >= 2, got {self.gamma!r}")
        _check_rate(self.lam)

    @property
    def tick_rate(self) -> float:
        return self.lam * self.gamma


@dataclass(frozen=True)
class TauMap:
    tau: float
    kind = "tau_map"

    def __post_init__(self):
        _check_rate(self.tau, "tau")


EstimatorSpec = Union[Martingale, Exponential, Erlang, TauMap]


def spec_from_json(d: dict) -> EstimatorSpec:
    """Parse ``{"type": ..., "lambda": ..., "gamma": ..., "tau": ...}``."""
    kind = d.get("type")
    try:
        if kind == "martingale":
            return Martingale()
        if kind == "exponential":
            return Exponential(float(d["lambda"]))
        if kind == "erlang":
            gamma = d["gamma"]
            if isinstance(gamma, float) and gamma.is_integer():
                gamma = int(gamma)
            return Erlang(gamma, float(d["lambda"]))
        if kind == "tau_map":
            return TauMap(float(d["tau"]))
    except KeyError as exc:
        raise InvalidSpec(f"estimator {kind!r} is missing field {exc.args[0]!r}") from None
    raise InvalidSpec(f"unknown estimator type {kind!r}")


def spec_to_json(spec: EstimatorSpec) -> dict:
    d = {"type": spec.kind}
    if isinstance(spec, (Exponential, Erlang)):
        d["lambda"] = spec.lam
    if isinstance(spec, Erlang):
        d["gamma"] = spec.gamma
    if isinstance(spec, TauMap):
        d["tau"] = spec.tau
    return d


def as_erlang(spec: EstimatorSpec) -> Erlang:
    """Express martingale and exponential estimators as two-phase Erlang ones.

    An Exp(lam) clock is a single tick of rate ``2 * (lam / 2)``.
    """
    if isinstance(spec, Erlang):
        return spec
    if isinstance(spec, Martingale):
        return Erlang(2, 0.0)
    if isinstance(spec, Exponential):
        return Erlang(2, spec.lam / 2.0)
    raise InvalidSpec(f"{spec!r} has no finite-phase Erlang form")


@dataclass(frozen=True)
class EstimatorState:
    stored_sample: int
    phase: int = 1
    elapsed: float = 0.0
    timer_fired: bool = False


@dataclass(frozen=True)
class ExpClock:
    rate: float

    def draw(self, u: float) -> float:
        """Inverse-CDF draw from a uniform ``u`` in [0, 1)."""
        return -math.log(1.0 - u) / self.rate


@dataclass(frozen=True)
class Deadline:
    delay: float


def initial_state(x: int) -> EstimatorState:
    return EstimatorState(int(x))


def on_sample(state: EstimatorState, x: int, n_states: Optional[int] = None) -> EstimatorState:
    if x < 0 or (n_states is not None and x >= n_states):
        raise InvalidStateIndex(f"sampled state {x} out of range")
    return EstimatorState(int(x))


def on_phase_tick(state: EstimatorState, spec: EstimatorSpec) -> EstimatorState:
    if not isinstance(spec, Erlang):
        raise InvalidSpec("phase ticks only exist for the Erlang estimator")
    if state.phase >= spec.gamma:
        raise PhaseOverflow(f"phase {state.phase} is terminal for gamma={spec.gamma}")
    return replace(state, phase=state.phase + 1)


def on_timer(state: EstimatorState) -> EstimatorState:
    return replace(state, timer_fired=True)


def on_deadline(state: EstimatorState, spec: TauMap) -> EstimatorState:
    # strictly past tau, so the estimate flips and no further deadline is pending
    return replace(state, elapsed=math.nextafter(spec.tau, math.inf))


def advance(state: EstimatorState, dt: float) -> EstimatorState:
    return replace(state, elapsed=state.elapsed + dt)


def current_estimate(state: EstimatorState, spec: EstimatorSpec, i_star: int) -> int:
    if isinstance(spec, Exponential) and state.timer_fired:
        return i_star
    if isinstance(spec, Erlang) and state.phase == spec.gamma:
        return i_star
    if isinstance(spec, TauMap) and state.elapsed > spec.tau:
        return i_star
    return state.stored_sample


def pending_events(spec: EstimatorSpec, state: EstimatorState) -> list:
    """Internal estimator events that can fire before the next sample.

    Returns a list of ``(kind, distribution)`` pairs where the distribution
    is an :class:`ExpClock` or a :class:`Deadline` measured from now.
    """
    if isinstance(spec, Exponential):
        if spec.lam > 0 and not state.timer_fired:
            return [("timer", ExpClock(spec.lam))]
    elif isinstance(spec, Erlang):
        if spec.lam > 0 and state.phase < spec.gamma:
            return [("tick", ExpClock(spec.tick_rate))]
    elif isinstance(spec, TauMap):
        if state.elapsed <= spec.tau:
            return [("deadline", Deadline(spec.tau - state.elapsed))]
    return []
