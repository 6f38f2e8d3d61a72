import math

import numpy as np
import pytest

from freshness import estimators as est
from freshness.errors import InvalidSpec, InvalidStateIndex, PhaseOverflow


def test_spec_json_round_trip():
    for spec in (est.Martingale(), est.Exponential(0.5), est.Erlang(4, 2.0), est.TauMap(0.3)):
        assert est.spec_from_json(est.spec_to_json(spec)) == spec


@pytest.mark.parametrize("bad", [
    {"type": "erlang", "gamma": 1, "lambda": 1.0},
    {"type": "erlang", "gamma": 2.5, "lambda": 1.0},
    {"type": "exponential", "lambda": -1},
    {"type": "exponential", "lambda": float("nan")},
    {"type": "tau_map", "tau": -0.1},
    {"type": "tau_map"},
    {"type": "oracle"},
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidSpec):
        est.spec_from_json(bad)


def test_as_erlang():
    assert est.as_erlang(est.Exponential(3.0)) == est.Erlang(2, 1.5)
    assert est.as_erlang(est.Martingale()) == est.Erlang(2, 0.0)
    assert est.Erlang(5, 2.0).tick_rate == 10.0
    with pytest.raises(InvalidSpec):
        est.as_erlang(est.TauMap(1.0))


def test_erlang_phase_walk():
    spec = est.Erlang(3, 1.0)
    s = est.on_sample(est.initial_state(0), 2, n_states=3)
    assert s.phase == 1 and est.current_estimate(s, spec, 0) == 2
    s = est.on_phase_tick(s, spec)
    assert est.current_estimate(s, spec, 0) == 2
    s = est.on_phase_tick(s, spec)
    assert s.phase == 3 and est.current_estimate(s, spec, 0) == 0
    with pytest.raises(PhaseOverflow):
        est.on_phase_tick(s, spec)
    assert est.pending_events(spec, s) == []
    assert est.on_sample(s, 1).phase == 1


def test_exponential_timer_and_martingale():
    spec = est.Exponential(1.0)
    s = est.on_sample(est.initial_state(0), 1)
    assert [k for k, _ in est.pending_events(spec, s)] == ["timer"]
    s = est.on_timer(s)
    assert est.current_estimate(s, spec, 2) == 2
    assert est.pending_events(spec, s) == []
    assert est.current_estimate(s, est.Martingale(), 2) == 1
    assert est.pending_events(est.Martingale(), s) == []


def test_tau_map_deadline_boundary():
    spec = est.TauMap(0.5)
    s = est.advance(est.on_sample(est.initial_state(0), 1), 0.5)
    # the switch happens strictly after tau
    assert est.current_estimate(s, spec, 0) == 1
    (kind, dist), = est.pending_events(spec, est.on_sample(s, 1))
    assert kind == "deadline" and dist.delay == 0.5
    s = est.on_deadline(s, spec)
    assert est.current_estimate(s, spec, 0) == 0
    assert est.current_estimate(est.on_sample(est.initial_state(0), 1), est.TauMap(0.0), 0) == 1


def test_on_sample_range():
    with pytest.raises(InvalidStateIndex):
        est.on_sample(est.initial_state(0), 3, n_states=3)
    with pytest.raises(InvalidStateIndex):
        est.on_sample(est.initial_state(0), -1, n_states=3)


def test_exp_clock_inverse_cdf():
    clock = est.ExpClock(2.0)
    assert clock.draw(0.0) == 0.0
    assert abs(clock.draw(1 - math.exp(-1)) - 0.5) < 1e-15
    u = np.random.default_rng(0).random(200_000)
    draws = np.array([clock.draw(x) for x in u[:20000]])
    assert abs(draws.mean() - 0.5) < 0.02
