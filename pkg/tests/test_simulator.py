import math

import numpy as np
import pytest

from freshness import analytic as an
from freshness.chains import random_chain
from freshness.ctmc import stationary_argmax, stationary_distribution
from freshness.errors import InvalidConfig, TooFewBatches
from freshness.estimators import Erlang, Exponential, Martingale, TauMap
from freshness.simulator import SimConfig, batch_ci, replicate, simulate, write_trace

SPECS = [Martingale(), Exponential(1.5), Erlang(4, 1.0), TauMap(0.4)]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_engines_bit_identical(spec):
    q = random_chain(3, "general", seed=5)
    cfg = SimConfig(seed=99, total_events=20_000, batches=10)
    a = simulate(q, spec, 1.3, cfg, engine="numba")
    b = simulate(q, spec, 1.3, cfg, engine="python")
    assert a.freshness == b.freshness
    assert a.batch_means == b.batch_means
    assert a.events == b.events and a.sim_time == b.sim_time


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_trace_recomputes_estimate(spec, tmp_path):
    q = random_chain(4, "reversible", seed=6)
    cfg = SimConfig(seed=3, total_events=20_000, batches=10, warmup_fraction=0.1)
    res = simulate(q, spec, 0.8, cfg, engine="python", record=True)
    tr = res.trace
    assert len(tr) == cfg.total_events + 1
    times = np.array([r[0] for r in tr])
    assert (np.diff(times) >= 0).all()
    assert all(r[4] == int(r[2] == r[3]) for r in tr)
    t_end = times[-1]
    t_warm = cfg.warmup_fraction * t_end
    lo = np.maximum(times[:-1], t_warm)
    hi = np.maximum(times[1:], t_warm)
    ind = np.array([r[4] for r in tr[:-1]], dtype=float)
    assert abs(float(ind @ (hi - lo)) / (t_end - t_warm) - res.freshness) < 1e-12
    # a sample always makes the estimate equal the source
    assert all(r[4] == 1 for r in tr if r[1] == "sample")
    write_trace(tr[:5], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "time,event_kind,x,x_hat,indicator"


def test_event_rates():
    q = random_chain(4, "general", seed=12)
    pi = stationary_distribution(q).pi
    mu, lam, g = 1.1, 0.9, 5
    res = simulate(q, Erlang(g, lam), mu, SimConfig(seed=1, total_events=2_000_000))
    t = res.sim_time
    assert abs(res.events["sample"] / t - mu) < 0.01 * mu
    src_rate = float(pi @ q.exit_rates)
    assert abs(res.events["source"] / t - src_rate) < 0.01 * src_rate
    # ticks per sample interval: sum_{k=1}^{g-1} (r/(r+mu))^k
    r = lam * g
    ticks = mu * sum((r / (r + mu)) ** k for k in range(1, g))
    assert abs(res.events["estimator"] / t - ticks) < 0.02 * ticks


def test_martingale_two_state_value():
    q = random_chain(2, "general", seed=0)
    pi = stationary_distribution(q).pi
    res = simulate(q, Martingale(), 2.0, SimConfig(seed=4, total_events=1_000_000))
    exact = an.martingale_freshness(q, pi, 2.0).value
    assert abs(res.freshness - exact) < max(3 * res.ci_halfwidth, 5e-3)


def test_seed_determinism_and_sensitivity():
    q = random_chain(3, "general", seed=2)
    cfg = SimConfig(seed=7, total_events=50_000)
    a = simulate(q, TauMap(0.3), 1.0, cfg)
    assert a == simulate(q, TauMap(0.3), 1.0, cfg)
    assert a.freshness != simulate(q, TauMap(0.3), 1.0, SimConfig(seed=8, total_events=50_000)).freshness


def test_replicate_pools_batches():
    q = random_chain(3, "general", seed=2)
    cfg = SimConfig(seed=7, total_events=100_000, batches=10)
    one = replicate(q, Exponential(1.0), 1.0, cfg, 1)
    four = replicate(q, Exponential(1.0), 1.0, cfg, 4)
    four_threads = replicate(q, Exponential(1.0), 1.0, cfg, 4, threads=2)
    assert len(four.batch_means) == 40
    assert four.batch_means[:10] == one.batch_means
    assert four == four_threads
    assert four.ci_halfwidth < one.ci_halfwidth


def test_batch_ci_examples():
    m, h = batch_ci([0.5] * 10)
    assert m == 0.5 and h == 0.0
    x = np.arange(10, dtype=float)
    m, h = batch_ci(x)
    # t_{0.975, 9} = 2.2621571628
    assert abs(m - 4.5) < 1e-15
    assert abs(h - 2.2621571628 * x.std(ddof=1) / math.sqrt(10)) < 1e-9
    with pytest.raises(TooFewBatches):
        batch_ci([0.1] * 9)


@pytest.mark.parametrize("kw", [dict(total_events=10), dict(batches=5),
                                dict(warmup_fraction=1.0), dict(seed=-1)])
def test_config_validation(kw):
    with pytest.raises(InvalidConfig):
        SimConfig(**kw)


def test_rejects_bad_calls():
    q = random_chain(2, "general", seed=0)
    with pytest.raises(InvalidConfig):
        simulate(q, Martingale(), 0.0, SimConfig(total_events=10_000))
    with pytest.raises(InvalidConfig):
        simulate(q, Martingale(), 1.0, SimConfig(total_events=10_000), record=True)
