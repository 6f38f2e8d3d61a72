"""
Event-driven Monte Carlo of a sampled CTMC under a structured estimator.

Three clocks race: the source holding time (Exp(q_x)), the next sample
(Exp(mu)) and the estimator's internal event (an exponential timer, an
Erlang phase tick or the tau-MAP deadline).  Absolute firing times are kept
for each clock, which by memorylessness is equivalent to redrawing the race
at every event.  The fraction of time with ``X(t) == Xhat(t)`` is
accumulated exactly between events.

Random numbers come from numpy's PCG64 seeded through ``SeedSequence``;
replication ``r >= 1`` of seed ``s`` uses ``SeedSequence(s, spawn_key=(r,))``.
Uniforms are consumed in blocks of ``CHUNK``; a block is abandoned when
fewer than three values remain, identically in both engines.

Two engines share that stream:

``"numba"``   compiled kernel, used for production budgets.
``"python"``  drives the :mod:`freshness.estimators` state machines directly
              and can record a trace; meant for small budgets and
              cross-checking the kernel.

A run makes two passes over the same stream: the first finds the time of
the last event, the second accumulates batch integrals on the time grid
derived from it.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np
import scipy.stats

from . import estimators as est
from .ctmc import stationary_argmax, stationary_distribution
from .errors import InvalidConfig, TooFewBatches

__all__ = ["SimConfig", "SimResult", "simulate", "replicate", "batch_ci", "write_trace"]

CHUNK = 1 << 18
INF = math.inf

_KIND_CODE = {"martingale": 0, "exponential": 1, "erlang": 2, "tau_map": 3}
_EVENT_NAMES = ("source", "sample", "estimator")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    total_events: int = 10_000_000
    warmup_fraction: float = 0.05
    batches: int = 20

    def __post_init__(self):
        if self.total_events < 10_000:
            raise InvalidConfig("total_events must be at least 10^4")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise InvalidConfig("warmup_fraction must lie in [0, 1)")
        if self.batches < 10:
            raise InvalidConfig("need at least 10 batches")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimResult:
    freshness: float
    ci_halfwidth: float
    events: dict
    sim_time: float
    batch_means: tuple = field(repr=False, default=())
    trace: Optional[list] = field(repr=False, default=None)

    @property
    def total_events(self) -> int:
        return int(sum(self.events.values()))


def batch_ci(batch_means) -> tuple:
    """Mean and 95% Student-t halfwidth of a list of batch means."""
    x = np.asarray(batch_means, dtype=float)
    n = x.size
    if n < 10:
        raise TooFewBatches(f"need at least 10 batches, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    return mean, float(scipy.stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n))


class _Stream:
    def __init__(self, seed_seq: np.random.SeedSequence):
        self._gen = np.random.Generator(np.random.PCG64(seed_seq))
        self.refill()

    def refill(self):
        self.buf = self._gen.random(CHUNK)
        self.pos = 0

    def ensure(self, k=3):
        if self.pos + k > CHUNK:
            self.refill()

    def take(self) -> float:
        u = self.buf[self.pos]
        self.pos += 1
        return float(u)


def _seed_sequence(seed: int, rep: int = 0) -> np.random.SeedSequence:
    if rep == 0:
        return np.random.SeedSequence(int(seed))
    return np.random.SeedSequence(int(seed), spawn_key=(rep,))


def _pick(cdf: np.ndarray, u: float) -> int:
    k = 0
    n = cdf.shape[0]
    while k < n - 1 and not u < cdf[k]:
        k += 1
    return k


class _Model:
    """Numeric view of (Q, spec, mu) shared by both engines."""

    def __init__(self, Q, spec, mu):
        q = np.asarray(Q, dtype=float)
        self.n = q.shape[0]
        pi = stationary_distribution(Q).pi
        self.pi = pi
        self.i_star = stationary_argmax(pi).map_state
        self.exit = -np.diag(q).copy()
        off = q - np.diag(np.diag(q))
        cdf = np.cumsum(off / self.exit[:, None], axis=1)
        for i in range(self.n):
            last = int(np.flatnonzero(off[i] > 0)[-1])
            cdf[i, last:] = 1.0
        self.jump_cdf = cdf
        pcdf = np.cumsum(pi)
        pcdf[-1] = 1.0
        self.pi_cdf = pcdf
        self.mu = float(mu)
        self.spec = spec
        self.kind = _KIND_CODE[spec.kind]
        self.gamma = spec.gamma if isinstance(spec, est.Erlang) else 0
        self.tau = spec.tau if isinstance(spec, est.TauMap) else 0.0
        if isinstance(spec, est.Exponential):
            self.clock = spec.lam
        elif isinstance(spec, est.Erlang):
            self.clock = spec.tick_rate
        else:
            self.clock = 0.0


# float state: t, next_src, next_samp, next_est, t_last
# int state: x, stored, phase, flag (timer fired / deadline passed)
# counters: events, source, sample, estimator


@numba.njit(cache=True, nogil=True)
def _accumulate(acc, t0, t1, t_warm, blen, nb):
    lo = t0 if t0 > t_warm else t_warm
    if t1 <= lo:
        return
    b = int((lo - t_warm) / blen)
    if b > nb - 1:
        b = nb - 1
    while lo < t1:
        if b == nb - 1:
            hi = t1
        else:
            edge = t_warm + (b + 1) * blen
            hi = t1 if t1 < edge else edge
        acc[b] += hi - lo
        lo = hi
        b += 1


@numba.njit(cache=True, nogil=True)
def _kernel(u, pos, fs, ist, cnt, n_events, exit_rates, jump_cdf, mu, kind, clock,
            gamma, tau, i_star, acc, t_warm, blen, nb):
    n_u = u.shape[0]
    n = jump_cdf.shape[0]
    t = fs[0]
    next_src = fs[1]
    next_samp = fs[2]
    next_est = fs[3]
    t_last = fs[4]
    x = ist[0]
    stored = ist[1]
    phase = ist[2]
    flag = ist[3]
    while cnt[0] < n_events and pos + 3 <= n_u:
        tn = next_src
        ev = 0
        if next_samp < tn:
            tn = next_samp
            ev = 1
        if next_est < tn:
            tn = next_est
            ev = 2
        estimate = stored
        if (kind == 1 or kind == 3) and flag == 1:
            estimate = i_star
        elif kind == 2 and phase == gamma:
            estimate = i_star
        if nb > 0 and x == estimate:
            _accumulate(acc, t, tn, t_warm, blen, nb)
        t = tn
        if ev == 0:
            uu = u[pos]
            pos += 1
            k = 0
            while k < n - 1 and not uu < jump_cdf[x, k]:
                k += 1
            x = k
            next_src = t - math.log(1.0 - u[pos]) / exit_rates[x]
            pos += 1
        elif ev == 1:
            stored = x
            phase = 1
            flag = 0
            t_last = t
            next_samp = t - math.log(1.0 - u[pos]) / mu
            pos += 1
            if (kind == 1 or kind == 2) and clock > 0.0:
                next_est = t - math.log(1.0 - u[pos]) / clock
                pos += 1
            elif kind == 3:
                next_est = t_last + tau
            else:
                next_est = np.inf
        else:
            if kind == 2:
                phase += 1
                if phase < gamma:
                    next_est = t - math.log(1.0 - u[pos]) / clock
                    pos += 1
                else:
                    next_est = np.inf
            else:
                flag = 1
                next_est = np.inf
        cnt[0] += 1
        cnt[1 + ev] += 1
    fs[0] = t
    fs[1] = next_src
    fs[2] = next_samp
    fs[3] = next_est
    fs[4] = t_last
    ist[0] = x
    ist[1] = stored
    ist[2] = phase
    ist[3] = flag
    return pos


def _exp(stream: _Stream, rate: float) -> float:
    return -math.log(1.0 - stream.take()) / rate


def _initial(model: _Model, stream: _Stream):
    x = _pick(model.pi_cdf, stream.take())
    stored = _pick(model.pi_cdf, stream.take())
    next_src = _exp(stream, model.exit[x])
    next_samp = _exp(stream, model.mu)
    if model.kind in (1, 2) and model.clock > 0.0:
        next_est = _exp(stream, model.clock)
    elif model.kind == 3:
        next_est = model.tau
    else:
        next_est = INF
    return x, stored, next_src, next_samp, next_est


def _run_numba(model, seed_seq, n_events, t_warm, blen, nb):
    stream = _Stream(seed_seq)
    x, stored, next_src, next_samp, next_est = _initial(model, stream)
    fs = np.array([0.0, next_src, next_samp, next_est, 0.0])
    ist = np.array([x, stored, 1, 0], dtype=np.int64)
    cnt = np.zeros(4, dtype=np.int64)
    acc = np.zeros(max(nb, 1))
    while cnt[0] < n_events:
        stream.ensure()
        stream.pos = _kernel(stream.buf, stream.pos, fs, ist, cnt, n_events, model.exit,
                             model.jump_cdf, model.mu, model.kind, model.clock, model.gamma,
                             model.tau, model.i_star, acc, t_warm, blen, nb)
    counts = dict(zip(_EVENT_NAMES, (int(c) for c in cnt[1:])))
    return fs[0], counts, acc[:nb], None


def _run_python(model, seed_seq, n_events, t_warm, blen, nb, record=False):
    # reference engine: same stream, same accumulation, estimator logic from
    # the estimators module
    spec = model.spec
    stream = _Stream(seed_seq)
    x, stored, next_src, next_samp, next_est = _initial(model, stream)
    state = est.initial_state(stored)
    t = 0.0
    t_last = 0.0
    counts = dict.fromkeys(_EVENT_NAMES, 0)
    acc = np.zeros(max(nb, 1))
    trace = [] if record else None

    def estimate_now():
        return est.current_estimate(state, spec, model.i_star)

    if record:
        xh = estimate_now()
        trace.append((0.0, "start", x, xh, int(x == xh)))
    done = 0
    while done < n_events:
        stream.ensure()
        tn, ev = next_src, 0
        if next_samp < tn:
            tn, ev = next_samp, 1
        if next_est < tn:
            tn, ev = next_est, 2
        if nb > 0 and x == estimate_now():
            _accumulate.py_func(acc, t, tn, t_warm, blen, nb)
        t = tn
        if ev == 0:
            x = _pick(model.jump_cdf[x], stream.take())
            next_src = t + (-math.log(1.0 - stream.take()) / model.exit[x])
            kind = "source"
        elif ev == 1:
            state = est.on_sample(state, x, model.n)
            t_last = t
            next_samp = t + (-math.log(1.0 - stream.take()) / model.mu)
            next_est = INF
            for _, dist in est.pending_events(spec, state):
                if isinstance(dist, est.ExpClock):
                    next_est = t + dist.draw(stream.take())
                else:
                    next_est = t_last + spec.tau
            kind = "sample"
        else:
            if isinstance(spec, est.Erlang):
                state = est.on_phase_tick(state, spec)
                kind = "tick"
            elif isinstance(spec, est.Exponential):
                state = est.on_timer(state)
                kind = "timer"
            else:
                state = est.on_deadline(state, spec)
                kind = "deadline"
            next_est = INF
            for _, dist in est.pending_events(spec, state):
                next_est = t + dist.draw(stream.take())
        if isinstance(spec, est.TauMap) and kind != "deadline" and kind != "sample":
            if state.elapsed <= spec.tau:
                state = replace(state, elapsed=min(t - t_last, spec.tau))
        counts[_EVENT_NAMES[ev]] += 1
        done += 1
        if record:
            xh = estimate_now()
            trace.append((t, kind, x, xh, int(x == xh)))
    return t, counts, acc[:nb], trace


def _simulate_seq(Q, spec, mu, cfg: SimConfig, seed_seq, engine="numba", record=False):
    if not mu > 0:
        raise InvalidConfig("sampling rate mu must be positive")
    model = _Model(Q, spec, mu)
    run = _run_numba if engine == "numba" else _run_python
    if engine not in ("numba", "python"):
        raise InvalidConfig(f"unknown engine {engine!r}")
    if record and engine != "python":
        raise InvalidConfig("trace recording requires engine='python'")
    kwargs = {"record": record} if engine == "python" else {}
    t_end, _, _, _ = run(model, seed_seq, cfg.total_events, 0.0, 1.0, 0, **kwargs)
    t_warm = cfg.warmup_fraction * t_end
    blen = (t_end - t_warm) / cfg.batches
    t_end2, counts, acc, trace = run(model, seed_seq, cfg.total_events, t_warm, blen,
                                     cfg.batches, **kwargs)
    assert t_end2 == t_end
    means = acc / blen
    mean, half = batch_ci(means)
    return SimResult(mean, half, counts, float(t_end), tuple(float(m) for m in means), trace)


def simulate(Q, spec, mu: float, cfg: SimConfig = SimConfig(), engine: str = "numba",
             record: bool = False) -> SimResult:
    """Long-run fraction of time the estimate equals the source state.

    ``X(0)`` and ``Xhat(0)`` are drawn independently from the stationary
    distribution; the first ``warmup_fraction`` of simulated time is
    discarded and the rest split into ``batches`` equal time windows.
    """
    return _simulate_seq(Q, spec, mu, cfg, _seed_sequence(cfg.seed), engine, record)


def replicate(Q, spec, mu: float, cfg: SimConfig = SimConfig(), n_reps: int = 1,
              threads: int = 1, engine: str = "numba") -> SimResult:
    """Pool ``n_reps`` independent runs; batch means of all runs form the CI."""
    if n_reps < 1:
        raise InvalidConfig("n_reps must be >= 1")
    if n_reps == 1:
        return simulate(Q, spec, mu, cfg, engine)

    def one(r):
        return _simulate_seq(Q, spec, mu, cfg, _seed_sequence(cfg.seed, r), engine)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, range(n_reps)))
    else:
        runs = [one(r) for r in range(n_reps)]
    means = [m for run in runs for m in run.batch_means]
    mean, half = batch_ci(means)
    counts = {k: sum(run.events[k] for run in runs) for k in _EVENT_NAMES}
    return SimResult(mean, half, counts, float(sum(run.sim_time for run in runs)), tuple(means))


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "event_kind", "x", "x_hat", "indicator"])
        for t, kind, x, xh, ind in trace:
            w.writerow([repr(t), kind, x, xh, ind])
