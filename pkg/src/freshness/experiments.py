"""
Parameter sweeps over sampling rates and estimators, written as tidy CSV.

A config is a JSON object::

    {
      "name": "fig5",
      "chain": "bundled:fig5_two_state",          # or {"Q": ...} or a file path
      "estimators": [{"type": "tau_map", "tau_scale": 1.0}, ...],
      "mu_grid": {"geomspace": [0.1, 50, 25]},     # or an explicit list
      "methods": ["analytic", "oracle", "sim"],
      "sim": {"total_events": 1000000, "batches": 20, "n_reps": 1},
      "gamma_large": 400,                           # tau-MAP oracle proxy
      "seed": 0,
      "output": "fig5.csv"
    }

Estimators accept ``lambda_scale`` (rate = scale / tau*_emp) and
``tau_scale`` (tau = scale * tau*_emp) in place of absolute values.
"""
from __future__ import annotations

import csv
import datetime
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytic, oracle
from .chains import load_chain
from .ctmc import GeneratorMatrix, stationary_argmax, stationary_distribution, tau_star
from .errors import FreshnessError, InvalidConfig
from .estimators import Erlang, Exponential, Martingale, TauMap, spec_from_json
from .simulator import SimConfig, replicate

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "Row",
    "load_config",
    "config_from_json",
    "resolve_estimator",
    "analytic_value",
    "oracle_estimate",
    "point_seed",
    "spec_params",
    "run_experiment",
    "format_csv",
    "write_csv",
    "read_csv",
]

CSV_COLUMNS = ("chain_name", "estimator", "mu", "lambda", "gamma", "tau", "method",
               "freshness", "ci_halfwidth", "sim_events", "seed")
METHODS = ("analytic", "oracle", "sim")


@dataclass(frozen=True)
class ExperimentConfig:
    chain: GeneratorMatrix
    estimators: tuple
    mu_grid: tuple
    methods: tuple = ("analytic",)
    sim: SimConfig = field(default_factory=SimConfig)
    n_reps: int = 1
    gamma_large: Optional[int] = None
    output: Optional[str] = None
    name: Optional[str] = None

    def __post_init__(self):
        if not self.estimators:
            raise InvalidConfig("estimators must be nonempty")
        if not self.mu_grid:
            raise InvalidConfig("mu_grid must be nonempty")
        if any(not (m > 0 and math.isfinite(m)) for m in self.mu_grid):
            raise InvalidConfig("every mu must be positive and finite")
        if not self.methods:
            raise InvalidConfig("methods must be nonempty")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise InvalidConfig(f"unknown methods {sorted(bad)}; choose from {METHODS}")
        if "oracle" in self.methods and self.gamma_large is None:
            if any(isinstance(s, TauMap) for s in self.estimators):
                raise InvalidConfig(
                    "oracle method for tau_map needs an explicit 'gamma_large' Erlang proxy"
                )
        if self.n_reps < 1:
            raise InvalidConfig("n_reps must be >= 1")

    @property
    def chain_name(self) -> str:
        return self.name or self.chain.name or "chain"


@dataclass(frozen=True)
class Row:
    chain_name: str
    estimator: str
    mu: float
    lam: Optional[float]
    gamma: Optional[int]
    tau: Optional[float]
    method: str
    freshness: float
    ci_halfwidth: Optional[float] = None
    sim_events: Optional[int] = None
    seed: Optional[int] = None

    def cells(self) -> list:
        def fmt(v):
            if v is None:
                return ""
            return repr(float(v)) if isinstance(v, float) else str(v)
        return [fmt(v) for v in (self.chain_name, self.estimator, self.mu, self.lam,
                                 self.gamma, self.tau, self.method, self.freshness,
                                 self.ci_halfwidth, self.sim_events, self.seed)]


def _mu_grid(raw) -> tuple:
    if isinstance(raw, dict):
        if "geomspace" in raw:
            lo, hi, n = raw["geomspace"]
            return tuple(float(m) for m in np.geomspace(lo, hi, int(n)))
        if "linspace" in raw:
            lo, hi, n = raw["linspace"]
            return tuple(float(m) for m in np.linspace(lo, hi, int(n)))
        raise InvalidConfig(f"unknown mu_grid form {sorted(raw)}")
    if isinstance(raw, (int, float)):
        return (float(raw),)
    return tuple(float(m) for m in raw)


def resolve_estimator(d: dict, chain: GeneratorMatrix, cache: Optional[dict] = None):
    """Estimator spec from JSON, resolving ``lambda_scale``/``tau_scale`` against tau*_emp."""
    d = dict(d)
    cache = {} if cache is None else cache

    def tstar():
        if "tau" not in cache:
            cache["tau"] = tau_star(chain).empirical
        return cache["tau"]

    if "lambda_scale" in d and "lambda" not in d:
        d["lambda"] = float(d.pop("lambda_scale")) / tstar()
    if "tau_scale" in d and "tau" not in d:
        d["tau"] = float(d.pop("tau_scale")) * tstar()
    return spec_from_json(d)


def config_from_json(d: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        chain_src = d["chain"]
        raw_specs = d["estimators"]
        raw_mu = d["mu_grid"]
    except KeyError as exc:
        raise InvalidConfig(f"config is missing required field {exc.args[0]!r}") from None
    if isinstance(chain_src, str) and not chain_src.startswith("bundled:") and base_dir:
        path = Path(chain_src)
        if not path.is_absolute():
            chain_src = str(base_dir / path)
    chain = load_chain(chain_src)
    cache: dict = {}
    try:
        specs = tuple(resolve_estimator(s, chain, cache) for s in raw_specs)
    except FreshnessError as exc:
        raise InvalidConfig(f"bad estimator entry: {exc}") from None
    sim_d = dict(d.get("sim", {}))
    n_reps = int(sim_d.pop("n_reps", 1))
    if "seed" in d:
        sim_d.setdefault("seed", int(d["seed"]))
    try:
        sim = SimConfig(**sim_d)
    except TypeError as exc:
        raise InvalidConfig(f"bad sim section: {exc}") from None
    gamma_large = d.get("gamma_large")
    return ExperimentConfig(
        chain=chain,
        estimators=specs,
        mu_grid=_mu_grid(raw_mu),
        methods=tuple(d.get("methods", ("analytic",))),
        sim=sim,
        n_reps=n_reps,
        gamma_large=int(gamma_large) if gamma_large is not None else None,
        output=d.get("output"),
        name=d.get("name"),
    )


def load_config(src) -> ExperimentConfig:
    """Read a config from a path, a dict, or ``bundled:<name>``."""
    if isinstance(src, dict):
        return config_from_json(src)
    src = str(src)
    if src.startswith("bundled:"):
        from importlib import resources
        name = src.split(":", 1)[1]
        res = resources.files("freshness").joinpath(f"data/configs/{name}.json")
        if not res.is_file():
            raise InvalidConfig(f"no bundled config {name!r}")
        return config_from_json(json.loads(res.read_text()))
    try:
        with open(src) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {src}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config {src} is not valid JSON: {exc}") from None
    return config_from_json(d, Path(src).resolve().parent)


def analytic_value(Q, spec, mu: float) -> analytic.FreshnessValue:
    """Closed-form freshness on the general-chain route for any estimator."""
    pi = stationary_distribution(Q)
    i_star = stationary_argmax(pi).map_state
    if isinstance(spec, Martingale):
        return analytic.martingale_freshness(Q, pi, mu)
    if isinstance(spec, Exponential):
        return analytic.exponential_freshness(Q, pi, i_star, mu, spec.lam)
    if isinstance(spec, Erlang):
        return analytic.erlang_freshness(Q, pi, i_star, mu, spec.lam, spec.gamma)
    return analytic.tau_map_freshness_general(Q, pi, i_star, mu, spec.tau)


def oracle_estimate(Q, spec, mu: float, gamma_large: Optional[int] = None):
    if isinstance(spec, TauMap):
        if gamma_large is None:
            raise InvalidConfig("tau_map oracle needs gamma_large")
        return oracle.oracle_tau_map(Q, mu, spec.tau, gamma_large)
    return oracle.oracle_value(Q, spec, mu)


def point_seed(base_seed: int, index: int) -> int:
    """64-bit seed for sweep point ``index``, independent of execution order."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def spec_params(spec):
    lam = spec.lam if isinstance(spec, (Exponential, Erlang)) else None
    gamma = spec.gamma if isinstance(spec, Erlang) else None
    tau = spec.tau if isinstance(spec, TauMap) else None
    return lam, gamma, tau


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list:
    """Evaluate every (estimator, mu, method) point; rows come back in grid order."""
    tasks = []
    for spec in cfg.estimators:
        for mu in cfg.mu_grid:
            for method in cfg.methods:
                tasks.append((spec, mu, method, len(tasks)))

    def run(task):
        spec, mu, method, idx = task
        lam, gamma, tau = spec_params(spec)
        base = dict(chain_name=cfg.chain_name, estimator=spec.kind, mu=float(mu), lam=lam,
                    gamma=gamma, tau=tau, method=method)
        if method == "analytic":
            return Row(freshness=analytic_value(cfg.chain, spec, mu).value, **base)
        if method == "oracle":
            return Row(freshness=oracle_estimate(cfg.chain, spec, mu, cfg.gamma_large).value,
                       **base)
        seed = point_seed(cfg.sim.seed, idx)
        sim_cfg = SimConfig(seed=seed, total_events=cfg.sim.total_events,
                            warmup_fraction=cfg.sim.warmup_fraction, batches=cfg.sim.batches)
        res = replicate(cfg.chain, spec, mu, sim_cfg, cfg.n_reps)
        return Row(freshness=res.freshness, ci_halfwidth=res.ci_halfwidth,
                   sim_events=res.total_events, seed=seed, **base)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def format_csv(rows, timestamp: bool = True) -> str:
    buf = io.StringIO()
    if timestamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        buf.write(f"# generated {now}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_csv(rows, path, timestamp: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(rows, timestamp))


def read_csv(path) -> list:
    """Parse a CSV produced by :func:`write_csv` back into dicts of strings."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
