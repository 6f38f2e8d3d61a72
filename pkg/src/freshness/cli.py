"""
Command-line front end.

    freshness analyze --config bundled:fig5 --output fig5.csv --figure fig5.png
    freshness tau-star --chain bundled:fig5_two_state
    freshness oracle --chain chain.json --estimator '{"type": "erlang", "gamma": 5, "lambda": 2}' --mu 1
    freshness simulate --chain chain.json --estimator '{"type": "martingale"}' --mu 1 --events 1000000
    freshness random-chain --states 4 --kind general --seed 7
    freshness verify --suite theorem3 --n-cases 200
    freshness plot --input fig5.csv --figure fig5.png
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import experiments as ex
from .chains import dump_chain, load_chain, random_chain
from .ctmc import is_reversible, stationary_distribution, tau_star
from .errors import FreshnessError
from .simulator import SimConfig, replicate, simulate, write_trace
from .verify import SUITES, run_suite

__all__ = ["main", "build_parser"]


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _estimator_arg(raw: str, chain):
    if raw.startswith("@"):
        with open(raw[1:]) as fh:
            d = json.load(fh)
    else:
        try:
            d = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FreshnessError(f"--estimator is not valid JSON ({exc}); "
                                 "try '{\"type\": \"martingale\"}'") from None
    return ex.resolve_estimator(d, chain)


def _point_row(chain, spec, mu, method, value, **extra):
    lam, gamma, tau = ex.spec_params(spec)
    return ex.Row(chain_name=chain.name or "chain", estimator=spec.kind, mu=float(mu), lam=lam,
                  gamma=gamma, tau=tau, method=method, freshness=float(value), **extra)


def cmd_analyze(args) -> int:
    cfg = ex.load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=args.seed))
    rows = ex.run_experiment(cfg, threads=args.threads)
    out = args.output or cfg.output
    _emit(ex.format_csv(rows, timestamp=not args.no_header_timestamp), out)
    if args.figure:
        from .plotting import plot_rows
        plot_rows(rows, args.figure, title=cfg.chain_name)
    return 0


def cmd_tau_star(args) -> int:
    q = load_chain(args.chain)
    ts = tau_star(q, grid_step=args.grid_step)
    pi = stationary_distribution(q)
    lines = [
        f"chain={q.name or 'chain'}",
        f"tau_star_emp={ts.empirical!r}",
        f"tau_star_cert={ts.certified!r}",
        f"grid_step={ts.grid_step!r}",
        f"i_star={ts.map_state}",
        f"gap={ts.gap!r}",
        f"reversible={str(is_reversible(q, pi)).lower()}",
    ]
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_oracle(args) -> int:
    q = load_chain(args.chain)
    spec = _estimator_arg(args.estimator, q)
    rows = []
    for mu in args.mu:
        val = ex.oracle_estimate(q, spec, mu, args.gamma_large).value
        rows.append(_point_row(q, spec, mu, "oracle", val))
        if args.analytic:
            rows.append(_point_row(q, spec, mu, "analytic", ex.analytic_value(q, spec, mu).value))
    _emit(ex.format_csv(rows, timestamp=not args.no_header_timestamp), args.output)
    return 0


def cmd_simulate(args) -> int:
    q = load_chain(args.chain)
    spec = _estimator_arg(args.estimator, q)
    cfg = SimConfig(seed=args.seed or 0, total_events=args.events,
                    warmup_fraction=args.warmup, batches=args.batches)
    if args.trace:
        if args.reps != 1:
            raise FreshnessError("--trace records a single run; drop --reps")
        res = simulate(q, spec, args.mu, cfg, engine="python", record=True)
        write_trace(res.trace, args.trace)
    else:
        res = replicate(q, spec, args.mu, cfg, args.reps, threads=args.threads)
    row = _point_row(q, spec, args.mu, "sim", res.freshness, ci_halfwidth=res.ci_halfwidth,
                     sim_events=res.total_events, seed=cfg.seed)
    _emit(ex.format_csv([row], timestamp=not args.no_header_timestamp), args.output)
    return 0


def cmd_random_chain(args) -> int:
    q = random_chain(args.states, args.kind, seed=args.seed, name=args.name)
    _emit(dump_chain(q) + "\n", args.output)
    return 0


def cmd_verify(args) -> int:
    if args.n_cases < 1:
        raise FreshnessError("--n-cases must be >= 1")
    rep = run_suite(args.suite, seed=args.seed or 0, n_cases=args.n_cases)
    _emit(rep.format() + "\n", args.output)
    return 0 if rep.passed else 1


def cmd_plot(args) -> int:
    from .plotting import plot_csv
    plot_csv(args.input, args.figure, title=args.title)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freshness",
                                description="Binary freshness of remote CTMC estimators.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, csv=True):
        sp.add_argument("--output", "-o", help="write here instead of stdout")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="base seed (u64)")
        if csv:
            sp.add_argument("--no-header-timestamp", action="store_true",
                            help="omit the '# generated' header line")

    sp = sub.add_parser("analyze", help="run a sweep config and write CSV")
    sp.add_argument("--config", "-c", required=True, help="config JSON path or bundled:<name>")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--figure", help="also render the curves to this image file")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("tau-star", help="report tau* and the MAP state")
    sp.add_argument("--chain", required=True)
    sp.add_argument("--grid-step", type=float, default=None)
    common(sp, seed=False, csv=False)
    sp.set_defaults(func=cmd_tau_star)

    sp = sub.add_parser("oracle", help="exact joint-chain freshness at given rates")
    sp.add_argument("--chain", required=True)
    sp.add_argument("--estimator", required=True, help="estimator JSON or @file")
    sp.add_argument("--mu", type=float, nargs="+", required=True)
    sp.add_argument("--gamma-large", type=int, default=None,
                    help="Erlang phase count standing in for tau_map")
    sp.add_argument("--analytic", action="store_true", help="add closed-form rows")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("simulate", help="Monte Carlo freshness with a batch-means CI")
    sp.add_argument("--chain", required=True)
    sp.add_argument("--estimator", required=True, help="estimator JSON or @file")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--events", type=int, default=10**7)
    sp.add_argument("--batches", type=int, default=20)
    sp.add_argument("--warmup", type=float, default=0.05)
    sp.add_argument("--reps", type=int, default=1)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--trace", help="write the event trace CSV (slow reference engine)")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("random-chain", help="draw a random unique-max chain as JSON")
    sp.add_argument("--states", "-S", type=int, required=True)
    sp.add_argument("--kind", choices=("general", "reversible"), default="general")
    sp.add_argument("--name", default=None)
    common(sp, csv=False)
    sp.set_defaults(func=cmd_random_chain)

    sp = sub.add_parser("verify", help="run a property suite on random chains")
    sp.add_argument("--suite", choices=sorted(SUITES), required=True)
    sp.add_argument("--n-cases", type=int, default=100)
    common(sp, csv=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("plot", help="render a sweep CSV to an image")
    sp.add_argument("--input", "-i", required=True)
    sp.add_argument("--figure", required=True)
    sp.add_argument("--title", default=None)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FreshnessError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
