"""
Property suites run on random chain corpora.

``identities``   Exp(lam) == two-phase Erlang(lam/2); lam = 0 reduces to the
                 martingale estimator.
``theorem3``     martingale freshness never beats tau*-MAP freshness.
``convergence``  Erlang(gamma, 1/tau) approaches tau-MAP(tau) monotonically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import analytic as an
from .chains import bundled_chain, random_corpus
from .ctmc import stationary_distribution, tau_star

__all__ = ["VerifyReport", "SUITES", "run_suite", "identities", "theorem3", "convergence"]

MU_VALUES = (0.1, 1.0, 10.0)
LAMBDA_FACTORS = (0.2, 1.0, 5.0)
CONVERGENCE_GAMMAS = (10, 20, 50, 100, 200, 400)


@dataclass
class VerifyReport:
    suite: str
    n_cases: int
    threshold: float
    worst: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def format(self) -> str:
        lines = [f"suite={self.suite} cases={self.n_cases} worst={self.worst:.3e} "
                 f"threshold={self.threshold:.1e} violations={len(self.violations)} "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for v in self.violations:
            lines.append("  " + json.dumps(v))
        return "\n".join(lines)


def identities(seed: int = 0, n_cases: int = 100, threshold: float = 1e-12) -> VerifyReport:
    rep = VerifyReport("identities", n_cases, threshold)
    for q in random_corpus(n_cases, seed):
        pi = stationary_distribution(q)
        ts = tau_star(q)
        i = ts.map_state
        for mu in MU_VALUES:
            mart = an.martingale_freshness(q, pi, mu).value
            res = {
                "exp0_vs_martingale": abs(an.exponential_freshness(q, pi, i, mu, 0.0).value - mart),
                "erlang0_vs_martingale": abs(
                    an.erlang_freshness(q, pi, i, mu, 0.0, 5).value - mart),
            }
            for f in LAMBDA_FACTORS:
                lam = f / ts.empirical
                e = an.exponential_freshness(q, pi, i, mu, lam).value
                g = an.erlang_freshness(q, pi, i, mu, lam / 2.0, 2).value
                res[f"gamma2_lambda{f}"] = abs(e - g)
            for name, r in res.items():
                rep.worst = max(rep.worst, r)
                if r >= threshold:
                    rep.violations.append({"check": name, "mu": mu, "residual": r,
                                           "chain": q.to_json()})
    return rep


def theorem3(seed: int = 0, n_cases: int = 200, slack: float = 1e-9) -> VerifyReport:
    """Worst value of ``martingale - tau_map(tau*)`` (negative means the bound holds)."""
    rep = VerifyReport("theorem3", n_cases, slack, worst=-np.inf)
    for q in random_corpus(n_cases, seed):
        pi = stationary_distribution(q)
        ts = tau_star(q)
        i = ts.map_state
        for mu in MU_VALUES:
            mart = an.martingale_freshness(q, pi, mu).value
            for label, tau in (("tau_emp", ts.empirical), ("tau_cert", ts.certified)):
                tm = an.tau_map_freshness_general(q, pi, i, mu, tau).value
                excess = mart - tm
                rep.worst = max(rep.worst, excess)
                if excess > slack:
                    rep.violations.append({"tau": label, "mu": mu, "martingale": mart,
                                           "tau_map": tm, "chain": q.to_json()})
    return rep


def convergence_gaps(q, mu: float = 1.0, gammas=CONVERGENCE_GAMMAS) -> np.ndarray:
    """``|Erlang(gamma, 1/tau) - tauMAP(tau)|`` at ``tau = tau*_emp`` for each gamma."""
    pi = stationary_distribution(q)
    ts = tau_star(q)
    i = ts.map_state
    tau = ts.empirical
    target = an.tau_map_freshness_general(q, pi, i, mu, tau).value
    return np.array([abs(an.erlang_freshness(q, pi, i, mu, 1.0 / tau, g).value - target)
                     for g in gammas])


def convergence(seed: int = 0, n_cases: int = 20, slack: float = 1e-10,
                final_tol: float = 2e-3) -> VerifyReport:
    rep = VerifyReport("convergence", n_cases + 1, final_tol)
    chains = [bundled_chain("fig5_two_state")] + random_corpus(n_cases, seed)
    for q in chains:
        gaps = convergence_gaps(q)
        rep.worst = max(rep.worst, float(gaps[-1]))
        rises = np.diff(gaps)
        if (rises > slack).any() or gaps[-1] >= final_tol:
            rep.violations.append({"gaps": gaps.tolist(), "chain": q.to_json()})
    return rep


SUITES = {"identities": identities, "theorem3": theorem3, "convergence": convergence}


def run_suite(name: str, seed: int = 0, n_cases: int = 100) -> VerifyReport:
    return SUITES[name](seed=seed, n_cases=n_cases)
