"""
Closed-form binary freshness of the structured estimators.

General chains use resolvents ``((mu + c) I - Q^T)^{-1}`` applied to the
diagonal stationary matrix by dense LU solves.  Reversible chains use the
symmetrized spectrum: with ``tr(Pi P(t)) = sum_i a_i exp(-d_i t)`` every
trace collapses to a sum over decay rates.

The tau-MAP value for a general chain comes from the renewal structure of
the sampling process.  Over one Exp(mu) inter-sample period started from
``X(0) ~ pi`` the estimate is correct while ``X(t) = X(0)`` up to ``tau``
and while ``X(t) = i*`` afterwards, which gives

    mu * int_0^tau exp(-mu t) tr(Pi P(t)) dt + exp(-mu tau) pi_{i*}.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .ctmc import SpectralDecomposition, stationary_argmax, transition_matrix
from .errors import QuadratureBudgetExceeded, SingularResolvent, UniqueMaxRequired

__all__ = [
    "FreshnessValue",
    "martingale_freshness",
    "exponential_freshness",
    "erlang_freshness",
    "erlang_freshness_reversible",
    "exponential_freshness_reversible",
    "martingale_freshness_reversible",
    "tau_map_freshness_reversible",
    "tau_map_freshness_general",
    "resolvent_blocks",
]

_METHODS = {
    "theorem1", "theorem2", "corollary1", "corollary2", "corollary3",
    "martingale", "tau_map_general", "oracle",
}


@dataclass(frozen=True)
class FreshnessValue:
    value: float
    method: str

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if not (-1e-9 <= self.value <= 1 + 1e-9):
            raise ValueError(f"freshness {self.value} outside [0, 1]")

    def __float__(self):
        return float(self.value)


def _check_mu(mu):
    if not mu > 0:
        raise ValueError(f"sampling rate must be positive, got {mu}")


def _check_i_star(pi, i_star):
    diag = stationary_argmax(pi)
    if not diag.unique_max:
        raise UniqueMaxRequired("stationary maximum is not unique")
    if i_star != diag.map_state:
        raise UniqueMaxRequired(f"i_star={i_star} is not the stationary argmax {diag.map_state}")


def _lu(q: np.ndarray, c: float):
    a = c * np.eye(q.shape[0]) - q.T
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.lu_factor(a)
        except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError, ValueError) as exc:
            raise SingularResolvent(f"{c} I - Q^T is numerically singular") from exc


def resolvent_blocks(Q, pi, mu: float, lam: float, gamma: int):
    """Yield ``W_k = (lam*gamma)^(k-1) Qt^k Pi`` for ``k = 1..gamma-1``.

    ``Qt = ((mu + lam*gamma) I - Q^T)^{-1}``.  Each block is obtained from the
    previous one by a solve against ``lam*gamma * W_{k-1}``, which keeps the
    combined factor bounded.
    """
    q = np.asarray(Q, dtype=float)
    p = np.asarray(pi, dtype=float)
    rate = lam * gamma
    lu = _lu(q, mu + rate)
    w = scipy.linalg.lu_solve(lu, np.diag(p))
    for k in range(1, gamma):
        if k > 1:
            if rate == 0.0:
                return
            w = scipy.linalg.lu_solve(lu, rate * w)
        if not np.all(np.isfinite(w)):
            raise SingularResolvent("non-finite resolvent block")
        yield w


def _erlang_value(Q, pi, i_star, mu, lam, gamma) -> float:
    p = np.asarray(pi, dtype=float)
    total = 0.0
    for w in resolvent_blocks(Q, p, mu, lam, gamma):
        total += np.trace(w)
    rate = lam * gamma
    tail = (rate / (mu + rate)) ** (gamma - 1)
    return mu * total + tail * p[i_star]


def _resolvent_trace(Q, pi, c: float) -> float:
    # tr((c I - Q^T)^{-1} Pi) by one dense solve against Pi
    q = np.asarray(Q, dtype=float)
    p = np.asarray(pi, dtype=float)
    try:
        x = np.linalg.solve(c * np.eye(q.shape[0]) - q.T, np.diag(p))
    except np.linalg.LinAlgError as exc:
        raise SingularResolvent(f"{c} I - Q^T is singular") from exc
    if not np.all(np.isfinite(x)):
        raise SingularResolvent("non-finite resolvent")
    return float(np.trace(x))


def martingale_freshness(Q, pi, mu: float) -> FreshnessValue:
    """``mu tr((mu I - Q^T)^{-1} Pi)``, the last-sample estimator."""
    _check_mu(mu)
    return FreshnessValue(mu * _resolvent_trace(Q, pi, mu), "martingale")


def exponential_freshness(Q, pi, i_star: int, mu: float, lam: float) -> FreshnessValue:
    _check_mu(mu)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam > 0:
        _check_i_star(pi, i_star)
    p = np.asarray(pi, dtype=float)
    value = mu * _resolvent_trace(Q, p, mu + lam) + lam / (mu + lam) * p[i_star]
    return FreshnessValue(value, "theorem1")


def erlang_freshness(Q, pi, i_star: int, mu: float, lam: float, gamma: int) -> FreshnessValue:
    _check_mu(mu)
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam > 0:
        _check_i_star(pi, i_star)
    return FreshnessValue(_erlang_value(Q, pi, i_star, mu, lam, gamma), "theorem2")


def erlang_freshness_reversible(sd: SpectralDecomposition, pi_star: float, mu: float,
                                lam: float, gamma: int) -> FreshnessValue:
    _check_mu(mu)
    d = sd.eigenvalues
    a = sd.weights
    rate = lam * gamma
    body = a * mu / (d + mu) * (1.0 - (rate / (d + mu + rate)) ** (gamma - 1))
    tail = (rate / (mu + rate)) ** (gamma - 1) * pi_star
    return FreshnessValue(float(body.sum() + tail), "corollary1")


def exponential_freshness_reversible(sd: SpectralDecomposition, pi_star: float, mu: float,
                                     lam: float) -> FreshnessValue:
    _check_mu(mu)
    d = sd.eigenvalues
    a = sd.weights
    value = float((a * mu / (d + mu + lam)).sum() + lam / (mu + lam) * pi_star)
    return FreshnessValue(value, "corollary2")


def martingale_freshness_reversible(sd: SpectralDecomposition, mu: float) -> FreshnessValue:
    _check_mu(mu)
    value = float((sd.weights * mu / (sd.eigenvalues + mu)).sum())
    return FreshnessValue(value, "corollary2")


def tau_map_freshness_reversible(sd: SpectralDecomposition, pi_star: float, mu: float,
                                 tau: float) -> FreshnessValue:
    _check_mu(mu)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    d = sd.eigenvalues
    a = sd.weights
    body = a * mu / (d + mu) * -np.expm1(-(d + mu) * tau)
    value = float(body.sum() + math.exp(-mu * tau) * pi_star)
    return FreshnessValue(value, "corollary3")


def tau_map_freshness_general(Q, pi, i_star: int, mu: float, tau: float,
                              abs_tol: float = 1e-12, limit: int = 200) -> FreshnessValue:
    """tau-MAP freshness for any chain by adaptive quadrature of ``tr(Pi P(t))``."""
    _check_mu(mu)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    _check_i_star(pi, i_star)
    p = np.asarray(pi, dtype=float)
    tail = math.exp(-mu * tau) * p[i_star]
    if tau == 0.0:
        return FreshnessValue(float(tail), "tau_map_general")

    def integrand(t):
        pt = transition_matrix(Q, t).probs
        return math.exp(-mu * t) * float(p @ np.diag(pt))

    # the integrand is bounded by mu * exp(-mu t); absolute error scales with mu
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        try:
            val, err = scipy.integrate.quad(integrand, 0.0, tau, epsabs=abs_tol / mu,
                                            epsrel=0.0, limit=limit)
        except scipy.integrate.IntegrationWarning as exc:
            raise QuadratureBudgetExceeded(str(exc)) from exc
    if mu * err > abs_tol:
        raise QuadratureBudgetExceeded(f"quadrature error estimate {mu * err:.3g} > {abs_tol}")
    return FreshnessValue(float(mu * val + tail), "tau_map_general")
