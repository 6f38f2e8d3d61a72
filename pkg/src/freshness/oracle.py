"""
Exact freshness from the joint chain (source state, held estimate, phase).

For an Erlang estimator with ``gamma`` phases the joint chain has states
``(i, j, k)`` for ``k < gamma`` (source ``i``, stored sample ``j``) and
``(i, i*, gamma)`` once the estimate has collapsed to the stationary mode,
``S*S*(gamma-1) + S`` states in total.  Martingale and exponential
estimators are covered as two-phase Erlang estimators.  The stationary law
is obtained by a direct solve, independent of the closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .analytic import FreshnessValue
from .ctmc import stationary_argmax, stationary_distribution
from .errors import SingularSystem, UniqueMaxRequired
from .estimators import Erlang, as_erlang

__all__ = [
    "JointIndex",
    "JointGenerator",
    "JointStationary",
    "build_joint_generator",
    "solve_stationary",
    "oracle_freshness",
    "oracle_value",
    "oracle_tau_map",
]

DENSE_LIMIT = 2500


@dataclass(frozen=True)
class JointIndex:
    n_states: int
    gamma: int
    i_star: int

    @property
    def size(self) -> int:
        s = self.n_states
        return s * s * (self.gamma - 1) + s

    def flat(self, i: int, j: int, k: int) -> int:
        s = self.n_states
        if k == self.gamma:
            if j != self.i_star:
                raise KeyError(f"terminal phase only carries estimate {self.i_star}")
            return s * s * (self.gamma - 1) + i
        if not 1 <= k < self.gamma:
            raise KeyError(f"phase {k} out of range")
        return (k - 1) * s * s + i * s + j

    def unflat(self, n: int) -> tuple:
        s = self.n_states
        base = s * s * (self.gamma - 1)
        if n >= base:
            return (n - base, self.i_star, self.gamma)
        k, rem = divmod(n, s * s)
        i, j = divmod(rem, s)
        return (i, j, k + 1)


@dataclass(frozen=True)
class JointGenerator:
    index: JointIndex
    matrix: sp.csr_matrix
    mu: float
    lam: float


@dataclass(frozen=True)
class JointStationary:
    index: JointIndex
    phi: np.ndarray
    residual: float

    def block(self, k: int) -> np.ndarray:
        """``Phi_k[i, j] = phi(i, j, k)`` for ``1 <= k < gamma``."""
        s = self.index.n_states
        start = (k - 1) * s * s
        return self.phi[start:start + s * s].reshape(s, s)

    def tail(self) -> np.ndarray:
        s = self.index.n_states
        return self.phi[s * s * (self.index.gamma - 1):]

    def source_marginal(self) -> np.ndarray:
        s = self.index.n_states
        body = self.phi[: s * s * (self.index.gamma - 1)].reshape(-1, s, s).sum(axis=(0, 2))
        return body + self.tail()


def build_joint_generator(Q, spec, mu: float, i_star: int) -> JointGenerator:
    """Generator of the joint chain for ``spec`` sampled at rate ``mu``."""
    spec = as_erlang(spec)
    if mu <= 0:
        raise ValueError("mu must be positive")
    q = np.asarray(Q, dtype=float)
    s = q.shape[0]
    diag = stationary_argmax(stationary_distribution(Q))
    if spec.lam > 0 and (not diag.unique_max or diag.map_state != i_star):
        raise UniqueMaxRequired("joint chain needs the unique stationary argmax as i_star")
    gamma = spec.gamma
    rate = spec.tick_rate
    index = JointIndex(s, gamma, i_star)
    n = index.size
    rows, cols, vals = [], [], []

    def add(a, b, r):
        if r > 0 and a != b:
            rows.append(a)
            cols.append(b)
            vals.append(r)

    src, dst = np.nonzero(q - np.diag(np.diag(q)))
    for k in range(1, gamma):
        for j in range(s):
            for i, l in zip(src, dst):
                add(index.flat(i, j, k), index.flat(l, j, k), q[i, l])
            for i in range(s):
                a = index.flat(i, j, k)
                nxt = index.flat(i, j, k + 1) if k < gamma - 1 else index.flat(i, i_star, gamma)
                add(a, nxt, rate)
                add(a, index.flat(i, i, 1), mu)
    for i, l in zip(src, dst):
        add(index.flat(i, i_star, gamma), index.flat(l, i_star, gamma), q[i, l])
    for i in range(s):
        add(index.flat(i, i_star, gamma), index.flat(i, i, 1), mu)
    g = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    g = g - sp.diags(np.asarray(g.sum(axis=1)).ravel())
    return JointGenerator(index, g.tocsr(), float(mu), float(spec.lam))


def solve_stationary(gen: JointGenerator) -> JointStationary:
    """Stationary law on the states reachable from ``(0, 0, 1)``; others get 0."""
    g = gen.matrix
    n = g.shape[0]
    start = gen.index.flat(0, 0, 1)
    reach = scipy.sparse.csgraph.breadth_first_order(
        (g - sp.diags(g.diagonal())) != 0, start, directed=True, return_predecessors=False
    )
    reach = np.sort(reach)
    sub = g[reach][:, reach]
    m = len(reach)
    scale = max(1.0, float(np.max(np.abs(sub.diagonal()))))
    b = np.zeros(m)
    b[-1] = 1.0
    if m <= DENSE_LIMIT:
        a = sub.T.toarray()
        a[-1, :] = 1.0
        try:
            x = np.linalg.solve(a, b)
            x = x + np.linalg.solve(a, b - a @ x)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    else:
        a = sub.T.tolil()
        a[-1, :] = np.ones(m)
        a = a.tocsc()
        lu = scipy.sparse.linalg.splu(a)
        x = lu.solve(b)
        x = x + lu.solve(b - a @ x)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("joint stationary solve produced non-finite values")
    phi = np.zeros(n)
    phi[reach] = x
    residual = float(np.max(np.abs(g.T @ phi)))
    if residual > 1e-11 * scale or abs(phi.sum() - 1.0) > 1e-11:
        raise SingularSystem(f"joint stationary residual {residual:.3g} too large")
    return JointStationary(gen.index, phi, residual)


def oracle_freshness(phi: JointStationary, i_star: int) -> FreshnessValue:
    idx = phi.index
    total = sum(np.trace(phi.block(k)) for k in range(1, idx.gamma))
    total += phi.tail()[i_star]
    return FreshnessValue(float(total), "oracle")


def oracle_value(Q, spec, mu: float) -> FreshnessValue:
    """Convenience: solve the joint chain for ``spec`` and return its freshness."""
    pi = stationary_distribution(Q)
    i_star = stationary_argmax(pi).map_state
    gen = build_joint_generator(Q, spec, mu, i_star)
    return oracle_freshness(solve_stationary(gen), i_star)


def oracle_tau_map(Q, mu: float, tau: float, gamma_large: int = 400) -> FreshnessValue:
    """tau-MAP freshness approximated by the Erlang oracle at ``gamma_large`` phases."""
    if gamma_large < 50:
        raise ValueError("gamma_large must be at least 50")
    if tau <= 0:
        raise ValueError("tau must be positive for the Erlang proxy")
    return oracle_value(Q, Erlang(int(gamma_large), 1.0 / tau), mu)
