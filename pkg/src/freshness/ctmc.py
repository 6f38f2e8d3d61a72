"""
Finite irreducible continuous-time Markov chains.

Validation of generator matrices, stationary distributions, transition
matrices by uniformization, detailed-balance checks, the symmetrized
spectral decomposition of reversible chains, and the time ``tau*`` beyond
which the most likely state is the stationary mode regardless of the
starting state.

States are indexed from 0 throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DecompositionFailure,
    HorizonExceeded,
    NegativeOffDiagonal,
    NonConvergence,
    NotIrreducible,
    NotReversible,
    RowSumViolation,
    SingularSystem,
    UniqueMaxRequired,
)

__all__ = [
    "GeneratorMatrix",
    "StationaryDistribution",
    "TransitionMatrix",
    "SpectralDecomposition",
    "ChainDiagnostics",
    "TauStarResult",
    "validate_generator",
    "stationary_distribution",
    "transition_matrix",
    "transition_matrices_on_grid",
    "is_reversible",
    "spectral_decomposition",
    "spectral_gap",
    "stationary_argmax",
    "chain_diagnostics",
    "tau_star",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated generator ``Q``; build it with :func:`validate_generator`."""

    rates: np.ndarray
    name: Optional[str] = None

    @property
    def size(self) -> int:
        return self.rates.shape[0]

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rates)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rates, dtype=dtype)

    def to_json(self) -> dict:
        d = {"Q": self.rates.tolist()}
        if self.name is not None:
            d = {"name": self.name, **d}
        return d


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray

    @property
    def diag(self) -> np.ndarray:
        """The diagonal matrix of stationary probabilities."""
        return np.diag(self.pi)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.pi, dtype=dtype)

    def __len__(self):
        return len(self.pi)

    def __getitem__(self, i):
        return self.pi[i]


@dataclass(frozen=True)
class TransitionMatrix:
    time: float
    probs: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Spectrum of ``Pi^(1/2) Q Pi^(-1/2) = U diag(-d) U^T``.

    ``eigenvalues`` holds the decay rates ``d`` (ascending, first one 0),
    column ``i`` of ``vectors`` is the eigenvector for ``d[i]`` and
    ``weights[i] = sum_j pi_j U[j, i]**2``.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class ChainDiagnostics:
    map_state: int
    runner_up: int
    gap: float
    unique_max: bool
    reversible: Optional[bool] = None

    @property
    def epsilon(self) -> float:
        """Quarter of the gap between the two largest stationary probabilities."""
        return self.gap / 4.0


@dataclass(frozen=True)
class TauStarResult:
    empirical: float
    certified: float
    grid_step: float
    map_state: int = field(default=-1)
    gap: float = field(default=float("nan"))


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]

    def reaches_all(a):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(a[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


def validate_generator(raw, tol: float = 1e-9, name: Optional[str] = None) -> GeneratorMatrix:
    """Check a raw rate matrix and return it as a :class:`GeneratorMatrix`.

    The diagonal is replaced by minus the off-diagonal row sums, so
    ``Q @ 1 == 0`` holds exactly; a raw diagonal further than
    ``tol * max(1, q_i)`` from that value is rejected.
    """
    q = np.array(raw, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"generator must be square, got shape {q.shape}")
    n = q.shape[0]
    if n < 2:
        raise ValueError("generator needs at least 2 states")
    if not np.all(np.isfinite(q)):
        raise ValueError("generator has non-finite entries")
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if (off < 0).any():
        i, j = np.argwhere(off < 0)[0]
        raise NegativeOffDiagonal(f"q[{i},{j}] = {q[i, j]} < 0")
    out = off.sum(axis=1)
    bad = np.abs(np.diag(q) + out) > tol * np.maximum(1.0, out)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise RowSumViolation(
            f"row {i}: diagonal {q[i, i]} inconsistent with -sum(off-diagonal) = {-out[i]}"
        )
    if not _strongly_connected(off > 0):
        raise NotIrreducible("positive-rate graph is not strongly connected")
    q = off - np.diag(out)
    return GeneratorMatrix(_frozen(q), name)


def stationary_distribution(Q: GeneratorMatrix) -> StationaryDistribution:
    """Solve ``pi^T Q = 0`` with ``sum(pi) = 1`` by a direct dense solve."""
    q = _as_array(Q)
    n = q.shape[0]
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    # one step of iterative refinement
    r = b - a @ pi
    pi = pi + np.linalg.solve(a, r)
    if not np.all(np.isfinite(pi)) or (pi <= 0).any():
        raise SingularSystem(f"stationary solve produced invalid vector {pi}")
    pi = pi / pi.sum()
    return StationaryDistribution(_frozen(pi))


def _poisson_truncation(lam: float, tol: float, max_terms: int) -> np.ndarray:
    # weights w_k = e^-lam lam^k / k!, truncated once the remaining tail is
    # provably below tol; valid bound for lam <= 1
    weights = [math.exp(-lam)]
    k = 0
    while True:
        term = weights[-1] * lam / (k + 1)
        # tail sum_{m>k} w_m <= w_{k+1} / (1 - lam/(k+2))
        tail = term / (1.0 - lam / (k + 2))
        if tail < tol:
            break
        weights.append(term)
        k += 1
        if k > max_terms:
            raise NonConvergence(f"uniformization needed more than {max_terms} terms")
    return np.array(weights)


def _expm_uniformized(q: np.ndarray, t: float, tol: float, max_terms: int = 200) -> np.ndarray:
    n = q.shape[0]
    if t == 0.0:
        return np.eye(n)
    rate = float(np.max(-np.diag(q)))
    # halve t until rate*t <= 1; each squaring at most doubles the inf-norm error
    squarings = max(0, math.ceil(math.log2(rate * t))) if rate * t > 1.0 else 0
    if squarings > 1000:
        raise NonConvergence("time horizon too large for scaling and squaring")
    h = t / 2.0**squarings
    step_tol = tol / 2.0**squarings
    if step_tol < 1e-300:
        raise NonConvergence("requested tolerance underflows after squaring")
    weights = _poisson_truncation(rate * h, step_tol, max_terms)
    uni = np.eye(n) + q / rate
    term = np.eye(n)
    p = weights[0] * term
    for w in weights[1:]:
        term = term @ uni
        p += w * term
    for _ in range(squarings):
        p = p @ p
    np.clip(p, 0.0, None, out=p)
    p /= p.sum(axis=1, keepdims=True)
    return p


def transition_matrix(Q: GeneratorMatrix, t: float, tol: float = 1e-13) -> TransitionMatrix:
    """``P(t) = exp(Q t)`` by uniformization with bounded truncation error.

    The truncation error is below ``tol`` entrywise; rows are renormalized
    to sum to one afterwards.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = _expm_uniformized(_as_array(Q), float(t), tol)
    return TransitionMatrix(float(t), p)


def transition_matrices_on_grid(Q: GeneratorMatrix, step: float, n_steps: int,
                                tol: float = 1e-13) -> np.ndarray:
    """Stack of ``P(k * step)`` for ``k = 0..n_steps`` via repeated products."""
    q = _as_array(Q)
    ph = _expm_uniformized(q, step, tol)
    out = np.empty((n_steps + 1,) + q.shape)
    out[0] = np.eye(q.shape[0])
    for k in range(1, n_steps + 1):
        nxt = out[k - 1] @ ph
        nxt /= nxt.sum(axis=1, keepdims=True)
        out[k] = nxt
    return out


def is_reversible(Q: GeneratorMatrix, pi, tol: float = 1e-9) -> bool:
    q = _as_array(Q)
    flow = _as_array(pi)[:, None] * q
    return bool(np.max(np.abs(flow - flow.T)) < tol)


def spectral_decomposition(Q: GeneratorMatrix, pi, tol: float = 1e-9) -> SpectralDecomposition:
    q = _as_array(Q)
    p = _as_array(pi)
    if not is_reversible(q, p, tol):
        raise NotReversible("detailed balance fails; no symmetric decomposition")
    s = np.sqrt(p)
    sym = s[:, None] * q / s[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        w, u = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(str(exc)) from exc
    d = -w
    order = np.argsort(d, kind="stable")
    d = d[order]
    u = u[:, order]
    scale = max(1.0, float(np.max(-np.diag(q))))
    small = np.abs(d) < tol * scale
    if small.sum() != 1 or not small[0] or (d[1:] <= 0).any():
        raise DecompositionFailure(f"expected exactly one zero decay rate, got {d}")
    d[0] = 0.0
    weights = (p[:, None] * u**2).sum(axis=0)
    return SpectralDecomposition(_frozen(d), _frozen(u), _frozen(weights))


def spectral_gap(Q: GeneratorMatrix) -> float:
    """Smallest positive decay rate ``min -Re(eigenvalue)`` over nonzero eigenvalues."""
    ev = np.linalg.eigvals(_as_array(Q))
    re = np.sort(-ev.real)
    return float(re[1])


def stationary_argmax(pi, tol: float = 1e-9) -> ChainDiagnostics:
    p = _as_array(pi)
    order = np.argsort(-p, kind="stable")
    top, second = int(order[0]), int(order[1])
    gap = float(p[top] - p[second])
    return ChainDiagnostics(top, second, gap, gap > tol)


def chain_diagnostics(Q: GeneratorMatrix, pi=None, tol: float = 1e-9) -> ChainDiagnostics:
    if pi is None:
        pi = stationary_distribution(Q)
    diag = stationary_argmax(pi, tol)
    return ChainDiagnostics(diag.map_state, diag.runner_up, diag.gap, diag.unique_max,
                            is_reversible(Q, pi, tol))


def _certify_reversible(pi: np.ndarray, sd: SpectralDecomposition, eps: float) -> float:
    # |P_ij(t) - pi_j| <= sqrt(pi_j / pi_i) exp(-d_2 t)
    ratio = math.sqrt(pi.max() / pi.min())
    return max(0.0, math.log(ratio / eps) / sd.eigenvalues[1])


def _certify_general(q: np.ndarray, pi: np.ndarray, eps: float, horizon_factor: float,
                     tol: float) -> float:
    # E(t) = P(t) - 1 pi^T is a semigroup; ||E(s)||_F <= 2 sqrt(S) for all s, so
    # ||E(t0)||_F <= eps / (2 C) bounds every entry of E(t) by eps for t >= t0
    n = q.shape[0]
    c = 2.0 * math.sqrt(n)
    target = min(0.5, eps / (2.0 * c))
    relax = 1.0 / spectral_gap(q)
    horizon = horizon_factor * relax
    ones_pi = np.outer(np.ones(n), pi)

    def enorm(t):
        return np.linalg.norm(_expm_uniformized(q, t, tol) - ones_pi)

    lo, hi = 0.0, 0.01 * relax
    while enorm(hi) > target:
        lo, hi = hi, 2.0 * hi
        if hi > horizon:
            raise HorizonExceeded(
                f"||P(t) - 1 pi^T||_F stayed above {target:.3g} up to t = {horizon:.6g}"
            )
    for _ in range(60):
        if hi - lo <= 1e-3 * hi:
            break
        mid = 0.5 * (lo + hi)
        if enorm(mid) <= target:
            hi = mid
        else:
            lo = mid
    return 2.0 * hi


def tau_star(Q: GeneratorMatrix, grid_step: Optional[float] = None,
             horizon_factor: float = 200.0, tol: float = 1e-9) -> TauStarResult:
    """Empirical and certified times after which every row of ``P(t)`` peaks at ``i*``.

    ``certified`` comes from an analytic bound (spectral for reversible
    chains, semigroup/Frobenius bound otherwise). ``empirical`` is the
    earliest grid time from which the argmax property holds at every grid
    point up to ``certified``.
    """
    q = _as_array(Q)
    pi = stationary_distribution(Q).pi
    diag = stationary_argmax(pi, tol)
    if not diag.unique_max:
        raise UniqueMaxRequired(
            f"stationary maximum is not unique (top two differ by {diag.gap:.3g})"
        )
    eps = diag.epsilon
    if is_reversible(q, pi, tol):
        cert = _certify_reversible(pi, spectral_decomposition(q, pi, tol), eps)
    else:
        cert = _certify_general(q, pi, eps, horizon_factor, tol * 1e-4)
    if grid_step is None:
        n_steps = 1000
        step = cert / n_steps
    else:
        step = float(grid_step)
        if step <= 0:
            raise ValueError("grid_step must be positive")
        n_steps = max(1, math.ceil(cert / step))
    grid = transition_matrices_on_grid(q, step, n_steps)
    i_star = diag.map_state
    others = np.delete(grid, i_star, axis=2).max(axis=2)
    ok = (grid[:, :, i_star] > others).all(axis=1)
    bad = np.flatnonzero(~ok)
    emp = 0.0 if bad.size == 0 else min((bad[-1] + 1) * step, cert)
    return TauStarResult(float(emp), float(cert), float(step), i_star, diag.gap)
