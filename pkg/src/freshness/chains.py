"""Chain I/O, random test chains and the bundled experiment chains."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .ctmc import GeneratorMatrix, stationary_argmax, stationary_distribution, validate_generator
from .errors import GenerationBudgetExceeded, InvalidConfig

__all__ = [
    "load_chain",
    "chain_from_json",
    "dump_chain",
    "random_chain",
    "bundled_chain",
    "BUNDLED",
    "random_corpus",
]

BUNDLED = ("fig3_general4", "fig4_reversible5", "fig5_two_state")


def chain_from_json(d: dict) -> GeneratorMatrix:
    if "Q" not in d:
        raise InvalidConfig("chain JSON needs a 'Q' field")
    name = d.get("name")
    if name is not None and not isinstance(name, str):
        raise InvalidConfig("chain 'name' must be a string")
    return validate_generator(d["Q"], name=name)


def bundled_chain(name: str) -> GeneratorMatrix:
    if name not in BUNDLED:
        raise InvalidConfig(f"no bundled chain {name!r}; choose from {', '.join(BUNDLED)}")
    text = resources.files("freshness").joinpath(f"data/chains/{name}.json").read_text()
    return chain_from_json(json.loads(text))


def load_chain(src: Union[str, Path, dict]) -> GeneratorMatrix:
    """Load a chain from a dict, a JSON file, or ``bundled:<name>``."""
    if isinstance(src, dict):
        return chain_from_json(src)
    src = str(src)
    if src.startswith("bundled:"):
        return bundled_chain(src.split(":", 1)[1])
    try:
        with open(src) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read chain file {src}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"chain file {src} is not valid JSON: {exc}") from None
    return chain_from_json(d)


def dump_chain(Q: GeneratorMatrix) -> str:
    return json.dumps(Q.to_json(), indent=2)


def _general(n, rng):
    r = rng.uniform(0.1, 2.0, size=(n, n))
    np.fill_diagonal(r, 0.0)
    return r


def _reversible(n, rng):
    # either a birth-death chain or random pi with symmetric conductances,
    # q_ij = c_ij / pi_i so that pi_i q_ij = c_ij = pi_j q_ji
    if rng.random() < 0.5:
        r = np.zeros((n, n))
        for i in range(n - 1):
            r[i, i + 1] = rng.uniform(0.1, 2.0)
            r[i + 1, i] = rng.uniform(0.1, 2.0)
        return r
    pi = rng.uniform(0.2, 1.0, size=n)
    pi /= pi.sum()
    c = rng.uniform(0.02, 0.4, size=(n, n))
    c = np.triu(c, 1)
    c = c + c.T
    return c / pi[:, None]


def random_chain(n: int, kind: str = "general", seed: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None, min_gap: float = 0.05,
                 max_attempts: int = 10_000, name: Optional[str] = None) -> GeneratorMatrix:
    """Random irreducible chain whose stationary maximum beats the runner-up by ``min_gap``.

    ``general``: off-diagonal rates iid U(0.1, 2).  ``reversible``: a random
    birth-death chain or a conductance chain.
    """
    if n < 2:
        raise InvalidConfig("need at least 2 states")
    if kind not in ("general", "reversible"):
        raise InvalidConfig(f"unknown chain kind {kind!r}")
    if rng is None:
        rng = np.random.default_rng(seed)
    make = _general if kind == "general" else _reversible
    for _ in range(max_attempts):
        r = make(n, rng)
        np.fill_diagonal(r, -r.sum(axis=1))
        q = validate_generator(r, name=name)
        if stationary_argmax(stationary_distribution(q)).gap > min_gap:
            return q
    raise GenerationBudgetExceeded(
        f"no {kind} {n}-state chain with stationary gap > {min_gap} in {max_attempts} draws"
    )


def random_corpus(n_cases: int, seed: int = 0, sizes=range(2, 7),
                  kinds=("general", "reversible")) -> list:
    """Deterministic list of random unique-max chains cycling through sizes and kinds."""
    rng = np.random.default_rng(seed)
    sizes = list(sizes)
    out = []
    for c in range(n_cases):
        n = sizes[c % len(sizes)]
        kind = kinds[(c // len(sizes)) % len(kinds)]
        out.append(random_chain(n, kind, rng=rng, name=f"{kind}{n}_s{seed}_c{c}"))
    return out
