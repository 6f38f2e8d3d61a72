"""Binary freshness of remote estimators of continuous-time Markov chains.

Closed-form values live in :mod:`freshness.analytic`, the exact joint-chain
solve in :mod:`freshness.oracle` and Monte Carlo in :mod:`freshness.simulator`.
"""
from .analytic import (
    FreshnessValue,
    erlang_freshness,
    exponential_freshness,
    martingale_freshness,
    tau_map_freshness_general,
)
from .chains import bundled_chain, load_chain, random_chain
from .ctmc import (
    GeneratorMatrix,
    stationary_distribution,
    tau_star,
    transition_matrix,
    validate_generator,
)
from .errors import FreshnessError
from .estimators import Erlang, Exponential, Martingale, TauMap
from .oracle import oracle_value
from .simulator import SimConfig, simulate

__version__ = "0.1.0"
