import json

import numpy as np
import pytest

from freshness import experiments as ex
from freshness.ctmc import tau_star
from freshness.errors import InvalidConfig
from freshness.estimators import Erlang, TauMap

TWO_STATE = {"name": "ts", "Q": [[-5.0, 5.0], [0.1, -0.1]]}


def _cfg(**over):
    d = {
        "chain": TWO_STATE,
        "estimators": [{"type": "martingale"}, {"type": "erlang", "gamma": 4, "lambda_scale": 1.0},
                       {"type": "tau_map", "tau_scale": 2.0}],
        "mu_grid": [0.5, 2.0],
        "methods": ["analytic", "oracle", "sim"],
        "sim": {"total_events": 20000, "batches": 10, "n_reps": 2},
        "gamma_large": 60,
        "seed": 5,
    }
    d.update(over)
    return ex.config_from_json(d)


def test_scales_resolve_against_tau_star():
    cfg = _cfg()
    ts = tau_star(cfg.chain).empirical
    assert cfg.estimators[1] == Erlang(4, 1.0 / ts)
    assert cfg.estimators[2] == TauMap(2.0 * ts)
    assert cfg.sim.seed == 5 and cfg.n_reps == 2


def test_mu_grid_forms():
    assert _cfg(mu_grid={"geomspace": [0.1, 10, 3]}).mu_grid == pytest.approx((0.1, 1.0, 10.0))
    assert _cfg(mu_grid={"linspace": [1, 2, 3]}).mu_grid == (1.0, 1.5, 2.0)
    with pytest.raises(InvalidConfig):
        _cfg(mu_grid={"arange": [1, 2]})


@pytest.mark.parametrize("over", [
    {"estimators": []}, {"mu_grid": []}, {"mu_grid": [0.0]}, {"methods": []},
    {"methods": ["magic"]}, {"gamma_large": None},
    {"estimators": [{"type": "erlang", "gamma": 1, "lambda": 1}]},
])
def test_invalid_configs(over):
    with pytest.raises(InvalidConfig):
        _cfg(**over)


def test_missing_field_message():
    with pytest.raises(InvalidConfig, match="mu_grid"):
        ex.config_from_json({"chain": TWO_STATE, "estimators": [{"type": "martingale"}]})


def test_rows_and_csv_shape():
    rows = ex.run_experiment(_cfg())
    assert len(rows) == 3 * 2 * 3
    text = ex.format_csv(rows, timestamp=False)
    header, first = text.splitlines()[:2]
    assert header == ",".join(ex.CSV_COLUMNS)
    assert first.startswith("ts,martingale,0.5,,,,analytic,")
    sims = [r for r in rows if r.method == "sim"]
    assert all(r.sim_events == 40000 and r.ci_halfwidth > 0 for r in sims)
    assert len({r.seed for r in sims}) == len(sims)
    by = {(r.estimator, r.mu, r.method): r.freshness for r in rows}
    for spec in ("martingale", "erlang"):
        assert abs(by[(spec, 2.0, "analytic")] - by[(spec, 2.0, "oracle")]) < 1e-10


def test_csv_deterministic_across_threads(tmp_path):
    cfg = _cfg()
    a = ex.format_csv(ex.run_experiment(cfg, threads=1), timestamp=False)
    b = ex.format_csv(ex.run_experiment(cfg, threads=3), timestamp=False)
    assert a == b
    ex.write_csv(ex.run_experiment(cfg), tmp_path / "x.csv")
    back = ex.read_csv(tmp_path / "x.csv")
    assert back[0]["chain_name"] == "ts" and len(back) == 18
    assert (tmp_path / "x.csv").read_text().startswith("# generated ")


def test_point_seed_is_stable():
    assert ex.point_seed(0, 3) == ex.point_seed(0, 3)
    assert ex.point_seed(0, 3) != ex.point_seed(0, 4) != ex.point_seed(1, 3)


def test_config_file_relative_chain(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(TWO_STATE))
    (tmp_path / "cfg.json").write_text(json.dumps(
        {"chain": "c.json", "estimators": [{"type": "martingale"}], "mu_grid": [1.0]}))
    cfg = ex.load_config(tmp_path / "cfg.json")
    assert np.array_equal(cfg.chain.rates, np.array(TWO_STATE["Q"]))
    with pytest.raises(InvalidConfig, match="not valid JSON"):
        (tmp_path / "bad.json").write_text("{")
        ex.load_config(tmp_path / "bad.json")


@pytest.mark.parametrize("name", ["fig3", "fig4", "fig5"])
def test_bundled_configs_load(name):
    cfg = ex.load_config(f"bundled:{name}")
    assert cfg.mu_grid and cfg.estimators
