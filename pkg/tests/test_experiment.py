import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from simquery.experiment import (
    AGGREGATE_COLUMNS,
    RESULT_COLUMNS,
    SEED_STRIDE,
    ConfigError,
    ExperimentConfig,
    aggregate,
    load_config,
    run_experiment,
    write_outputs,
)
from simquery.reports import compare_schemes, purity_chart

EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"


def _small(**overrides) -> ExperimentConfig:
    params = dict(
        name="small",
        k=4,
        dataset="gaussians",
        n_per_class=10,
        noise_std=1.0,
        sigma=3.0,
        schemes=("uniform", "clus2k"),
        budgets=(20, 40, 80),
        repetitions=2,
        recluster_period=10,
        workers=1,
    )
    params.update(overrides)
    return ExperimentConfig(**params)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k": 1},
        {"dataset": "iris"},
        {"dataset": "csv"},
        {"schemes": ()},
        {"schemes": ("uniform", "greedy")},
        {"mode": "symmetric"},
        {"repetitions": 0},
        {"budgets": (10, 10)},
        {"budgets": (0, 5)},
        {"workers": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        _small(**kwargs)


def test_shipped_configs_load():
    for path in sorted(EXPERIMENTS.glob("*.yml")):
        cfg = load_config(path)
        assert cfg.k >= 2
        assert cfg.sigma is not None


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yml"
    path.write_text("name: x\nk: 2\nbudget: 10\n")
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(path)


@pytest.mark.parametrize("text", ["- a\n- b\n", "name: [unclosed\n", "name: x\n"])
def test_load_config_rejects_bad_files(tmp_path, text):
    path = tmp_path / "bad.yml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yml")


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv("SIMQUERY_WORKERS", "3")
    assert ExperimentConfig(name="x", k=2).workers == 3


def test_default_budgets_span_one_to_twenty_percent():
    budgets = ExperimentConfig(name="x", k=2).resolve_budgets(40)
    assert budgets[0] == 8
    assert budgets[-1] == 156
    assert len(budgets) == 10
    assert budgets == sorted(set(budgets))


def test_budget_beyond_edge_count_rejected():
    with pytest.raises(ConfigError, match="exceeds"):
        _small(budgets=(100, 1000)).resolve_budgets(40)


def test_seed_derivation():
    cfg = _small(seed_base=5)
    assert [cfg.seed(r) for r in range(3)] == [5, 5 + SEED_STRIDE, 5 + 2 * SEED_STRIDE]


def test_clus2k_config_carries_experiment_settings():
    cfg = _small(overcluster_factor=3, batch_size=2, mode="normalized").clus2k_config(seed=11)
    assert (cfg.k, cfg.overcluster_factor, cfg.batch_size, cfg.mode, cfg.seed) == (4, 3, 2, "normalized", 11)


def test_results_cover_every_cell():
    cfg = _small()
    results = run_experiment(cfg)
    assert list(results.columns) == RESULT_COLUMNS
    assert len(results) == 2 * 3 * 2
    assert results["purity"].between(0.25, 1.0).all()
    assert (results["wallMillis"] == 0).all()
    assert results["scheme"].tolist()[:6] == ["uniform"] * 6
    seeds = results.groupby("rep")["seed"].unique()
    assert [s.tolist() for s in seeds] == [[0], [SEED_STRIDE]]


def test_full_budget_gives_equal_purity_across_schemes():
    cfg = _small(
        n_per_class=6,
        schemes=("uniform", "clus2k", "component-join"),
        budgets=(276,),
        repetitions=2,
    )
    results = run_experiment(cfg)
    by_rep = results.pivot(index="rep", columns="scheme", values="purity")
    np.testing.assert_array_equal(by_rep["uniform"], by_rep["clus2k"])
    np.testing.assert_array_equal(by_rep["uniform"], by_rep["component-join"])


def test_with_replacement_scheme_spends_the_budget():
    results = run_experiment(_small(schemes=("with-replacement",), repetitions=1))
    assert results["budget"].tolist() == [20, 40, 80]


def test_timing_is_recorded_on_request():
    results = run_experiment(_small(schemes=("uniform",), repetitions=1, record_timing=True))
    assert (results["wallMillis"] >= 0).all()


def test_outputs_are_byte_identical_across_runs(tmp_path):
    for run in ("a", "b"):
        cfg = _small(output=str(tmp_path / run))
        write_outputs(cfg, run_experiment(cfg))
    for name in ("results.csv", "aggregate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "results.csv").read_text().splitlines()[0]
    assert header == "scheme,budget,rep,seed,purity,wallMillis"
    chart = json.loads((tmp_path / "a" / "purity_chart.json").read_text())
    assert "layer" in chart


def test_aggregate_means_and_stds():
    results = pd.DataFrame(
        {
            "scheme": ["uniform"] * 4 + ["clus2k"] * 2,
            "budget": [10, 10, 20, 20, 10, 20],
            "rep": [0, 1, 0, 1, 0, 0],
            "seed": [0, 1, 0, 1, 0, 0],
            "purity": [0.5, 0.7, 0.8, 0.8, 0.9, 1.0],
            "wallMillis": [0.0] * 6,
        }
    )
    agg = aggregate(results)
    assert list(agg.columns) == AGGREGATE_COLUMNS
    row = agg[(agg["scheme"] == "uniform") & (agg["budget"] == 10)].iloc[0]
    assert row["meanPurity"] == pytest.approx(0.6)
    assert row["stdPurity"] == pytest.approx(np.std([0.5, 0.7], ddof=1))
    assert row["reps"] == 2
    single = agg[agg["scheme"] == "clus2k"]
    assert (single["stdPurity"] == 0.0).all()


def test_compare_schemes():
    agg = pd.DataFrame(
        {
            "scheme": ["uniform", "uniform", "clus2k", "clus2k"],
            "budget": [10, 20, 10, 20],
            "meanPurity": [0.6, 0.8, 0.7, 0.75],
            "stdPurity": [0.1, 0.0, 0.1, 0.0],
            "reps": [3, 3, 3, 3],
        }
    )
    table = compare_schemes(agg, "clus2k", "uniform")
    assert table["budget"].tolist() == [10, 20]
    np.testing.assert_allclose(table["difference"], [0.1, -0.05])
    assert table["wins"].tolist() == [True, False]
    assert table["withinPooledStd"].tolist() == [True, False]


def test_purity_chart_encodes_every_scheme():
    agg = pd.DataFrame(
        {
            "scheme": ["uniform", "clus2k"],
            "budget": [10, 10],
            "meanPurity": [0.6, 0.7],
            "stdPurity": [0.1, 0.0],
            "reps": [3, 3],
        }
    )
    spec = purity_chart(agg, title="demo").to_dict()
    assert spec["title"] == "demo"
    assert len(spec["layer"]) == 2
    domain = spec["layer"][0]["encoding"]["color"]["scale"]["domain"]
    assert domain == ["uniform", "clus2k"]
