import json
import math

import numpy as np
import pytest

from ensemble_spectra.enumeration import exact_expectation
from ensemble_spectra.experiments import (
    ConfigError,
    ExperimentConfig,
    clopper_pearson_upper,
    degree_concentration_stat,
    delta_experiment,
    fit_tail_model,
    lambda2_tail,
    lambda_ratio_gap,
    ratio_concentration,
    schedule_constraint,
    transfer_check,
    variance_check,
    with_overrides,
)
from ensemble_spectra.graph import ConstraintSpec, is_graphical


def small(**kw):
    base = dict(n_list=(20, 30), samples_per_n=20, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


# config ---------------------------------------------------------------------

def test_schedule_rounding():
    sc = schedule_constraint("degree_sequence", 5, 0.5)
    assert sc.target == 2 and sc.p == 0.5
    odd = schedule_constraint("degree_sequence", 5, 0.75)
    assert odd.target == 2  # d = 3 would make n d odd
    assert schedule_constraint("degree_sequence", 800, 0.5).target == 400
    e = schedule_constraint("edge_count", 5, 0.5)
    assert e.target == 5 and e.p == 0.5
    for n in range(3, 40):
        for p in (0.1, 0.33, 0.5, 0.9):
            assert is_graphical(schedule_constraint("degree_sequence", n, p).spec)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="triangles")
    with pytest.raises(ConfigError):
        ExperimentConfig(p=1.5)
    with pytest.raises(ConfigError):
        ExperimentConfig(n_list=())
    with pytest.raises(ConfigError):
        ExperimentConfig(samples_per_n=1)
    with pytest.raises(ConfigError):
        ExperimentConfig(estimators=("magic",))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        with_overrides(ExperimentConfig(), nonsense=3)


def test_config_round_trip_and_digest(tmp_path):
    cfg = ExperimentConfig(kind="edge_count", n_list=(10, 20), seed=5, sampler={"method": None})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg
    assert with_overrides(cfg, seed=9, workers=2).digest == cfg.digest
    assert with_overrides(cfg, p=0.3).digest != cfg.digest


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_ultra_dense_schedule():
    cfg = small(schedule="ultra_dense", n_list=(100,), kind="edge_count")
    assert cfg.density(100) == pytest.approx(0.9)
    row = delta_experiment(cfg).rows[0]
    assert row["p_can"] == pytest.approx(0.9, abs=1e-3)


# Δ_n --------------------------------------------------------------------------

@pytest.mark.parametrize("kind,spec", [
    ("degree_sequence", ConstraintSpec.constant_degree(4, 2)),
    ("edge_count", ConstraintSpec.edge_count(4, 3)),
])
def test_delta_small_n_matches_enumeration(kind, spec):
    mic, can = exact_expectation(spec, "lambda1")
    exact = can - mic
    for seed in range(3):
        row = delta_experiment(ExperimentConfig(kind=kind, n_list=(4,), samples_per_n=3000, seed=seed)).rows[0]
        assert row["target"] == (spec.target if not spec.is_degree else 2)
        assert abs(row["delta"] - exact) <= 4 * row["delta_stderr"], (seed, row["delta"], exact)


def test_delta_is_deterministic_and_worker_invariant():
    cfg = small(kind="edge_count", estimators=("lambda1", "degree_ratio", "expansion"))
    a = delta_experiment(cfg).to_csv()
    b = delta_experiment(cfg).to_csv()
    c = delta_experiment(with_overrides(cfg, workers=2)).to_csv()
    assert a == b == c
    assert delta_experiment(with_overrides(cfg, seed=2)).to_csv() != a


def test_delta_report_columns():
    report = delta_experiment(small(estimators=("lambda1", "degree_ratio")))
    row = report.row_for(20)
    assert row["mic_exact"] and row["mic_mean"] == row["target"]
    assert row["fk_prediction"] == pytest.approx(19 * row["p_can"] + 1 - row["p_can"])
    assert not math.isnan(row["can_degree_ratio_mean"])
    assert report.nonconverged == 0
    assert report.filename().startswith("delta_") and report.filename().endswith("_1.csv")
    assert report.to_csv().splitlines()[0].split(",")[0] == "n"


def test_degree_ratio_estimator_above_lambda1_on_average():
    row = delta_experiment(small(n_list=(60,), estimators=("lambda1", "degree_ratio"))).rows[0]
    assert row["can_degree_ratio_mean"] >= row["can_mean"]


# variance ----------------------------------------------------------------------

def test_variance_degenerate_p1():
    row = variance_check(small(p=1.0, n_list=(10,))).rows[0]
    assert row["variance"] == 0.0
    assert row["mean_lambda1"] == pytest.approx(9.0)


def test_variance_targets():
    report = variance_check(small(p=0.2, n_list=(100,), samples_per_n=200))
    row = report.rows[0]
    assert row["variance_target"] == pytest.approx(2 * row["p_can"] * (1 - row["p_can"]))
    assert row["shift_target"] == pytest.approx(1 - row["p_can"])
    assert row["var_ci_low"] <= row["variance"] <= row["var_ci_high"]


# concentration -------------------------------------------------------------------

def test_concentration_degenerate_p1():
    deg = degree_concentration_stat(small(p=1.0))
    assert all(r["q99"] == 0.0 and r["event_hits"] == 0 for r in deg.rows)
    rat = ratio_concentration(small(p=1.0, kind="edge_count"))
    for r in rat.rows:
        assert r["q99"] == pytest.approx(0.0, abs=1e-12)


def test_degree_concentration_scale():
    report = degree_concentration_stat(small(n_list=(50, 100), samples_per_n=200))
    scaled = report.column("q99_scaled")
    assert max(scaled) / min(scaled) <= 2.0
    assert "tail_fit" in report.summary


def test_ratio_concentration_rows():
    report = ratio_concentration(small(kind="edge_count"))
    assert {r["ensemble"] for r in report.rows} == {"can", "mic"}
    assert {r["statistic"] for r in report.rows} == {"ratio_deviation", "edge_sum_deviation"}
    # the microcanonical edge sum is exact
    mic_edge = [r for r in report.rows if r["ensemble"] == "mic" and r["statistic"] == "edge_sum_deviation"]
    assert all(r["q99"] <= 1.0 / r["n"] for r in mic_edge)
    replay = ratio_concentration(small())
    exact = [r for r in replay.rows if r["ensemble"] == "mic_exact"]
    assert exact and all(r["q90"] == r["q99"] for r in exact)


def test_lambda_gap_rows():
    report = lambda_ratio_gap(small(n_list=(40,), samples_per_n=50))
    stats = {(r["statistic"], r["event"]) for r in report.rows}
    assert ("ratio_lambda1_gap", "") in stats
    assert ("lambda2", "ge_3_sigma_sqrt_n") in stats
    gap = report.row_for(40, statistic="ratio_lambda1_gap")
    assert gap["q99"] >= 0 and gap["nonconverged"] == 0


def test_lambda2_tail_matches_gap_rows():
    cfg = small(n_list=(40,), samples_per_n=30)
    tail = lambda2_tail(cfg).row_for(40, event="ge_3_sigma_sqrt_n")
    assert tail["samples"] == 30 and tail["q99_scaled"] < 3.0
    # λ2 of a dense graph is far below the top eigenvalue
    assert tail["q99"] < 0.5 * 39 * 0.5


def test_clopper_pearson_upper():
    assert clopper_pearson_upper(0, 10_000) == pytest.approx(1 - 0.05 ** (1 / 10_000), rel=1e-9)
    assert clopper_pearson_upper(5, 5) == 1.0
    assert clopper_pearson_upper(3, 100) > 0.03


def test_fit_tail_model_recovers_parameters():
    ns = [100, 200, 400, 800]
    rates = [math.exp(-2.0 * math.log(n) ** 1.5) for n in ns]
    fit = fit_tail_model(ns, rates)
    assert fit["xi"] == pytest.approx(1.5, abs=1e-9)
    assert fit["nu"] == pytest.approx(2.0, abs=1e-9)
    assert math.isnan(fit_tail_model([100], [0.1])["xi"])


# transfer -------------------------------------------------------------------------

def test_transfer_empty_event():
    report = transfer_check(small(kind="edge_count", n_list=(10, 50)), event="empty")
    assert report.column("ratio") == [0.0, 0.0]


@pytest.mark.parametrize("kind,n_list", [("edge_count", (5, 30, 200)), ("degree_sequence", (4, 5, 6))])
def test_transfer_gamma_identity(kind, n_list):
    report = transfer_check(small(kind=kind, n_list=n_list), event="gamma")
    for r in report.rows:
        assert abs(r["gamma_identity"] - 1.0) <= 1e-10


def test_transfer_exact_small_n():
    report = transfer_check(small(kind="degree_sequence", n_list=(4, 6)), event="ratio_deviation")
    for r in report.rows:
        assert r["method"] == "exact"
        assert 0.0 <= r["p_event"] <= 1.0
    with pytest.raises(ConfigError):
        transfer_check(small(kind="degree_sequence", n_list=(30,)))
    with pytest.raises(ConfigError):
        transfer_check(small(kind="edge_count"), event="bogus")


def test_transfer_fixed_threshold_ratio_grows():
    # with a threshold proportional to 1/sqrt(n) the event probability stays flat
    cfg = ExperimentConfig(kind="edge_count", n_list=(100, 400), samples_per_n=2000,
                           gamma=1.0, event_scale="sqrt", seed=3)
    ratios = transfer_check(cfg).column("ratio")
    assert ratios[1] > ratios[0]


@pytest.mark.slow
def test_transfer_log_threshold_ratio_decreases():
    cfg = ExperimentConfig(kind="edge_count", n_list=(100, 400), samples_per_n=10_000,
                           gamma=0.4, event_scale="log", seed=0)
    report = transfer_check(cfg)
    ratios = report.column("ratio")
    assert ratios[1] < ratios[0]
    assert all(m == "monte_carlo" for m in report.column("method"))


def test_jensen_canonical_exceeds_microcanonical():
    row = delta_experiment(small(n_list=(30,), samples_per_n=100)).rows[0]
    assert row["delta"] > 0
    assert np.isfinite(row["delta_stderr"])
