"""Experiment grid, synthetic data generator, ranking, and report files."""

import json
from datetime import date

import numpy as np
import numpy.testing as npt
import pytest

from coinseer import harness, stats
from coinseer.metrics import MetricsReport
from coinseer.signals import bundled_lexicon


def small_options(**overrides):
    base = dict(
        master_seed=3, k_max=2, j_max=2, sizes=(6,), batch_size=8,
        max_epochs=4, patience=None, max_lag=2,
    )
    base.update(overrides)
    return harness.RunOptions(**base)


def fake_result(coin, kind, subset, j, rmspe, k=1):
    cfg = harness.ExperimentConfig(coin, kind, tuple(subset), 0 if kind == "arima" else k, j)
    report = MetricsReport(
        n=10, mape=rmspe * 0.8, mape_ci=0.3, maxape=rmspe * 2,
        mspe=rmspe**2, rmspe=rmspe, rmspe_ci=0.4, rmse=1.0,
    )
    return harness.ExperimentResult(cfg, report)


def test_signal_set_label():
    assert harness.signal_set_label(()) == "$"
    assert harness.signal_set_label(("r_lang",)) == "$+R_Lang"
    assert harness.signal_set_label(("gh_pop", "r_lang")) == "$+GH_Pop+R_Lang"


def test_config_id_and_validation():
    cfg = harness.ExperimentConfig("btc", "lstm", ("gh_pop", "r_vol"), 7, 2)
    assert harness.config_id(cfg) == "btc_lstm_gh_pop-r_vol_k7_j2"
    baseline = harness.ExperimentConfig("btc", "arima", (), 0, 1)
    assert harness.config_id(baseline) == "btc_arima_price_j1"
    with pytest.raises(ValueError):
        harness.ExperimentConfig("btc", "lstm", ("r_vol", "gh_pop"), 7, 2)
    with pytest.raises(ValueError):
        harness.ExperimentConfig("btc", "arima", ("r_vol",), 0, 1)
    with pytest.raises(ValueError):
        harness.ExperimentConfig("btc", "lstm", (), 0, 1)
    with pytest.raises(ValueError):
        harness.ExperimentConfig("btc", "hmm", (), 1, 1)


def test_derive_seed_is_stable_and_label_sensitive():
    a = harness.derive_seed(7, "init", "btc_lstm_k1_j1")
    assert a == harness.derive_seed(7, "init", "btc_lstm_k1_j1")
    assert a != harness.derive_seed(8, "init", "btc_lstm_k1_j1")
    assert a != harness.derive_seed(7, "train", "btc_lstm_k1_j1")
    assert 0 <= a < 2**64


def test_enumerate_grid_order_and_counts():
    configs = harness.enumerate_grid(
        ["a", "b"], ["gh_pop", "r_vol"], k_range=[1, 2], j_range=[1],
    )
    per_coin = 1 + 4 * 2  # one arima j, four subsets x two k
    assert len(configs) == 2 * per_coin
    assert configs[0] == harness.ExperimentConfig("a", "arima", (), 0, 1)
    assert configs[1].signal_set == ()
    assert configs[3].signal_set == ("gh_pop",)
    subsets = [c.signal_set for c in configs[1:per_coin:2]]
    assert subsets == [(), ("gh_pop",), ("r_vol",), ("gh_pop", "r_vol")]
    assert all(c.coin == "a" for c in configs[:per_coin])

    explicit = harness.enumerate_grid(
        ["a"], ["gh_pop", "r_lang"], [1], [1, 3], subsets=[(), ("r_lang",)],
    )
    assert [c.j for c in explicit if c.model_kind == "arima"] == [1, 3]
    assert len(explicit) == 2 + 2 * 2

    with pytest.raises(ValueError):
        harness.enumerate_grid(["a"], ["nope"], [1], [1])
    with pytest.raises(ValueError):
        harness.enumerate_grid(["a"], ["gh_pop"], [0], [1])
    with pytest.raises(ValueError):
        harness.enumerate_grid(["a"], ["gh_pop"], [1], [1], subsets=[("bogus",)])


def test_synthetic_coin_is_valid_and_deterministic():
    price, comments, events = harness.generate_synthetic_coin("alphacoin", 11, 90)
    assert len(price) == 90
    assert np.all(price.low > 0)
    assert np.all(price.high >= price.low)
    assert np.all((price.open >= price.low) & (price.open <= price.high))
    assert comments and events
    for rec in comments[:50]:
        assert rec.body
    price2, comments2, events2 = harness.generate_synthetic_coin("alphacoin", 11, 90)
    npt.assert_array_equal(price.high, price2.high)
    assert comments == comments2 and events == events2
    price3, _, _ = harness.generate_synthetic_coin("alphacoin", 12, 90)
    assert not np.array_equal(price.high, price3.high)
    with pytest.raises(ValueError):
        harness.generate_synthetic_coin("alphacoin", 1, 10)


def test_synthetic_popularity_tracks_price():
    wins = 0
    for seed in range(10):
        bundle = harness.synthetic_bundle(seed, days=150, n_coins=1)
        cd = bundle.coins["alphacoin"]
        watch = cd.signals["gh_pop"].column("gh_watch")
        r, _ = stats.pearson(watch, cd.price.high)
        if r > 0.3:
            wins += 1
    assert wins >= 9


def test_assemble_coin_builds_all_families():
    bundle = harness.synthetic_bundle(5, days=60, n_coins=2)
    assert set(bundle.coins) == {"alphacoin", "betacoin"}
    for cd in bundle.coins.values():
        assert set(cd.signals) == {
            "gh_pop", "gh_all", "r_vol", "r_lang", "r_score", "r_sent"
        }
        for matrix in cd.signals.values():
            assert matrix.dates == cd.price.dates
    assert bundle.dates == bundle.coins["alphacoin"].price.dates


def test_run_grid_end_to_end_small():
    bundle = harness.synthetic_bundle(3, days=60, n_coins=1)
    configs = harness.enumerate_grid(
        ["alphacoin"], ["gh_pop"], [1], [1, 2], subsets=[(), ("gh_pop",)],
    )
    options = small_options()
    seen = []
    results = harness.run_grid(configs, bundle, options, jobs=1, progress=seen.append)
    assert len(results) == len(configs) == 6
    assert len(seen) == 6
    assert all(r.error is None for r in results)
    for r in results:
        assert r.metrics.n == len(r.predictions)
        for day, truth, pred in r.predictions:
            assert isinstance(day, date)
            assert truth > 0
    by_id = {harness.config_id(r.config): r for r in results}
    assert "alphacoin_arima_price_j1" in by_id
    # identical test anchors across every config at the same horizon
    for j in (1, 2):
        target_sets = {
            tuple(d for d, _, _ in r.predictions)
            for r in results if r.config.j == j
        }
        assert len(target_sets) == 1

    rows = harness.rank_models(results)
    assert len(rows) == 3
    assert [j for j, _ in rows[0].rmspe_by_j] == [1, 2]
    assert rows == sorted(rows, key=lambda r: (r.mean, r.label))


def test_run_grid_parallel_matches_serial():
    bundle = harness.synthetic_bundle(4, days=60, n_coins=1)
    configs = harness.enumerate_grid(
        ["alphacoin"], ["r_vol"], [1], [1], subsets=[(), ("r_vol",)],
    )
    options = small_options()
    serial = harness.run_grid(configs, bundle, options, jobs=1)
    parallel = harness.run_grid(configs, bundle, options, jobs=3)
    assert [harness.config_id(r.config) for r in serial] == [
        harness.config_id(r.config) for r in parallel
    ]
    for a, b in zip(serial, parallel):
        assert a.predictions == b.predictions
        assert a.metrics.rmspe == b.metrics.rmspe


def test_run_experiment_reports_failure_instead_of_raising():
    bundle = harness.synthetic_bundle(6, days=60, n_coins=1)
    cfg = harness.ExperimentConfig("alphacoin", "lstm", (), 54, 2)
    result = harness.run_experiment(cfg, bundle, small_options(k_max=54))
    assert result.metrics is None
    assert result.error


def test_train_lstm_experiment_norm_modes():
    # seed 8 puts the price peak after the training period, so the two
    # normalization modes fit different ranges
    bundle = harness.synthetic_bundle(8, days=60, n_coins=1)
    cfg = harness.ExperimentConfig("alphacoin", "lstm", (), 2, 1)
    whole, whole_model = harness.train_lstm_experiment(cfg, bundle, small_options())
    causal, causal_model = harness.train_lstm_experiment(
        cfg, bundle, small_options(whole_series_norm=False)
    )
    assert whole.train_summary["out_of_range"] == 0
    assert causal.train_summary["out_of_range"] > 0
    assert whole_model.norm.maxs[0] > causal_model.norm.maxs[0]
    assert whole.predictions != causal.predictions
    # truths agree, only the forecasts move
    assert [d for d, _, _ in whole.predictions] == [d for d, _, _ in causal.predictions]
    assert [t for _, t, _ in whole.predictions] == [t for _, t, _ in causal.predictions]


def test_rank_models_matches_hand_average():
    results = [
        fake_result("a", "arima", (), 1, 4.0),
        fake_result("b", "arima", (), 1, 6.0),
        fake_result("a", "arima", (), 2, 8.0),
        fake_result("b", "arima", (), 2, 10.0),
        fake_result("a", "lstm", ("r_vol",), 1, 3.0),
        fake_result("b", "lstm", ("r_vol",), 1, 5.0),
        fake_result("a", "lstm", ("r_vol",), 2, 7.0),
        fake_result("b", "lstm", ("r_vol",), 2, 9.0),
    ]
    rows = harness.rank_models(results)
    assert [r.label for r in rows] == ["LSTM $+R_Vol", "ARIMA $"]
    npt.assert_allclose(rows[0].rmspe_by_j, [(1, 4.0), (2, 8.0)])
    npt.assert_allclose(rows[0].mean, 6.0)
    npt.assert_allclose(rows[1].mean, 7.0)

    with pytest.raises(ValueError, match="inconsistent horizon"):
        harness.rank_models(results[:5])
    with pytest.raises(ValueError, match="no successful"):
        harness.rank_models(
            [harness.ExperimentResult(results[0].config, None, (), {}, "boom")]
        )


def test_results_json_round_trip(tmp_path):
    bundle = harness.synthetic_bundle(2, days=60, n_coins=1)
    configs = harness.enumerate_grid(["alphacoin"], [], [1], [1], subsets=[()])
    results = harness.run_grid(configs, bundle, small_options())
    path = tmp_path / "results.json"
    harness.save_results(str(path), results)
    loaded = harness.load_results(str(path))
    assert len(loaded) == len(results)
    for a, b in zip(results, loaded):
        assert a.config == b.config
        assert a.predictions == b.predictions
        assert a.error == b.error
        assert a.metrics.rmspe == b.metrics.rmspe
        assert a.train_summary == b.train_summary


def test_emit_report_writes_deterministic_files(tmp_path):
    bundle = harness.synthetic_bundle(2, days=60, n_coins=1)
    configs = harness.enumerate_grid(
        ["alphacoin"], ["gh_pop"], [1], [1], subsets=[(), ("gh_pop",)],
    )
    results = harness.run_grid(configs, bundle, small_options())
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    paths = harness.emit_report(results, str(out_a))
    harness.emit_report(results, str(out_b))
    names = sorted(p.split("/")[-1] for p in paths)
    assert "ranking.csv" in names and "metrics.csv" in names and "report.txt" in names
    assert any(n.startswith("predictions_") for n in names)
    assert any(n.startswith("plot_") and n.endswith(".svg") for n in names)
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    ranking = (out_a / "ranking.csv").read_text().splitlines()
    assert ranking[0] == "model,signals,rmspe_j1,mean"
    assert len(ranking) == 4  # header + arima + two lstm variants
    metrics_lines = (out_a / "metrics.csv").read_text().splitlines()
    assert len(metrics_lines) == 4
    svg = next(n for n in names if n.endswith(".svg"))
    text = (out_a / svg).read_text()
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")

    with pytest.raises(ValueError, match="nothing to report"):
        harness.emit_report([], str(tmp_path / "c"))


def test_failed_result_row_in_metrics_csv(tmp_path):
    good = fake_result("a", "arima", (), 1, 4.0)
    bad = harness.ExperimentResult(
        harness.ExperimentConfig("a", "lstm", (), 3, 1), None, (), {}, "exploded"
    )
    harness.save_results(str(tmp_path / "r.json"), [good, bad])
    loaded = harness.load_results(str(tmp_path / "r.json"))
    assert loaded[1].error == "exploded"
    assert loaded[1].metrics is None
    from coinseer.harness.report import write_metrics_csv

    write_metrics_csv(str(tmp_path / "m.csv"), loaded)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[2].endswith("exploded")
