"""Experiment grid enumeration and execution over a shared data bundle."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Callable, Iterable, Sequence

import numpy as np

from .. import arima, dataset, lstm, metrics, signals
from ..ingest import CommentRecord, EventRecord, PriceSeries
from ..signals import PRICE_COLUMN, SentimentLexicon, SignalMatrix

log = logging.getLogger(__name__)

#: Signal family identifiers in canonical order.
FAMILIES = ("gh_pop", "gh_all", "r_vol", "r_lang", "r_score", "r_sent")

FAMILY_LABELS = {
    "gh_pop": "GH_Pop",
    "gh_all": "GH_All",
    "r_vol": "R_Vol",
    "r_lang": "R_Lang",
    "r_score": "R_Score",
    "r_sent": "R_Sent",
}

#: The LSTM signal subsets compared in the headline ranking.
BENCHMARK_SUBSETS: tuple[tuple[str, ...], ...] = (
    (),
    ("r_lang",),
    ("gh_pop", "r_lang"),
    ("r_vol",),
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the ablation grid.

    Price history is always an input; signal_set names the extra signal
    families, empty for price-only. ARIMA configs carry no signal set
    and no input window (k is 0 there, ignored).
    """

    coin: str
    model_kind: str
    signal_set: tuple[str, ...]
    k: int
    j: int

    def __post_init__(self) -> None:
        if self.model_kind not in ("arima", "lstm"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        for family in self.signal_set:
            if family not in FAMILIES:
                raise ValueError(f"unknown signal family {family!r}")
        ordered = tuple(f for f in FAMILIES if f in self.signal_set)
        if ordered != self.signal_set or len(set(self.signal_set)) != len(self.signal_set):
            raise ValueError("signal_set must be unique and in canonical order")
        if self.j < 1:
            raise ValueError("j must be positive")
        if self.model_kind == "arima":
            if self.signal_set:
                raise ValueError("the ARIMA baseline uses price only")
            if self.k != 0:
                raise ValueError("the ARIMA baseline has no input window")
        elif self.k < 1:
            raise ValueError("k must be positive")


def signal_set_label(signal_set: Sequence[str]) -> str:
    """Display label: $ for price-only, $+<family>... otherwise."""
    parts = ["$"] + [FAMILY_LABELS[f] for f in signal_set]
    return "+".join(parts)


def config_id(cfg: ExperimentConfig) -> str:
    """Filesystem-safe unique identifier of a config."""
    sig = "-".join(cfg.signal_set) if cfg.signal_set else "price"
    if cfg.model_kind == "arima":
        return f"{cfg.coin}_arima_{sig}_j{cfg.j}"
    return f"{cfg.coin}_lstm_{sig}_k{cfg.k}_j{cfg.j}"


def derive_seed(master_seed: int, *labels: str) -> int:
    """Stable per-purpose seed from the master seed and string labels."""
    digest = hashlib.sha256(
        ":".join([str(master_seed), *labels]).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "little")


def enumerate_grid(
    coins: Sequence[str],
    available: Sequence[str],
    k_range: Sequence[int],
    j_range: Sequence[int],
    subsets: Sequence[Sequence[str]] | None = None,
) -> list[ExperimentConfig]:
    """Every experiment of one run, in deterministic order.

    Per coin: the ARIMA baseline per j, then each LSTM signal subset
    crossed with k_range and j_range. Subsets default to the full
    powerset of ``available``, enumerated in bitmask order.
    """
    for family in available:
        if family not in FAMILIES:
            raise ValueError(f"unknown signal family {family!r}")
    if not coins:
        raise ValueError("no coins")
    if not k_range or any(k < 1 for k in k_range):
        raise ValueError("k_range must be nonempty positive")
    if not j_range or any(j < 1 for j in j_range):
        raise ValueError("j_range must be nonempty positive")
    if subsets is None:
        chosen = [
            tuple(f for i, f in enumerate(available) if mask >> i & 1)
            for mask in range(1 << len(available))
        ]
    else:
        chosen = [tuple(s) for s in subsets]
    canonical = []
    for subset in chosen:
        ordered = tuple(f for f in FAMILIES if f in subset)
        if len(ordered) != len(subset):
            raise ValueError(f"bad signal subset {subset!r}")
        canonical.append(ordered)
    configs: list[ExperimentConfig] = []
    for coin in coins:
        for j in j_range:
            configs.append(ExperimentConfig(coin, "arima", (), 0, j))
        for subset in canonical:
            for k in k_range:
                for j in j_range:
                    configs.append(ExperimentConfig(coin, "lstm", subset, k, j))
    return configs


@dataclass
class CoinData:
    """Aligned price series and extracted signal families for one coin."""

    price: PriceSeries
    signals: dict[str, SignalMatrix]


@dataclass
class DataBundle:
    """Everything a grid run reads: per-coin data on one shared calendar."""

    coins: dict[str, CoinData]

    def __post_init__(self) -> None:
        if not self.coins:
            raise ValueError("empty bundle")
        calendars = {cd.price.dates for cd in self.coins.values()}
        if len(calendars) != 1:
            raise ValueError("coins must share one calendar")

    @property
    def dates(self) -> tuple[date, ...]:
        return next(iter(self.coins.values())).price.dates


def assemble_coin(
    price: PriceSeries,
    comments: Sequence[CommentRecord],
    events: Sequence[EventRecord],
    lexicon: SentimentLexicon,
    vocab_size: int = signals.DEFAULT_VOCAB_SIZE,
) -> CoinData:
    """Extract every signal family on the price calendar.

    The language family is skipped (with a log line) when the comment
    corpus is empty, since no vocabulary can be built.
    """
    calendar = price.dates
    extracted: dict[str, SignalMatrix] = {
        "gh_pop": signals.github_popularity_signal(events, calendar),
        "gh_all": signals.github_all_signal(events, calendar),
        "r_vol": signals.reddit_volume_signal(comments, calendar),
        "r_score": signals.reddit_score_signal(comments, calendar),
        "r_sent": signals.reddit_sentiment_signal(comments, lexicon, calendar),
    }
    try:
        vocab = signals.build_vocabulary(comments, vocab_size)
    except ValueError:
        log.warning("%s: empty comment corpus, language signal unavailable", price.coin)
    else:
        extracted["r_lang"] = signals.reddit_language_signal(comments, vocab, calendar)
    ordered = {f: extracted[f] for f in FAMILIES if f in extracted}
    return CoinData(price=price, signals=ordered)


@dataclass(frozen=True)
class RunOptions:
    """Knobs shared by every experiment of one run."""

    master_seed: int = 0
    k_max: int = 14
    j_max: int = 3
    train_frac: float = 0.8
    sizes: tuple[int, ...] = (400, 800)
    batch_size: int = 16
    learning_rate: float = 0.001
    max_epochs: int = 20
    patience: int | None = 2
    max_lag: int = 5
    whole_series_norm: bool = True


@dataclass
class ExperimentResult:
    """Outcome of one experiment: metrics on the shared test anchors,
    the per-date predictions, and a small training summary; failed
    experiments carry an error string instead."""

    config: ExperimentConfig
    metrics: metrics.MetricsReport | None
    predictions: tuple[tuple[date, float, float], ...] = ()
    train_summary: dict = field(default_factory=dict)
    error: str | None = None


def _feature_matrix(cd: CoinData, signal_set: Sequence[str]) -> SignalMatrix:
    parts = [signals.price_high_signal(cd.price)]
    for family in signal_set:
        matrix = cd.signals.get(family)
        if matrix is None:
            raise ValueError(f"signal family {family!r} unavailable for {cd.price.coin}")
        parts.append(matrix)
    return signals.concat_signals(parts)


def _slice_rows(matrix: SignalMatrix, end: date) -> SignalMatrix:
    keep = [i for i, d in enumerate(matrix.dates) if d <= end]
    return SignalMatrix(matrix.dates[: len(keep)], matrix.columns, matrix.values[: len(keep)].copy())


def train_lstm_experiment(
    cfg: ExperimentConfig, bundle: DataBundle, options: RunOptions
) -> tuple[ExperimentResult, lstm.TrainedModel]:
    """Train one LSTM config and score it on the shared test anchors."""
    if cfg.model_kind != "lstm":
        raise ValueError("not an LSTM config")
    cd = bundle.coins[cfg.coin]
    matrix = _feature_matrix(cd, cfg.signal_set)
    train_range, test_range = dataset.split_protocol(
        matrix.dates, options.k_max, options.j_max, options.train_frac
    )
    if options.whole_series_norm:
        norm = dataset.fit_minmax(matrix)
    else:
        seen_until = train_range[1] + timedelta(days=cfg.j)
        norm = dataset.fit_minmax(_slice_rows(matrix, seen_until))
    normed, out_of_range = dataset.apply_minmax(matrix, norm)
    targets = normed.column(PRICE_COLUMN)
    windows = dataset.make_windows(normed, targets, cfg.k, cfg.j)
    train_ds = dataset.subset_by_anchor(windows, *train_range)
    test_ds = dataset.subset_by_anchor(windows, *test_range)
    fit_ds, val_ds = dataset.validation_tail(train_ds)
    cid = config_id(cfg)
    net = lstm.init_network(
        input_dim=len(matrix.columns),
        sizes=options.sizes,
        seed=derive_seed(options.master_seed, "init", cid),
    )
    config = lstm.TrainConfig(
        seed=derive_seed(options.master_seed, "train", cid),
        batch_size=options.batch_size,
        learning_rate=options.learning_rate,
        max_epochs=options.max_epochs,
        patience=options.patience,
    )
    model = lstm.train(net, fit_ds, val_ds, config, norm=norm)
    preds_usd = lstm.predict(model, test_ds.inputs)
    price_index = {d: i for i, d in enumerate(cd.price.dates)}
    target_dates = tuple(d + timedelta(days=cfg.j) for d in test_ds.anchor_dates)
    truth_usd = np.array([cd.price.high[price_index[d]] for d in target_dates])
    report = metrics.evaluate(preds_usd, truth_usd)
    rows = tuple(
        (d, float(t), float(p)) for d, t, p in zip(target_dates, truth_usd, preds_usd)
    )
    summary = {
        "epochs": len(model.history),
        "best_epoch": model.best_epoch,
        "best_val_mse": min(s.val_mse for s in model.history),
        "out_of_range": out_of_range,
    }
    return ExperimentResult(cfg, report, rows, summary), model


def _run_arima(
    cfg: ExperimentConfig, bundle: DataBundle, options: RunOptions
) -> ExperimentResult:
    cd = bundle.coins[cfg.coin]
    dates = cd.price.dates
    train_range, test_range = dataset.split_protocol(
        dates, options.k_max, options.j_max, options.train_frac
    )
    index = {d: i for i, d in enumerate(dates)}
    high = cd.price.high
    # Fit on everything a training-period forecaster could have seen:
    # through the last training target, j days past the last train anchor.
    fit_end = index[train_range[1]] + cfg.j
    y_train = high[: fit_end + 1]
    p = arima.select_lag(y_train, options.max_lag)
    try:
        model = arima.fit(y_train, p)
    except ArithmeticError:
        log.warning("%s: singular fit at lag %d, falling back to lag 0", cfg.coin, p)
        p = 0
        model = arima.fit(y_train, 0)
    first = index[test_range[0]]
    last = index[test_range[1]]
    anchors = range(first, last + 1)
    preds = np.array(
        [arima.forecast(model, high[: a + 1], cfg.j) for a in anchors]
    )
    target_dates = tuple(dates[a + cfg.j] for a in anchors)
    truth = np.array([high[a + cfg.j] for a in anchors])
    report = metrics.evaluate(preds, truth)
    rows = tuple(
        (d, float(t), float(pv)) for d, t, pv in zip(target_dates, truth, preds)
    )
    summary = {
        "lag": model.p,
        "intercept": model.intercept,
        "ar_coeffs": [float(c) for c in model.ar_coeffs],
    }
    return ExperimentResult(cfg, report, rows, summary)


def run_experiment(
    cfg: ExperimentConfig, bundle: DataBundle, options: RunOptions
) -> ExperimentResult:
    """Run one grid cell end to end; failures become error results."""
    if cfg.coin not in bundle.coins:
        return ExperimentResult(cfg, None, error=f"unknown coin {cfg.coin!r}")
    try:
        if cfg.model_kind == "arima":
            return _run_arima(cfg, bundle, options)
        return train_lstm_experiment(cfg, bundle, options)[0]
    except (ValueError, ArithmeticError) as exc:
        log.warning("%s failed: %s", config_id(cfg), exc)
        return ExperimentResult(cfg, None, error=str(exc))


def run_grid(
    configs: Sequence[ExperimentConfig],
    bundle: DataBundle,
    options: RunOptions,
    jobs: int = 1,
    progress: Callable[[ExperimentResult], None] | None = None,
) -> list[ExperimentResult]:
    """Run every config, preserving input order in the results.

    Experiments are independent (seeds derive from the master seed and
    the config identity), so results do not depend on ``jobs``.
    """
    if jobs < 1:
        raise ValueError("jobs must be positive")
    if jobs == 1:
        results = []
        for cfg in configs:
            result = run_experiment(cfg, bundle, options)
            if progress is not None:
                progress(result)
            results.append(result)
        return results
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_experiment, cfg, bundle, options) for cfg in configs]
        results = []
        for future in futures:
            result = future.result()
            if progress is not None:
                progress(result)
            results.append(result)
    return results


@dataclass(frozen=True)
class RankRow:
    """Cross-coin mean RMSPE per horizon for one model variant."""

    model_kind: str
    signal_set: tuple[str, ...]
    label: str
    rmspe_by_j: tuple[tuple[int, float], ...]
    mean: float


def rank_models(results: Iterable[ExperimentResult]) -> list[RankRow]:
    """Rank model variants by the mean of per-horizon mean RMSPE.

    Groups results by (model_kind, signal_set), averages RMSPE across
    coins (and window sizes, when several were run) per horizon, then
    orders ascending by the mean across horizons. Every variant must
    cover the same horizons.
    """
    cells: dict[tuple[str, tuple[str, ...]], dict[int, list[float]]] = {}
    for result in results:
        if result.metrics is None:
            continue
        key = (result.config.model_kind, result.config.signal_set)
        cells.setdefault(key, {}).setdefault(result.config.j, []).append(
            result.metrics.rmspe
        )
    if not cells:
        raise ValueError("no successful results to rank")
    horizon_sets = {tuple(sorted(by_j)) for by_j in cells.values()}
    if len(horizon_sets) != 1:
        raise ValueError("inconsistent horizon coverage across model variants")
    rows = []
    for (kind, subset), by_j in cells.items():
        means = tuple((j, float(np.mean(by_j[j]))) for j in sorted(by_j))
        label = ("LSTM " if kind == "lstm" else "ARIMA ") + signal_set_label(subset)
        rows.append(
            RankRow(
                model_kind=kind,
                signal_set=subset,
                label=label,
                rmspe_by_j=means,
                mean=float(np.mean([v for _, v in means])),
            )
        )
    rows.sort(key=lambda r: (r.mean, r.label))
    return rows
