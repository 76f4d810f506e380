"""Command line interface.

Subcommands: ingest, signals, correlate, train, forecast, ablate,
report, synth. Exit codes: 0 success, 1 partial experiment failures,
2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

from . import __version__, ingest, lstm, signals, stats
from .dataset import apply_minmax
from .harness import grid as harness_grid
from .harness import report as harness_report
from .harness import synthetic as harness_synth

log = logging.getLogger(__name__)

_COIN_NAME_RE = re.compile(r"^[a-z0-9_]+$")


@dataclass(frozen=True)
class CoinSpec:
    name: str
    price_csv: str
    reddit_ndjson: str
    subreddit: str
    github_ndjson: str
    repo: str


@dataclass(frozen=True)
class Config:
    coins: tuple[CoinSpec, ...]
    start: date | None
    end: date | None
    vocab_size: int
    lexicon: str | None
    path: str


def load_config(path: str) -> Config:
    """Read the JSON run configuration; relative paths resolve against
    the config file's directory."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    coins = []
    seen = set()
    for i, obj in enumerate(raw.get("coins", [])):
        try:
            spec = CoinSpec(
                name=obj["name"],
                price_csv=resolve(obj["price_csv"]),
                reddit_ndjson=resolve(obj["reddit_ndjson"]),
                subreddit=obj["subreddit"],
                github_ndjson=resolve(obj["github_ndjson"]),
                repo=obj["repo"],
            )
        except KeyError as exc:
            raise ValueError(f"{path}: coin {i} missing field {exc}") from None
        if not _COIN_NAME_RE.match(spec.name):
            raise ValueError(
                f"{path}: coin name {spec.name!r} must match [a-z0-9_]+"
            )
        if spec.name in seen:
            raise ValueError(f"{path}: duplicate coin name {spec.name!r}")
        seen.add(spec.name)
        coins.append(spec)
    if not coins:
        raise ValueError(f"{path}: no coins configured")
    start = raw.get("start")
    end = raw.get("end")
    lexicon = raw.get("lexicon")
    return Config(
        coins=tuple(coins),
        start=None if start is None else date.fromisoformat(start),
        end=None if end is None else date.fromisoformat(end),
        vocab_size=int(raw.get("vocab_size", signals.DEFAULT_VOCAB_SIZE)),
        lexicon=None if lexicon is None else resolve(lexicon),
        path=path,
    )


def parse_range(text: str) -> list[int]:
    """Day ranges: '3', '1,2,5', or '1..14'."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if lo > hi:
            raise ValueError(f"empty range {text!r}")
        values = list(range(lo, hi + 1))
    else:
        values = [int(part) for part in text.split(",") if part.strip()]
    if not values or any(v < 1 for v in values):
        raise ValueError(f"range {text!r} must contain positive days")
    return values


def _range_arg(text: str) -> list[int]:
    try:
        return parse_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sizes_arg(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer sizes {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("layer sizes must be positive")
    return sizes


def _load_lexicon(path: str | None) -> signals.SentimentLexicon:
    return signals.bundled_lexicon() if path is None else signals.load_lexicon(path)


def _common_range(series: list[ingest.PriceSeries], cfg: Config) -> tuple[date, date]:
    start = cfg.start or max(s.dates[0] for s in series)
    end = cfg.end or min(s.dates[-1] for s in series)
    if start > end:
        raise ValueError("coins share no common date range")
    return start, end


def build_bundle(cfg: Config) -> tuple[harness_grid.DataBundle, list[str]]:
    """Load, align, and extract signals for every configured coin."""
    lexicon = _load_lexicon(cfg.lexicon)
    raw = []
    for spec in cfg.coins:
        price = ingest.load_price_series(spec.price_csv, spec.name)
        comments = ingest.load_reddit_comments(spec.reddit_ndjson, spec.subreddit)
        events = ingest.load_github_events(spec.github_ndjson, spec.repo)
        raw.append((spec, price, comments, events))
    start, end = _common_range([p for _, p, _, _ in raw], cfg)
    coins: dict[str, harness_grid.CoinData] = {}
    lines = []
    for spec, price, comments, events in raw:
        aligned, fills = ingest.align_calendar(price, start, end)
        coins[spec.name] = harness_grid.assemble_coin(
            aligned, comments, events, lexicon, cfg.vocab_size
        )
        lines.append(
            f"{spec.name}: {len(aligned)} days {start}..{end} "
            f"({fills} forward-filled), {len(comments)} comments, "
            f"{len(events)} events"
        )
    return harness_grid.DataBundle(coins=coins), lines


def write_manifest(out_dir: str, command: str, seed: int, args: dict) -> str:
    """Record what produced this directory; deterministic bytes."""
    payload = {
        "tool": "coinseer",
        "version": __version__,
        "command": command,
        "seed": seed,
        "args": args,
    }
    path = os.path.join(out_dir, "run_manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def _env_seed() -> int:
    raw = os.environ.get("COINSEER_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"COINSEER_SEED must be an integer, got {raw!r}") from None


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="master seed (default: COINSEER_SEED env var, else 0)",
    )


def _resolve_seed(args: argparse.Namespace) -> int:
    return _env_seed() if args.seed is None else args.seed


def _signal_subsets(
    keyword: str, available: tuple[str, ...]
) -> list[tuple[str, ...]]:
    """--signals value to LSTM subset list.

    'benchmark' is the fixed headline comparison, 'all' the powerset of
    the available families, 'none' price-only, and a comma list of
    families the powerset of those.
    """
    if keyword == "benchmark":
        needed = {f for subset in harness_grid.BENCHMARK_SUBSETS for f in subset}
        missing = sorted(needed - set(available))
        if missing:
            raise ValueError(
                f"signal families unavailable for this data: {', '.join(missing)}"
            )
        return list(harness_grid.BENCHMARK_SUBSETS)
    if keyword == "none":
        return [()]
    if keyword == "all":
        families = available
    else:
        families = tuple(part.strip() for part in keyword.split(",") if part.strip())
        unknown = [f for f in families if f not in harness_grid.FAMILIES]
        if unknown:
            raise ValueError(f"unknown signal families: {', '.join(unknown)}")
        missing = [f for f in families if f not in available]
        if missing:
            raise ValueError(
                f"signal families unavailable for this data: {', '.join(missing)}"
            )
    ordered = tuple(f for f in harness_grid.FAMILIES if f in families)
    return [
        tuple(f for i, f in enumerate(ordered) if mask >> i & 1)
        for mask in range(1 << len(ordered))
    ]


def _available_families(bundle: harness_grid.DataBundle) -> tuple[str, ...]:
    present = None
    for cd in bundle.coins.values():
        keys = set(cd.signals)
        present = keys if present is None else present & keys
    return tuple(f for f in harness_grid.FAMILIES if f in (present or set()))


def _bundle_for(args: argparse.Namespace, seed: int) -> harness_grid.DataBundle:
    if getattr(args, "synthetic", False):
        return harness_synth.synthetic_bundle(seed, args.days, args.coins)
    if not args.config:
        raise ValueError("either --config or --synthetic is required")
    bundle, lines = build_bundle(load_config(args.config))
    for line in lines:
        print(line, file=sys.stderr)
    return bundle


def cmd_synth(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    os.makedirs(args.out, exist_ok=True)
    names = harness_synth.SYNTH_COIN_NAMES[: args.coins]
    config_coins = []
    for name in names:
        price, comments, events = harness_synth.generate_synthetic_coin(
            name, harness_grid.derive_seed(seed, "synth", name), args.days
        )
        price_path = os.path.join(args.out, f"price_{name}.csv")
        ingest.save_price_series(price_path, price)
        reddit_path = os.path.join(args.out, f"reddit_{name}.ndjson")
        ingest.write_ndjson(
            reddit_path,
            (
                {
                    "created_utc": c.created_utc,
                    "subreddit": c.subreddit,
                    "body": c.body,
                    "score": c.score,
                }
                for c in comments
            ),
        )
        github_path = os.path.join(args.out, f"github_{name}.ndjson")
        ingest.write_ndjson(
            github_path,
            (
                {
                    "type": f"{e.event_type}Event",
                    "created_at": datetime.fromtimestamp(e.created_utc, timezone.utc)
                    .strftime("%Y-%m-%dT%H:%M:%SZ"),
                    "repo": {"name": e.repo},
                }
                for e in events
            ),
        )
        config_coins.append(
            {
                "name": name,
                "price_csv": f"price_{name}.csv",
                "reddit_ndjson": f"reddit_{name}.ndjson",
                "subreddit": name,
                "github_ndjson": f"github_{name}.ndjson",
                "repo": f"{name}/{name}",
            }
        )
        print(f"{name}: {args.days} days, {len(comments)} comments, {len(events)} events")
    config_path = os.path.join(args.out, "config.json")
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump({"coins": config_coins}, fh, sort_keys=True, indent=1)
        fh.write("\n")
    write_manifest(args.out, "synth", seed, {"days": args.days, "coins": args.coins})
    print(f"wrote {args.out}/config.json")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    _, lines = build_bundle(load_config(args.config))
    for line in lines:
        print(line)
    return 0


def cmd_signals(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    bundle, _ = build_bundle(cfg)
    os.makedirs(args.out, exist_ok=True)
    for name, cd in bundle.coins.items():
        for family, matrix in cd.signals.items():
            path = os.path.join(args.out, f"signals_{name}_{family}.csv")
            signals.write_signal_csv(path, matrix)
            print(f"wrote {path} ({len(matrix.columns)} columns)")
    write_manifest(args.out, "signals", 0, {"config": os.path.basename(cfg.path)})
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    bundle, _ = build_bundle(cfg)
    os.makedirs(args.out, exist_ok=True)
    for name, cd in bundle.coins.items():
        matrix = signals.concat_signals(list(cd.signals.values()))
        table = stats.correlation_table(matrix, cd.price.high)
        path = os.path.join(args.out, f"correlation_{name}.csv")
        stats.write_correlation_csv(path, table)
        print(f"wrote {path} ({len(table)} signals)")
    write_manifest(args.out, "correlate", 0, {"config": os.path.basename(cfg.path)})
    return 0


def _parse_subset(text: str) -> tuple[str, ...]:
    if text in ("", "price", "none"):
        return ()
    families = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [f for f in families if f not in harness_grid.FAMILIES]
    if unknown:
        raise ValueError(f"unknown signal families: {', '.join(unknown)}")
    return tuple(f for f in harness_grid.FAMILIES if f in families)


def _run_options(args: argparse.Namespace, seed: int, k_max: int, j_max: int) -> harness_grid.RunOptions:
    return harness_grid.RunOptions(
        master_seed=seed,
        k_max=k_max,
        j_max=j_max,
        train_frac=args.train_frac,
        sizes=args.sizes,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        max_epochs=args.epochs,
        patience=None if args.patience == 0 else args.patience,
        max_lag=args.max_lag,
        whole_series_norm=not args.train_only_norm,
    )


def cmd_train(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    bundle = _bundle_for(args, seed)
    coin = args.coin or next(iter(bundle.coins))
    if coin not in bundle.coins:
        raise ValueError(f"unknown coin {coin!r}")
    subset = _parse_subset(args.signal_set)
    cfg = harness_grid.ExperimentConfig(coin, "lstm", subset, args.k, args.j)
    options = _run_options(args, seed, k_max=args.k, j_max=args.j)
    result, model = harness_grid.train_lstm_experiment(cfg, bundle, options)
    os.makedirs(args.out, exist_ok=True)
    cid = harness_grid.config_id(cfg)
    model_path = os.path.join(args.out, f"model_{cid}.bin")
    lstm.save_model(model_path, model)
    harness_report.save_results(os.path.join(args.out, "results.json"), [result])
    write_manifest(
        args.out,
        "train",
        seed,
        {
            "coin": coin,
            "signal_set": list(subset),
            "k": args.k,
            "j": args.j,
            "sizes": list(args.sizes),
        },
    )
    m = result.metrics
    assert m is not None
    print(
        f"{cid}: {len(model.history)} epochs (best {model.best_epoch}), "
        f"test MAPE {m.mape:.2f}% RMSPE {m.rmspe:.2f}% over {m.n} anchors"
    )
    print(f"wrote {model_path}")
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    model = lstm.load_model(args.model)
    if model.k < 1 or model.j < 1:
        raise ValueError(f"{args.model}: model lacks window metadata")
    cfg = load_config(args.config)
    lexicon = _load_lexicon(cfg.lexicon)
    spec = None
    for candidate in cfg.coins:
        if args.coin is None or candidate.name == args.coin:
            spec = candidate
            break
    if spec is None:
        raise ValueError(f"coin {args.coin!r} not in {cfg.path}")
    price = ingest.load_price_series(spec.price_csv, spec.name)
    start = cfg.start or price.dates[0]
    end = cfg.end or price.dates[-1]
    aligned, _ = ingest.align_calendar(price, start, end)
    comments = ingest.load_reddit_comments(spec.reddit_ndjson, spec.subreddit)
    events = ingest.load_github_events(spec.github_ndjson, spec.repo)
    matrix = _matrix_for_columns(
        model.norm.columns, aligned, comments, events, lexicon
    )
    if len(matrix.dates) < model.k:
        raise ValueError(
            f"need at least {model.k} aligned days, have {len(matrix.dates)}"
        )
    normed, out_of_range = apply_minmax(matrix, model.norm)
    if out_of_range:
        print(
            f"warning: {out_of_range} signal values outside the training range",
            file=sys.stderr,
        )
    anchor = matrix.dates[-1]
    if model.train_end is not None and anchor <= model.train_end:
        print(
            f"warning: data ends {anchor}, not newer than the model's "
            f"training period (through {model.train_end})",
            file=sys.stderr,
        )
    window = normed.values[-model.k :][None]
    pred = float(lstm.predict(model, window)[0])
    payload = {
        "coin": spec.name,
        "anchor_date": anchor.isoformat(),
        "target_date": (anchor + timedelta(days=model.j)).isoformat(),
        "horizon_days": model.j,
        "prediction_usd": pred,
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _matrix_for_columns(
    columns: tuple[str, ...],
    price: ingest.PriceSeries,
    comments: list[ingest.CommentRecord],
    events: list[ingest.EventRecord],
    lexicon: signals.SentimentLexicon,
) -> signals.SignalMatrix:
    """Rebuild the exact feature matrix a stored model was trained on,
    deriving the signal families (and language vocabulary) from the
    stored column names."""
    calendar = price.dates
    parts = [signals.price_high_signal(price)]
    lang_tokens = [c[len("r_lang_") :] for c in columns if c.startswith("r_lang_")]
    seen: set[str] = {signals.PRICE_COLUMN}
    for column in columns:
        if column == signals.PRICE_COLUMN or column in seen:
            continue
        if column == "gh_watch":
            part = signals.github_popularity_signal(events, calendar)
        elif column.startswith("gh_all_"):
            part = signals.github_all_signal(events, calendar)
        elif column == "r_vol":
            part = signals.reddit_volume_signal(comments, calendar)
        elif column.startswith("r_lang_"):
            vocab = signals.Vocabulary(tokens=tuple(lang_tokens))
            part = signals.reddit_language_signal(comments, vocab, calendar)
        elif column.startswith("r_score_"):
            part = signals.reddit_score_signal(comments, calendar)
        elif column.startswith(("r_pol_", "r_subj_")):
            part = signals.reddit_sentiment_signal(comments, lexicon, calendar)
        elif column == "gh_fork":
            continue
        else:
            raise ValueError(f"cannot rebuild signal column {column!r}")
        parts.append(part)
        seen.update(part.columns)
    matrix = signals.concat_signals(parts)
    if matrix.columns != columns:
        raise ValueError(
            "rebuilt signal columns do not match the model's training columns"
        )
    return matrix


def cmd_ablate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    bundle = _bundle_for(args, seed)
    available = _available_families(bundle)
    subsets = _signal_subsets(args.signals, available)
    configs = harness_grid.enumerate_grid(
        list(bundle.coins), available, args.k, args.j, subsets
    )
    options = _run_options(args, seed, k_max=max(args.k), j_max=max(args.j))
    total = len(configs)

    def progress(result: harness_grid.ExperimentResult) -> None:
        cid = harness_grid.config_id(result.config)
        if result.error is not None:
            print(f"[{cid}] failed: {result.error}", file=sys.stderr)
        else:
            assert result.metrics is not None
            print(f"[{cid}] rmspe {result.metrics.rmspe:.3f}%", file=sys.stderr)

    print(f"running {total} experiments", file=sys.stderr)
    results = harness_grid.run_grid(configs, bundle, options, args.jobs, progress)
    os.makedirs(args.out, exist_ok=True)
    harness_report.save_results(os.path.join(args.out, "results.json"), results)
    failed = sum(1 for r in results if r.metrics is None)
    manifest_args = {
        "source": "synthetic" if args.synthetic else os.path.basename(args.config),
        "days": args.days if args.synthetic else None,
        "coins": args.coins if args.synthetic else None,
        "k": args.k,
        "j": args.j,
        "signals": args.signals,
        "sizes": list(args.sizes),
        "train_only_norm": args.train_only_norm,
    }
    try:
        written = harness_report.emit_report(results, args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_manifest(args.out, "ablate", seed, manifest_args)
        return 1
    write_manifest(args.out, "ablate", seed, manifest_args)
    print(f"wrote {len(written) + 2} files to {args.out}")
    if failed:
        print(f"{failed} of {total} experiments failed", file=sys.stderr)
        return 1
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    results = harness_report.load_results(args.results)
    written = harness_report.emit_report(results, args.out)
    write_manifest(args.out, "report", 0, {"results": os.path.basename(args.results)})
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def _add_train_knobs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sizes", type=_sizes_arg, default=(400, 800),
                        help="LSTM layer sizes, comma separated (default 400,800)")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--learning-rate", type=float, default=0.001)
    parser.add_argument("--epochs", type=int, default=20, help="max epochs (default 20)")
    parser.add_argument("--patience", type=int, default=2,
                        help="early-stopping patience, 0 disables (default 2)")
    parser.add_argument("--max-lag", type=int, default=5,
                        help="largest AR lag order considered (default 5)")
    parser.add_argument("--train-frac", type=float, default=0.8)
    parser.add_argument("--train-only-norm", action="store_true",
                        help="fit normalization on the training period only")


def _add_synth_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration JSON")
    parser.add_argument("--synthetic", action="store_true",
                        help="generate data instead of reading archives")
    parser.add_argument("--days", type=int, default=600,
                        help="synthetic series length (default 600)")
    parser.add_argument("--coins", type=int, default=2,
                        help="synthetic coin count (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coinseer",
        description="Cryptocurrency price-high forecasting from social signals",
    )
    parser.add_argument("--version", action="version", version=f"coinseer {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic archives")
    p.add_argument("--days", type=int, default=600)
    p.add_argument("--coins", type=int, default=2)
    p.add_argument("--out", default="out")
    _add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="load and validate configured archives")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("signals", help="extract daily signal matrices to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_signals)

    p = sub.add_parser("correlate", help="signal/price correlation tables")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("train", help="train one LSTM configuration")
    _add_synth_source(p)
    p.add_argument("--coin", help="coin name (default: first configured)")
    p.add_argument("--signal-set", default="price",
                   help="comma-separated families, or 'price' (default)")
    p.add_argument("--k", type=int, default=1, help="input window days (default 1)")
    p.add_argument("--j", type=int, default=1, help="forecast horizon days (default 1)")
    p.add_argument("--out", default="out")
    _add_seed(p)
    _add_train_knobs(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="forecast from a saved model")
    p.add_argument("--model", required=True, help="saved model file")
    p.add_argument("--config", required=True)
    p.add_argument("--coin", help="coin name (default: first configured)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("ablate", help="run the model/signal ablation grid")
    _add_synth_source(p)
    p.add_argument("--k", type=_range_arg, default=[1],
                   help="input window days: N, A,B,C, or LO..HI (default 1)")
    p.add_argument("--j", type=_range_arg, default=[1, 2, 3],
                   help="forecast horizons (default 1..3)")
    p.add_argument("--signals", default="benchmark",
                   help="'benchmark', 'all', 'none', or comma-separated families")
    p.add_argument("--jobs", type=int, default=1, help="parallel experiments")
    p.add_argument("--out", default="out")
    _add_seed(p)
    _add_train_knobs(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="re-emit reports from saved results")
    p.add_argument("--results", required=True, help="results.json path")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
