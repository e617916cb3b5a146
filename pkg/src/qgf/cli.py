"""Command-line entry point: reproducible pipelines over the library.

Every subcommand writes its outputs atomically plus a run manifest recording
the flags, seed, input digests, and wall-clock duration. Exit codes: 0 ok,
2 usage, 3 data problem, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import baselines, features, gan, gradcheck, indicators, market_data, metrics, plotting
from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .errors import (
    DataError,
    GradientCheckError,
    InvariantViolationError,
    MalformedHeaderError,
    NumericError,
    RowParseError,
)
from .ioutil import sha256_file, write_text_atomic

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


@dataclass
class RunManifest:
    """What ran, on what, with what seed; written next to every output."""

    subcommand: str
    args: dict[str, str]
    seed: int
    inputs: dict[str, str]
    outputs: list[str]
    tool_version: str = __version__
    duration_seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    def write(self, path: Path) -> Path:
        return write_text_atomic(path, json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _manifest_path(out: Path, is_dir: bool) -> Path:
    if is_dir:
        return out / "run_manifest.json"
    return out.with_suffix(".manifest.json")


def _start(args: argparse.Namespace, inputs: list[Path]) -> tuple[RunManifest, float]:
    flags = {k: str(v) for k, v in vars(args).items() if k != "func" and v is not None}
    manifest = RunManifest(subcommand=args.subcommand, args=flags,
                           seed=getattr(args, "seed", 42),
                           inputs={str(p): sha256_file(p) for p in inputs},
                           outputs=[])
    return manifest, time.monotonic()


def _finish(manifest: RunManifest, t0: float, out: Path, is_dir: bool = False,
            quiet: bool = False, **extras) -> None:
    manifest.duration_seconds = round(time.monotonic() - t0, 6)
    manifest.extras.update(extras)
    manifest.outputs.append(str(out))
    mpath = manifest.write(_manifest_path(out, is_dir))
    if not quiet:
        print(f"wrote {out} (manifest {mpath})")


def _load_series(args: argparse.Namespace) -> tuple[market_data.PriceSeries, list[Path]]:
    if getattr(args, "fetch_url", None):
        text = market_data.fetch_csv(args.fetch_url, args.symbol)
        return market_data.parse_csv(text, args.symbol), []
    path = Path(args.input)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    symbol = getattr(args, "symbol", None) or path.stem
    return market_data.parse_csv(text, symbol), [path]


def _load_sequences(path: Path) -> np.ndarray:
    """CSV of float rows, one sequence per row, no header."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise RowParseError(0, f"{path}: {exc}") from exc
    return data


def _write_sequences(path: Path, data: np.ndarray) -> None:
    rows = "\n".join(",".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(data))
    write_text_atomic(path, rows + "\n")


# --- subcommands ----------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    series, inputs = _load_series(args)
    manifest, t0 = _start(args, inputs)
    out = Path(args.out)
    write_text_atomic(out, market_data.serialize_csv(series))
    _finish(manifest, t0, out, quiet=args.quiet, bars=len(series),
            symbol=series.symbol, adj_close_imputed=series.adj_close_imputed)
    return 0


def cmd_indicators(args: argparse.Namespace) -> int:
    series, inputs = _load_series(args)
    manifest, t0 = _start(args, inputs)
    params = indicators.IndicatorParams(vr_convention=args.vr_convention)
    matrix = indicators.build_feature_matrix(series, params)
    dates = series.dates()

    out = Path(args.out)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["Date", *matrix.feature_names]
    last_row = matrix.values.shape[0]
    labels = None
    if args.label_horizon is not None:
        labels = market_data.label_trend(series, args.label_horizon)
        header.append(f"label_n{args.label_horizon}")
        last_row -= args.label_horizon
    writer.writerow(header)
    for i in range(matrix.valid_from, last_row):
        row = [dates[i].isoformat(), *(f"{v:.17g}" for v in matrix.values[i])]
        if labels is not None:
            row.append(labels.labels[i])
        writer.writerow(row)
    write_text_atomic(out, buf.getvalue())
    _finish(manifest, t0, out, quiet=args.quiet, valid_from=matrix.valid_from,
            cap_flags={k: list(v) for k, v in matrix.cap_flags.items()})
    return 0


def cmd_label(args: argparse.Namespace) -> int:
    series, inputs = _load_series(args)
    manifest, t0 = _start(args, inputs)
    labels = market_data.label_trend(series, args.horizon)
    dates = series.dates()
    # stamp each label with the bar whose features predict it, n bars earlier
    lines = ["Date,label"]
    lines += [f"{dates[i].isoformat()},{labels.labels[i]}" for i in range(len(labels))]
    out = Path(args.out)
    write_text_atomic(out, "\n".join(lines) + "\n")
    _finish(manifest, t0, out, quiet=args.quiet, horizon=args.horizon,
            positive=int(sum(labels.labels)), total=len(labels))
    return 0


def _read_table(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    """A Date-keyed CSV into (column names, dates, float matrix)."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedHeaderError(f"{path} is empty") from None
    if not header or header[0] != "Date":
        raise MalformedHeaderError(f"{path}: first column must be Date, got {header[:1]}")
    dates, rows = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RowParseError(line_no, f"{path} line {line_no}: {len(row)} fields, "
                                         f"expected {len(header)}")
        dates.append(row[0])
        try:
            rows.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise RowParseError(line_no, f"{path} line {line_no}: {exc}") from exc
    return header[1:], dates, np.array(rows, dtype=np.float64)


def cmd_select(args: argparse.Namespace) -> int:
    f_path, l_path = Path(args.features), Path(args.labels)
    names, f_dates, x_all = _read_table(f_path)
    l_names, l_dates, y_all = _read_table(l_path)
    if len(l_names) != 1:
        raise MalformedHeaderError(f"{l_path}: expected Date plus one label column")
    manifest, t0 = _start(args, [f_path, l_path])

    by_date = {d: y_all[i, 0] for i, d in enumerate(l_dates)}
    keep_rows = [i for i, d in enumerate(f_dates) if d in by_date]
    if not keep_rows:
        raise InvariantViolationError("no dates shared between features and labels")
    x = x_all[keep_rows]
    y = np.array([by_date[f_dates[i]] for i in keep_rows])

    report = features.rfe(x, y.astype(int), keep=args.keep, feature_names=tuple(names))
    out = Path(args.out)
    write_text_atomic(out, json.dumps({
        "eliminated": list(report.eliminated),
        "survivors": list(report.survivors),
        "accuracies": list(report.accuracies),
        "rows": len(keep_rows),
    }, indent=2) + "\n")
    _finish(manifest, t0, out, quiet=args.quiet, survivors=list(report.survivors))
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    f_path = Path(args.features)
    names, dates, x = _read_table(f_path)
    manifest, t0 = _start(args, [f_path])
    model = features.randomized_pca_fit(x, k=args.components,
                                        oversample=args.oversample, seed=args.seed)
    reduced = features.pca_transform(model, x)
    out = Path(args.out)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Date", *(f"pc{i + 1}" for i in range(args.components))])
    for date, row in zip(dates, reduced):
        writer.writerow([date, *(f"{v:.17g}" for v in row)])
    write_text_atomic(out, buf.getvalue())
    _finish(manifest, t0, out, quiet=args.quiet,
            explained=[float(v) for v in model.explained], columns=names)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    data_path = Path(args.data)
    data = _load_sequences(data_path)
    manifest, t0 = _start(args, [data_path])
    seq_len = args.seq_len or data.shape[1]
    train_config = gan.TrainConfig(epochs=args.epochs, batch_size=args.batch,
                                   lr=args.lr, seed=args.seed, d_steps=args.d_steps,
                                   g_loss_mode=args.g_loss)
    if args.model == "gan":
        if seq_len == 3120 and args.hidden is None:
            gen_config = gan.GeneratorConfig()
            disc_config = gan.DiscriminatorConfig()
        else:
            gen_config = gan.GeneratorConfig(
                noise_dim=args.noise_dim, seq_len=seq_len,
                hidden=args.hidden or gan.GeneratorConfig.desk().hidden,
                dropout_p=args.dropout)
            disc_config = gan.DiscriminatorConfig.desk(seq_len)
        ckpt, history = gan.train_gan(data, gen_config, disc_config, train_config)
        hist_cols = {"d_loss": history["d_loss"], "g_loss": history["g_loss"]}
    else:
        config = baselines.AeConfig(hidden=args.hidden or 64, latent=args.latent,
                                    seq_len=seq_len,
                                    cell="lstm" if args.model.startswith("lstm") else "rnn")
        ckpt, history = baselines.train_baseline(args.model, data, config, train_config)
        hist_cols = {"loss": history["loss"]}

    out = Path(args.out)
    save_checkpoint(ckpt, out, overwrite=True)
    names = list(hist_cols)
    lines = ["iteration," + ",".join(names)]
    length = len(next(iter(hist_cols.values())))
    for i in range(length):
        lines.append(f"{i}," + ",".join(f"{hist_cols[n][i]:.17g}" for n in names))
    write_text_atomic(out / "history.csv", "\n".join(lines) + "\n")
    plotting.plot_series(hist_cols, out / "history.svg", title=f"{args.model} training loss")
    _finish(manifest, t0, out, is_dir=True, quiet=args.quiet, model=args.model,
            final_losses={n: float(v[-1]) for n, v in hist_cols.items()})
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    ckpt_path = Path(args.ckpt)
    ckpt = load_checkpoint(ckpt_path)
    manifest, t0 = _start(args, [ckpt_path / "manifest.json"])
    if ckpt.model != "gan":
        raise InvariantViolationError(
            f"generate needs a gan checkpoint, found {ckpt.model!r}")
    generator = gan.generator_from_checkpoint(ckpt)
    seq_len = args.length or generator.config.seq_len
    sequences = gan.generate_sequences(generator, count=args.count,
                                       seq_len=seq_len, seed=args.seed)
    out = Path(args.out)
    _write_sequences(out, sequences)
    _finish(manifest, t0, out, quiet=args.quiet, count=args.count, length=seq_len)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    real_path, gen_path = Path(args.real), Path(args.generated)
    real = _load_sequences(real_path)
    generated = _load_sequences(gen_path)
    manifest, t0 = _start(args, [real_path, gen_path])
    report = metrics.compare_sequences(list(real), list(generated), pairing=args.pairing,
                                       real_id=str(real_path), generated_id=str(gen_path))
    out = Path(args.out)
    write_text_atomic(out, report.to_json())
    if args.plot:
        plotting.plot_series({"real": real[0], "generated": generated[0]},
                             Path(args.plot), title="first pair")
        manifest.outputs.append(str(args.plot))
    _finish(manifest, t0, out, quiet=args.quiet, metrics=report.metrics,
            undefined=list(report.undefined_flags))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    manifest, t0 = _start(args, [])
    results = gradcheck.kernel_checks(seeds_per_kernel=args.seeds)
    failures = {k: v for k, v in results.items() if v > args.tolerance}
    out = Path(args.out)
    write_text_atomic(out, json.dumps({
        "tolerance": args.tolerance, "seeds_per_kernel": args.seeds,
        "max_relative_error": results,
        "passed": not failures,
    }, indent=2, sort_keys=True) + "\n")
    _finish(manifest, t0, out, quiet=True)
    for name in sorted(results):
        status = "FAIL" if name in failures else "ok"
        if not args.quiet:
            print(f"{name:16s} {results[name]:.3e}  {status}")
    if failures:
        raise GradientCheckError(f"{len(failures)} kernel(s) above {args.tolerance}: "
                                 f"{sorted(failures)}")
    return 0


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgf",
                                     description="Seeded financial time-series toolkit")
    parser.add_argument("--version", action="version", version=f"qgf {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="rng seed (default 42)")
    common.add_argument("--quiet", action="store_true", help="suppress progress lines")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", parents=[common], help="fetch/validate an OHLCV csv")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="local csv path")
    src.add_argument("--fetch-url", help="url template containing {symbol}")
    p.add_argument("--symbol", help="ticker symbol (default: input stem)")
    p.add_argument("--out", required=True, help="normalized csv path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("indicators", parents=[common], help="compute the 16 feature columns")
    p.add_argument("--input", required=True)
    p.add_argument("--symbol")
    p.add_argument("--out", required=True, help="features csv path")
    p.add_argument("--label-horizon", type=int, help="append label_nN column")
    p.add_argument("--vr-convention", choices=["printed", "standard"], default="printed")
    p.set_defaults(func=cmd_indicators)

    p = sub.add_parser("label", parents=[common], help="binary up/down trend labels")
    p.add_argument("--input", required=True)
    p.add_argument("--symbol")
    p.add_argument("--horizon", type=int, required=True, help="lookback n in [1, 10]")
    p.add_argument("--out", required=True, help="labels csv path")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("select", parents=[common], help="recursive feature elimination")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--keep", type=int, required=True)
    p.add_argument("--out", required=True, help="report json path")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("reduce", parents=[common], help="randomized pca projection")
    p.add_argument("--features", required=True)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--oversample", type=int, default=5)
    p.add_argument("--out", required=True, help="reduced csv path")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("train", parents=[common], help="train the gan or a baseline")
    p.add_argument("--model", required=True,
                   choices=["gan", *baselines.BASELINE_KINDS])
    p.add_argument("--data", required=True, help="csv, one sequence per row")
    p.add_argument("--seq-len", type=int, help="default: data row length")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--d-steps", type=int, default=1)
    p.add_argument("--g-loss", choices=["printed", "nonsaturating"], default="printed")
    p.add_argument("--hidden", type=int, help="gan: generator cells; baselines: hidden")
    p.add_argument("--latent", type=int, default=16, help="baseline latent size")
    p.add_argument("--noise-dim", type=int, default=5)
    p.add_argument("--dropout", type=float, default=0.4)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common], help="sample sequences from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--len", type=int, dest="length", help="default: trained length")
    p.add_argument("--out", required=True, help="csv, one sequence per row")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="distance metrics between sets")
    p.add_argument("--real", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--pairing", choices=["paired", "concatenated"], default="paired")
    p.add_argument("--plot", help="optional svg overlay of the first pair")
    p.add_argument("--out", required=True, help="report json path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference kernel checks")
    p.add_argument("--seeds", type=int, default=5, help="random trials per kernel")
    p.add_argument("--tolerance", type=float, default=gradcheck.TOLERANCE)
    p.add_argument("--out", default="gradcheck.json", help="report json path")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_NUMERIC
    except DataError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
