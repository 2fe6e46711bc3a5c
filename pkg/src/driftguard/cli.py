"""Command line interface: run experiments, scan confidence CSVs, summarize reports.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
Diagnostics go to stderr; results go to stdout or the requested file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .drift_detector import DetectorConfig, DriftDetector
from .errors import ConfigError, CsvParseError, DriftGuardError
from .runner import RunReport, config_from_dict, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the CLI contract wants 1
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="driftguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the experiment config JSON")
    run_p.add_argument("--method", choices=("dawc", "stl", "fcb"), help="override the config's method")
    run_p.add_argument("--seed", type=int, help="override every seed in the config")
    run_p.add_argument("--out", help="write the report JSON here instead of stdout")
    run_p.add_argument("--matrix-csv", help="also export the accuracy matrix as CSV")

    det_p = sub.add_parser("detect", help="run the detector over a one-column confidence CSV")
    det_p.add_argument("--csv", required=True, help="CSV with a single 'q' column")
    det_p.add_argument("--lambda", dest="lambda_sens", type=float, default=0.05)
    det_p.add_argument("--delta", type=int, default=100)
    det_p.add_argument("--nmax", type=int, default=1000)
    det_p.add_argument("--stride", type=int, default=25)

    rep_p = sub.add_parser("report", help="print a human-readable summary of a report file")
    rep_p.add_argument("--in", dest="path", required=True, help="report JSON produced by run")
    return parser


def _load_config(args) -> "ExperimentConfig":
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config!r} is not valid JSON: {exc}") from None
    if args.method is not None:
        raw["method"] = args.method
    if args.seed is not None:
        raw["seed"] = args.seed
        raw.setdefault("training", {})["seed"] = args.seed
        raw.setdefault("consolidation", {})["seed"] = args.seed
        stream = raw.setdefault("stream", {"kind": "synthetic"})
        if stream.get("kind", "synthetic") == "synthetic":
            stream["seed"] = args.seed
    return config_from_dict(raw)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"report written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    if args.matrix_csv:
        with open(args.matrix_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"task_{i}" for i in range(1, len(report.accuracy_matrix) + 1)])
            for t, row in enumerate(report.accuracy_matrix, start=1):
                writer.writerow([t] + row + [""] * (len(report.accuracy_matrix) - len(row)))
    return EXIT_OK


def _read_confidence_csv(path) -> list[float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file: missing header", line=1) from None
        if [h.strip() for h in header] != ["q"]:
            raise CsvParseError(f"header must be 'q', got {','.join(header)!r}", line=1)
        values = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 1:
                raise CsvParseError(f"expected 1 field, got {len(row)}", line=line_no)
            try:
                values.append(float(row[0]))
            except ValueError as exc:
                raise CsvParseError(str(exc), line=line_no) from None
    return values


def _cmd_detect(args) -> int:
    cfg = DetectorConfig(
        lambda_sens=args.lambda_sens,
        delta=args.delta,
        n_max=args.nmax,
        check_stride=args.stride,
    )
    values = _read_confidence_csv(args.csv)
    detector = DriftDetector(cfg)
    events = 0
    for i, q in enumerate(values):
        report = detector.step(0, q)
        if report is not None:
            events += 1
            estimated = (
                i - report.window_len + 1 + report.change_index
                if report.change_index is not None
                else "?"
            )
            print(
                f"drift at sample {i} (estimated change at {estimated}, "
                f"score {report.score_sf:.6f} > threshold {report.threshold_th:.6f})"
            )
    print(f"drift events: {events}")
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        with open(args.path, encoding="utf-8") as fh:
            report = RunReport.from_dict(json.load(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read report {args.path!r}: {exc}") from None
    except (json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"report {args.path!r} is not a valid run report: {exc}") from None
    print(f"method: {report.method}")
    print(f"drift events: {len(report.drift_events)}")
    for ev in report.drift_events:
        print(
            f"  at {ev['stream_position']} (estimated change {ev['estimated_change_position']}, "
            f"score {ev['score_sf']:.4f})"
        )
    if report.aa is not None:
        print(f"average accuracy: {100.0 * report.aa:.2f}% ({report.aa:.6f})")
        print(f"average forgetting: {report.af:.6f}")
    else:
        print("average accuracy: n/a (no ground-truth tasks)")
    cost = report.cost
    print(
        "cost: "
        f"{cost['gradient_updates']} gradient updates, "
        f"{cost['fine_tune_events']} fine-tune events, "
        f"{cost['detector_invocations']} detector invocations"
    )
    print(f"labeled samples used: {report.labeled_samples_used}")
    print(f"wall time: {report.wall_time_ms:.1f} ms")
    for w in report.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "detect":
            return _cmd_detect(args)
        return _cmd_report(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DriftGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
