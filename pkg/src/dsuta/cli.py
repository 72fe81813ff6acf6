"""Command-line entry point: ``dsuta {gen-stream,run,compare,counters}``.

Failures exit non-zero and print ``error[<category>]: <message>`` to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import harness
from .model import ConfigurationError
from .stream import build_stream, stream_spec_from_config, write_stream_csv

EXIT_CODES = {"config": 2, "adaptation": 3, "mismatch": 4, "io": 5}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CliError("config", f"{path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError("config", f"{path} must hold a mapping at top level")
    return data


def _read_report(path) -> harness.RunReport:
    try:
        return harness.RunReport.read(path)
    except FileNotFoundError as exc:
        raise CliError("io", f"{path} is not a run directory ({exc.filename} missing)") from exc


def cmd_gen_stream(args) -> int:
    cfg = harness.resolve_stream_config(load_config(args.spec))
    spec = stream_spec_from_config(cfg, args.seed)
    stream = build_stream(spec)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_stream_csv(stream, out)
    out.with_suffix(".spec.yaml").write_text(yaml.safe_dump(spec.to_dict(), sort_keys=False))
    print(f"wrote {len(stream)} utterances to {out} (boundaries: {sorted(stream.boundaries)})")
    return 0


def cmd_run(args) -> int:
    raw = load_config(args.run_config)
    if args.seeds:
        raw["seeds"] = [int(s) for s in args.seeds.split(",")]
    cfg = harness.RunConfig.from_dict(raw)
    report = harness.run_experiment(cfg)
    report.write(args.output)
    s = report.summary()
    print(f"{cfg.label}: token error rate {100 * s['token_error_rate']:.2f}% over seeds {list(cfg.seeds)}; "
          f"resets/seed {s['n_resets']:.1f}; report in {args.output}")
    if report.failed:
        raise CliError("adaptation", "; ".join(s["diagnostics"]))
    return 0


def cmd_compare(args) -> int:
    reports = [_read_report(d) for d in args.dirs]
    try:
        comparison = harness.compare_report(reports)
    except ConfigurationError as exc:
        raise CliError("mismatch", str(exc)) from exc
    print(harness.format_table(comparison))
    if args.curves:
        harness.write_curves(comparison, args.curves)
        print(f"difference curves vs {comparison['baseline']} written to {args.curves}")
    return 0


def cmd_counters(args) -> int:
    report = _read_report(args.dir)
    rows = [{"seed": s.seed, **s.counters} for s in report.seeds]
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'seed':>6}{'forwards':>12}{'backwards':>12}")
        for r in rows:
            print(f"{r['seed']:>6}{r['forwards']:>12}{r['backwards']:>12}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dsuta", description="Continual test-time adaptation experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-stream", help="materialize a stream config to CSV")
    g.add_argument("spec")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_gen_stream)

    r = sub.add_parser("run", help="run an experiment config and write a report directory")
    r.add_argument("run_config")
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--seeds", help="comma-separated seed list overriding the config")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="tabulate reports produced on the same stream")
    c.add_argument("dirs", nargs="+")
    c.add_argument("--curves", help="CSV path for smoothed error-difference curves")
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("counters", help="print forward/backward counts of a report")
    k.add_argument("dir")
    k.add_argument("--json", action="store_true")
    k.set_defaults(func=cmd_counters)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        category, message = exc.category, str(exc)
    except (ConfigurationError, KeyError, TypeError) as exc:
        category, message = "config", f"{type(exc).__name__}: {exc}"
    print(f"error[{category}]: {message}", file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
