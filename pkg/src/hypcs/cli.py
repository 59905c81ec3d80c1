"""Command-line entry point: ``hypcs <suite> [flags]``.

Each suite prints one report row per identity (JSON array or CSV).  Exit
status: 0 when every identity is within tolerance, 1 on a contract failure
(the first failing identity is named on stderr), 2 on a configuration error
(malformed spec files are reported with a byte offset).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field

from .schottky import SchottkyError
from .specfile import SpecError
from .suites import SUITES, ConfigError, Options, Row, run_suite

REPORT_SCHEMA = 1


@dataclass
class Scenario:
    suites: tuple
    options: Options = field(default_factory=Options)
    out: str = "json"
    report: str | None = None

    def validate(self) -> None:
        o = self.options
        if o.spec is not None:
            if len(self.suites) != 1:
                raise ConfigError("--spec applies to a single suite, not to 'all'")
            if not os.path.isfile(o.spec):
                raise ConfigError(f"spec file not found: {o.spec}")
        if o.tol is not None and not o.tol > 0:
            raise ConfigError("--tol must be positive")
        for name in ("grid", "mmax"):
            v = getattr(o, name)
            if v is not None and v < 1:
                raise ConfigError(f"--{name} must be at least 1")
        if o.maxlen is not None and o.maxlen < 0:
            raise ConfigError("--maxlen must be non-negative")
        if o.x0 is not None and not o.x0 > 0:
            raise ConfigError("--x0 must be positive")
        if o.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if not 0 <= o.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")


def rows_to_json(rows: list) -> str:
    body = [dict(schema=REPORT_SCHEMA, **r.to_json_dict()) for r in rows]
    return json.dumps(body, indent=2, allow_nan=False) + "\n"


CSV_FIELDS = ("schema", "suite", "identity", "passed", "residual", "tol", "value", "expected",
              "note", "data")


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        d = dict(schema=REPORT_SCHEMA, **r.to_json_dict())
        writer.writerow([d[k] if k in ("schema", "suite", "identity", "passed", "note")
                         else json.dumps(d[k], allow_nan=False) for k in CSV_FIELDS])
    return buf.getvalue()


def run_scenario(s: Scenario) -> tuple:
    """Run the suites; returns ``(exit code, rows)``."""
    s.validate()
    rows = []
    for name in s.suites:
        try:
            rows += run_suite(name, s.options)
        except ConfigError:
            raise
        except (SpecError, SchottkyError) as exc:
            raise ConfigError(str(exc)) from exc
        except OSError as exc:
            raise ConfigError(f"cannot read spec: {exc}") from exc
    failing = [r for r in rows if not r.passed]
    return (1 if failing else 0), rows


def emit_report(rows: list, out: str = "json", path: str | None = None) -> str:
    text = rows_to_json(rows) if out == "json" else rows_to_csv(rows)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hypcs",
        description="Verification suites for Chern-Simons invariants of hyperbolic funnels "
                    "and Schottky groups.")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--spec", help="spec file for the suite (funnel, family or group grammar)")
    p.add_argument("--tol", type=float, help="override every numerical tolerance")
    p.add_argument("--grid", type=int, help="quadrature grid size")
    p.add_argument("--maxlen", type=int, help="maximal word length L")
    p.add_argument("--mmax", type=int, help="maximal power M in the product over m")
    p.add_argument("--x0", type=float, help="funnel cutoff")
    p.add_argument("--seed", type=int, default=0, help="seed of the random test cases")
    p.add_argument("--out", choices=("json", "csv"), default="json")
    p.add_argument("--report", help="write the report to this file instead of stdout")
    p.add_argument("--threads", type=int, default=1, help="worker threads for quadrature")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock times (makes reports non-reproducible)")
    return p


def scenario_from_args(args: argparse.Namespace) -> Scenario:
    suites = SUITES if args.suite == "all" else (args.suite,)
    opts = Options(spec=args.spec, tol=args.tol, grid=args.grid, maxlen=args.maxlen,
                   mmax=args.mmax, x0=args.x0, seed=args.seed, threads=args.threads,
                   timing=args.timing)
    return Scenario(suites, opts, args.out, args.report)


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    scenario = scenario_from_args(args)
    t0 = time.perf_counter()
    try:
        code, rows = run_scenario(scenario)
    except ConfigError as exc:
        print(f"hypcs: configuration error: {exc}", file=sys.stderr)
        return 2
    emit_report(rows, scenario.out, scenario.report)
    failing = [r for r in rows if not r.passed]
    if failing:
        first: Row = failing[0]
        print(f"hypcs: FAIL {first.suite}/{first.identity}: residual {first.residual:.3e} "
              f"exceeds tolerance {first.tol:.1e} ({len(failing)} failing of {len(rows)})",
              file=sys.stderr)
    elif args.timing:
        print(f"hypcs: {len(rows)} identities passed in {time.perf_counter() - t0:.1f} s",
              file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
