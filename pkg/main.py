#!/usr/bin/env python
"""
Command-line entry point for the prime-gap / Andrica claim ledger.

Usage:
    python main.py verify  --limit 1000000 [--claims ANDRICA,AVG_MONOTONE] [--checkpoint ck.json [--checkpoint-every 16]]
    python main.py verify  --resume ck.json --limit 2000000
    python main.py stats   --limit 12 --stride 1 [--format csv|json] [--out rows.csv]
    python main.py bounds  --k-max 100000 [--square-from 1]
    python main.py general --x 0.5 --x 0.9 [--limit 1000000]
    python main.py records --limit 10000 [--decay 1000]
    python main.py catalog

Exit status: 0 when every claim expected to hold did hold (expected failures
are listed but do not fail the run), 1 when such a claim was violated or an
error occurred, 2 on usage errors.
"""

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import ValidationError

from src.claims.generalized import analyze_exponents, check_generalized, critical_exponent
from src.claims.ledger import (
    ClaimFold,
    LedgerSettings,
    claim_catalog,
    parse_claim,
    unexpected_failures,
)
from src.config import Config, OutputFormat, RunConfig
from src.errors import AndricaLabError, DomainError, StatsInvariantError, UnknownClaimError
from src.primes.bounds import check_bounds
from src.primes.gaps import RecordTracker, StatsFold, gap_chunks, h_decay
from src.report.checkpoint import checkpoint_resume, checkpoint_write
from src.report.formatters import (
    STATS_HEADER,
    outcome_lines,
    stats_csv_row,
    stats_json_row,
    stats_rows,
    to_json,
    tracker_summary,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def status(message: str = "") -> None:
    """Progress output goes to stderr so report streams stay clean"""
    print(message, file=sys.stderr)


def banner(title: str) -> None:
    status(f"\n{'='*60}")
    status(title)
    status(f"{'='*60}")


def write_report(content: str, out: Optional[Path]) -> None:
    """Write to the --out file, or stdout when none was given"""
    if out is None:
        sys.stdout.write(content)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        f.write(content)
    status(f"✓ Saved: {out}")


def ledger_settings(config: RunConfig) -> LedgerSettings:
    return LedgerSettings(
        band=(config.band_lo, config.band_hi),
        band_start=config.band_start,
        tolerance=config.h_tolerance,
    )


def cmd_verify(config: RunConfig, claims: Optional[List[str]] = None) -> Tuple[int, dict]:
    """Run the claim ledger; returns (exit status, report)"""
    if config.resume_path:
        fold = checkpoint_resume(config.resume_path)
        status(f"↻ Resumed at n={fold.stats.n:,} (p={fold.stats.last_prime:,}) from {config.resume_path}")
        if claims and [parse_claim(c) for c in claims] != fold.claims:
            status("⚠️  --claims ignored: a resumed run keeps the checkpoint's claim set")
    else:
        selected = [parse_claim(c) for c in claims] if claims else None
        fold = ClaimFold(selected, ledger_settings(config))

    hook = None
    if config.checkpoint_path:
        def hook(current: ClaimFold) -> None:
            checkpoint_write(current, config.limit, config.checkpoint_path)
            status(f"💾 Checkpoint at n={current.stats.n:,}: {config.checkpoint_path}")

    fold.run(config.limit, config.segment_size, config.threads,
             checkpoint=hook, checkpoint_every=config.checkpoint_every)

    if hook is not None:
        hook(fold)

    outcomes = fold.outcomes()
    failed = unexpected_failures(outcomes)
    for line in outcome_lines(outcomes):
        status(line)

    report = {
        "limit": config.limit,
        "checked_n": fold.stats.n,
        "last_prime": fold.stats.last_prime,
        "claims": outcomes,
        "unexpected_failures": [o.claim for o in failed],
        "records": tracker_summary(fold.tracker),
    }
    return (EXIT_FAILED if failed else EXIT_OK), report


def cmd_stats(config: RunConfig) -> int:
    """Stream running statistics rows, one per stride"""
    fold = StatsFold(tolerance=config.h_tolerance)
    as_csv = config.output_format is OutputFormat.CSV
    sink = open(config.out, "w") if config.out else sys.stdout
    try:
        if as_csv:
            sink.write(STATS_HEADER + "\n")
        for chunk in gap_chunks(config.limit, config.segment_size, config.threads):
            stats = fold.fold(chunk)
            for row in stats_rows(chunk, stats, config.stride):
                sink.write((stats_csv_row(row) if as_csv else stats_json_row(row)) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
            status(f"✓ Saved: {config.out}")
    status(f"📊 {fold.n:,} gaps, last prime {fold.last_prime:,}")
    return EXIT_OK


def cmd_bounds(k_max: int, config: RunConfig, square_from: int = 2) -> Tuple[int, dict]:
    report = check_bounds(k_max, square_from=square_from,
                          segment_size=config.segment_size, threads=config.threads)
    hard = report.hard_violations
    status(f"{'✓' if not hard else '✗'} {len(hard)} violations, "
           f"{len(report.violations) - len(hard)} indeterminate, k <= {k_max:,}")
    return (EXIT_FAILED if hard else EXIT_OK), report.model_dump(mode="json")


def cmd_general(xs: List[float], config: RunConfig, check_limit: Optional[int] = None) -> Tuple[int, dict]:
    analyses = analyze_exponents(xs)
    report = {"critical_exponent": critical_exponent(), "exponents": analyses}
    if check_limit is not None:
        report["checks"] = [
            check_generalized(x, check_limit, config.segment_size, config.threads) for x in xs
        ]
    for a in analyses:
        n0 = "beyond 2^63" if a.exceeds_range else f"{a.n0:,}"
        status(f"x={a.x:g} b={a.b:.6g} n0={n0} always_holds={a.always_holds}")
    return EXIT_OK, report


def cmd_records(config: RunConfig, decay: Optional[List[int]] = None) -> Tuple[int, dict]:
    tracker = RecordTracker()
    for chunk in gap_chunks(config.limit, config.segment_size, config.threads):
        tracker.observe_chunk(chunk)
    report = {"limit": config.limit, "records": tracker_summary(tracker)}
    if decay:
        report["h_decay"] = [h_decay(n, config.segment_size, config.threads)._asdict() for n in decay]
    summary = report["records"]
    status(f"📈 max h at n={summary['max_h']['n']}: {summary['max_h']['h']:.15g}")
    return EXIT_OK, report


def cmd_catalog() -> Tuple[int, list]:
    entries = [
        {"claim": e.claim.value, "source": e.source, "expected": e.expected.value, "statement": e.statement}
        for e in claim_catalog()
    ]
    return EXIT_OK, entries


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Prime gaps, Andrica values and an empirical claim ledger"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress details")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--limit", type=int, help="Largest prime to include")
    common.add_argument("--segment-size", type=int, help="Odd candidates per sieve segment")
    common.add_argument("--threads", type=int, help="Sieve threads (fallback: ANDRICA_LAB_THREADS)")
    common.add_argument("--out", type=Path, help="Write the report here instead of stdout")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="Report format")
    common.add_argument("--save", action="store_true", help=f"Write the report to {Config.OUTPUTS_DIR}/<command>.<format>")

    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", parents=[common], help="Check every claim in the ledger")
    verify.add_argument("--claims", help="Comma-separated claim tags (default: all)")
    verify.add_argument("--checkpoint", type=Path, help="Write a checkpoint when the run ends or is interrupted")
    verify.add_argument("--checkpoint-every", type=int, help="Also write the checkpoint every N segments")
    verify.add_argument("--resume", type=Path, help="Continue from a checkpoint")
    verify.add_argument("--band-lo", type=float, help="Lower end of the AVG_ASYMPTOTIC band")
    verify.add_argument("--band-hi", type=float, help="Upper end of the AVG_ASYMPTOTIC band")

    stats = sub.add_parser("stats", parents=[common], help="Running gap / Andrica averages")
    stats.add_argument("--stride", type=int, help="Emit every stride-th row")

    bounds = sub.add_parser("bounds", parents=[common], help="Check k-th prime bounds")
    bounds.add_argument("--k-max", type=int, required=True, help="Largest k to check")
    bounds.add_argument("--square-from", type=int, default=2, help="First k for p_k < k^2")

    general = sub.add_parser("general", parents=[common], help="Generalized exponent analysis")
    general.add_argument("--x", type=float, action="append", required=True, help="Exponent in (0, 1); repeatable")

    records = sub.add_parser("records", parents=[common], help="Record gaps and Andrica values")
    records.add_argument("--decay", type=int, action="append", help="Compare max h on [N, 2N] with k < N")

    sub.add_parser("catalog", help="List the claim ledger")
    return parser


def run_config(args: argparse.Namespace) -> RunConfig:
    """RunConfig from explicit flags; unset flags fall back to env / defaults"""
    mapping = {
        "limit": "limit",
        "segment_size": "segment_size",
        "threads": "threads",
        "out": "out",
        "format": "output_format",
        "stride": "stride",
        "checkpoint": "checkpoint_path",
        "checkpoint_every": "checkpoint_every",
        "resume": "resume_path",
        "band_lo": "band_lo",
        "band_hi": "band_hi",
    }
    values = {
        field: getattr(args, flag)
        for flag, field in mapping.items()
        if getattr(args, flag, None) is not None
    }
    if args.command == "stats" and "output_format" not in values:
        values["output_format"] = OutputFormat.CSV
    if args.command in ("bounds", "general") and "limit" not in values:
        values["limit"] = Config.MIN_LIMIT  # unused unless --limit is given
    return RunConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    if args.command == "catalog":
        _, entries = cmd_catalog()
        write_report(to_json(entries), None)
        return EXIT_OK

    try:
        config = run_config(args)
    except ValidationError as e:
        status(f"❌ Configuration Error: {e.errors()[0]['msg']}")
        return EXIT_USAGE

    if args.save and config.out is None:
        config = config.model_copy(update={"out": Path(Config.get_output_path(args.command, config.output_format.value))})

    banner(f"andrica-lab {args.command} - {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    try:
        if args.command == "verify":
            claims = [c.strip() for c in args.claims.split(",")] if args.claims else None
            code, report = cmd_verify(config, claims)
        elif args.command == "stats":
            return cmd_stats(config)
        elif args.command == "bounds":
            code, report = cmd_bounds(args.k_max, config, args.square_from)
        elif args.command == "general":
            code, report = cmd_general(args.x, config, config.limit if args.limit is not None else None)
        else:
            code, report = cmd_records(config, args.decay)
        write_report(to_json(report), config.out)
    except (UnknownClaimError, DomainError) as e:
        status(f"❌ {e}")
        return EXIT_USAGE
    except StatsInvariantError as e:
        status(f"❌ {e}: {e.diagnostics}")
        return EXIT_FAILED
    except (AndricaLabError, OSError) as e:
        status(f"❌ {e}")
        return EXIT_FAILED
    except KeyboardInterrupt:
        saved = f"; resume with --resume {config.checkpoint_path}" if config.checkpoint_path else ""
        status(f"\n⚠️  Interrupted{saved}")
        return EXIT_FAILED

    status(f"\nCompleted: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
