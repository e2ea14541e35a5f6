"""Command-line front end: ``feriver verify`` and ``feriver bench``.

Exit status for verify: 0 = clean run (no checkpoints), 1 = at least one
mismatch checkpoint, 2 = configuration or simulator diagnostic error. The
FERIVER_OUT environment variable overrides --out.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .errors import FeriverError
from .harness import RunConfig, StageFailure, parse_config_file, run_bench, run_verify


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="FILE",
                   help="key=value defaults, overridden by command-line flags")
    p.add_argument("--workload", metavar="PATH|builtin:NAME")
    p.add_argument("--strobe", type=int, dest="strobe_counter", metavar="K",
                   help="instructions between state comparisons")
    p.add_argument("--error-rate", type=float, dest="error_rate", metavar="R")
    p.add_argument("--mutation", choices=["bitflip", "wrongrd"])
    p.add_argument("--fault-mode", choices=["static", "bernoulli"], dest="fault_mode")
    p.add_argument("--seed", type=int)
    p.add_argument("--resync", action="store_true", default=None,
                   help="overwrite DUT state from golden after each mismatch")
    p.add_argument("--vcd-window", type=int, dest="vcd_window", metavar="W",
                   help="replay window in instructions (default 2x strobe)")
    p.add_argument("--far", type=lambda s: int(s, 16), metavar="HEX",
                   help="frame address of the register span")
    p.add_argument("--frames", type=int, metavar="N", help="data frames per readback (<= 9)")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--schedule", choices=["interleaved", "threaded"])


def _build_config(args) -> RunConfig:
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    names = {f.name for f in fields(RunConfig)}
    for name in names:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return RunConfig(**{k: v for k, v in values.items() if k in names})


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="feriver",
        description="Differential co-verification of RV32I cores with "
                    "frame-readback state observation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run one co-verification session")
    _add_common(p_verify)

    p_bench = sub.add_parser("bench", help="error-rate sweep, one CSV row per cell")
    _add_common(p_bench)
    p_bench.add_argument("--rates", default="0,0.1,0.2,0.3,0.4,0.5",
                         help="comma-separated error rates")
    p_bench.add_argument("--workloads", default="builtin:qsort",
                         help="comma-separated workload specs")

    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
    except (FeriverError, ValueError, OSError) as exc:
        print(f"feriver: stage 1 (configuration): {exc}", file=sys.stderr)
        return 2

    if args.command == "verify":
        try:
            status, _report = run_verify(cfg)
        except StageFailure as exc:
            print(f"feriver: {exc}", file=sys.stderr)
            return 2
        return status

    try:
        rates = [float(r) for r in args.rates.split(",") if r.strip() != ""]
        workloads = [w.strip() for w in args.workloads.split(",") if w.strip()]
        if not rates or not workloads:
            raise ValueError("need at least one workload and one rate")
    except ValueError as exc:
        print(f"feriver: stage 1 (configuration): {exc}", file=sys.stderr)
        return 2
    status, csv_text, _reports = run_bench(cfg, workloads, rates)
    out_dir = cfg.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "bench.csv"
    csv_path.write_text(csv_text)
    print(f"wrote {csv_path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
