"""Command-line entry point: ``tcclock <mode> [flags]``."""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
import time
from pathlib import Path

from tcclock.harness.config import MODES, ConfigError, RunConfig
from tcclock.harness.manifest import write_manifest
from tcclock.liouville import SteadyStateError
from tcclock.ticks import InsufficientStatistics
from tcclock.trajectory import TrajectoryError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_STATS = 0, 2, 3, 4

log = logging.getLogger("tcclock")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    """Comma list, or ``lo:hi[:step]`` inclusive range."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(lo, hi + 1, step))
    return [int(x) for x in text.split(",") if x.strip()]


def _beta(text: str) -> float:
    return float("inf") if text.lower() in ("inf", "infinity") else float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--spin2", type=int, help="twice the total spin, 2S")
    common.add_argument("--lambda", dest="lam", type=float, help="drive parameter lambda = alpha/S")
    common.add_argument("--gamma0", type=float)
    common.add_argument("--beta", type=_beta, help="inverse temperature in 1/omega_C ('inf' for zero temperature)")
    common.add_argument("--observable", choices=["emissions", "activity", "heat"])
    g = common.add_mutually_exclusive_group()
    g.add_argument("--threshold", type=int, help="fixed threshold M")
    g.add_argument("--m-grid", dest="m_grid", type=_ints, help="thresholds, 'a,b,c' or 'lo:hi[:step]'")
    common.add_argument("--trajectories", type=int)
    common.add_argument("--horizon-min-ticks", dest="horizon_min_ticks", type=int)
    common.add_argument("--horizon", type=float, help="explicit trajectory length (overrides the tick policy)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--workers", type=int)
    common.add_argument("--lambdas", type=_floats, help="comma list for sweep-lambda")
    common.add_argument("--spins", type=_ints, help="comma list of 2S values for sweep-spin")
    common.add_argument("--noise-sigma-rel", dest="noise_sigma_rel", type=_floats, help="comma list of sigma/lambda")
    common.add_argument("--noise-dt", dest="noise_dt", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tcclock", description="Time-crystal clock simulator")
    sub = p.add_subparsers(dest="mode", required=True)
    for m in MODES:
        sub.add_parser(m, parents=[common])
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    keys = ("spin2", "lam", "gamma0", "beta", "observable", "threshold", "m_grid", "trajectories",
            "horizon_min_ticks", "horizon", "seed", "out", "workers", "lambdas", "spins", "noise_sigma_rel", "noise_dt")
    overrides = {k: getattr(args, k) for k in keys}
    overrides["mode"] = args.mode
    return RunConfig.load(args.config, overrides)


def run(cfg: RunConfig) -> Path:
    """Execute one mode into a fresh output directory and write its manifest."""
    from tcclock.harness.modes import RUNNERS

    out = Path(cfg.out)
    if out.exists():
        shutil.rmtree(out)
    out.mkdir(parents=True)
    t0 = time.perf_counter()
    summary = RUNNERS[cfg.mode](cfg, out)
    write_manifest(out, cfg.to_dict(), time.perf_counter() - t0,
                   extra={"trajectories_used": cfg.trajectories, "summary": summary})
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = run(cfg)
    except (SteadyStateError, TrajectoryError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InsufficientStatistics as exc:
        print(f"insufficient statistics: {exc}", file=sys.stderr)
        return EXIT_STATS
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out / "manifest.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
