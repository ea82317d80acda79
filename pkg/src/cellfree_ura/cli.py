"""Command line entry point: ``cellfree-ura {simulate,sweep,ebn0,dump-env}``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .channel import generate_environment
from .config import SystemConfig, dbm_to_watts, derive_seed, validate_config
from .harness import estimate_pupe, required_ebn0
from .report import (PupeRow, emit_ebn0, emit_environment, emit_pupe, pupe_csv_text,
                     ebn0_csv_text, read_overlay)

log = logging.getLogger("cellfree_ura")

DESK_TRIALS = 200
FULL_TRIALS = 2000


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_pair(text: str) -> tuple[float, float]:
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 2 or parts[0] >= parts[1]:
        raise argparse.ArgumentTypeError("expected LO,HI with LO < HI")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with SystemConfig fields")
    common.add_argument("--trials", type=int, help=f"trials per point (default {DESK_TRIALS})")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--ka", type=_int_list, help="active users, comma separated")
    common.add_argument("--mode", choices=["coop", "nocoop", "central"])
    common.add_argument("--m", type=int, help="number of APs")
    common.add_argument("--mr", type=int, help="antennas per AP")
    common.add_argument("--km", type=int, help="users recovered per AP")
    common.add_argument("--n-dec", type=int, help="maximum decoding iterations")
    common.add_argument("--power-dbm", type=float, help="pilot and data symbol power, dBm")
    common.add_argument("--sigma2-dbm", type=float, help="noise power, dBm")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    common.add_argument("--paper-scale", action="store_true",
                        help=f"full-scale trial count ({FULL_TRIALS}); takes hours")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="cellfree-ura", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="PUPE at one configuration")
    sub.add_parser("sweep", parents=[common], help="PUPE versus number of active users")
    e = sub.add_parser("ebn0", parents=[common], help="required Eb/N0 versus number of active users")
    e.add_argument("--target", type=float, default=0.05, help="target PUPE")
    e.add_argument("--bracket", type=_float_pair, default=(-20.0, 20.0),
                   help="initial power-scale bracket LO,HI in dB relative to the config")
    e.add_argument("--tol", type=float, default=0.25, help="bisection tolerance, dB")
    e.add_argument("--overlay", type=Path, help="CSV (K_a, Eb/N0 dB) of a reference curve to plot")
    d = sub.add_parser("dump-env", parents=[common], help="write topology and large-scale gains")
    d.add_argument("--trial-index", type=int, default=0)
    return p


def resolve_config(args) -> SystemConfig:
    cfg = SystemConfig()
    if args.config is not None:
        try:
            cfg = SystemConfig.from_json(args.config)
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.m is not None:
        changes["M"] = args.m
    if args.mr is not None:
        changes["M_r"] = args.mr
    if args.km is not None:
        changes["K_m"] = args.km
    if args.n_dec is not None:
        changes["n_dec"] = args.n_dec
    if args.power_dbm is not None:
        changes["P_p"] = changes["P_d"] = dbm_to_watts(args.power_dbm)
    if args.sigma2_dbm is not None:
        changes["sigma2"] = dbm_to_watts(args.sigma2_dbm)
    if args.ka:
        changes["K_a"] = args.ka[0]
    cfg = cfg.replace(**changes)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))
    return cfg


def _trials(args) -> int:
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        return args.trials
    return FULL_TRIALS if args.paper_scale else DESK_TRIALS


def _ka_values(args, cfg) -> list[int]:
    values = args.ka or [cfg.K_a]
    for k in values:
        problems = validate_config(cfg.replace(K_a=k))
        if problems:
            raise ConfigError(f"K_a={k}: " + "; ".join(problems))
    return values


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    trials = _trials(args)
    t0 = time.perf_counter()
    est = estimate_pupe(cfg, trials, args.workers)
    rows = [PupeRow("K_a", cfg.K_a, cfg, est)]
    emit_pupe(rows, args.out, stem="simulate", elapsed_s=round(time.perf_counter() - t0, 3))
    sys.stdout.write(pupe_csv_text(rows))
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    trials = _trials(args)
    rows = []
    for k in _ka_values(args, cfg):
        c = cfg.replace(K_a=k)
        est = estimate_pupe(c, trials, args.workers)
        log.info("K_a=%d p_e=%.4g (+-%.2g)", k, est.p_e, est.std_err)
        rows.append(PupeRow("K_a", k, c, est))
    emit_pupe(rows, args.out, stem="sweep")
    sys.stdout.write(pupe_csv_text(rows))
    return 0


def cmd_ebn0(args) -> int:
    cfg = resolve_config(args)
    trials = _trials(args)
    if not 0 < args.target < 1:
        raise ConfigError("--target must lie in (0, 1)")
    points, cfgs = [], []
    for k in _ka_values(args, cfg):
        c = cfg.replace(K_a=k)
        pt = required_ebn0(c, trials, args.target, args.bracket, args.tol, workers=args.workers)
        points.append(pt)
        cfgs.append(c)
    overlay = read_overlay(args.overlay) if args.overlay else None
    emit_ebn0(points, cfgs, args.out, args.target, overlay)
    sys.stdout.write(ebn0_csv_text(points, cfgs))
    return 0


def cmd_dump_env(args) -> int:
    cfg = resolve_config(args).effective()
    tseed = derive_seed(cfg.master_seed, "trial", args.trial_index)
    topo, F, chan = generate_environment(cfg, tseed)
    path = emit_environment(topo, F, chan.beta, Path(args.out) / f"env_trial{args.trial_index}.csv")
    print(path)
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "ebn0": cmd_ebn0, "dump-env": cmd_dump_env}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
