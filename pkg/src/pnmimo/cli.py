"""Command-line entry point."""

import argparse
import sys

import numpy as np

from . import simrun
from .errors import ConfigError, NumericalError, PnmimoError
from .hardness_lab import expected_radius, radius_variance, sample_radius_sq
from .constellation import make_qam
from .wiener_lab import validate_moments

_DEG = np.pi / 180.0


def _add_run_args(p):
    p.add_argument("--out", default="result.csv", help="result CSV path")
    p.add_argument("--threads", type=int, default=1, help="worker count")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnmimo",
                                description="MIMO phase-noise detection experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    _add_run_args(run)

    pre = sub.add_parser("preset", help="run a named scenario preset")
    pre.add_argument("name", help=f"one of: {', '.join(simrun.preset_names())}")
    pre.add_argument("--override", action="append", default=[], metavar="KEY=VAL")
    _add_run_args(pre)

    bnd = sub.add_parser("bounds", help="compute only the error lower bounds")
    bnd.add_argument("config")
    _add_run_args(bnd)

    hard = sub.add_parser("hardness", help="radius-statistics diagnostics")
    hard.add_argument("--nt", type=int, default=16)
    hard.add_argument("--nr", type=int, default=16)
    hard.add_argument("--sigma-t-deg", type=float, default=3.0)
    hard.add_argument("--sigma-r-deg", type=float, default=3.0)
    hard.add_argument("--gamma-db", type=float, default=40.0)
    hard.add_argument("--qam", type=int, default=4)
    hard.add_argument("--trials", type=int, default=10000)
    hard.add_argument("--seed", type=int, default=0)
    hard.add_argument("--out", default="hardness.csv")

    wie = sub.add_parser("wiener", help="filtered Wiener gain moment check")
    wie.add_argument("--phase-std-deg", type=float, nargs="+", default=[1.0, 5.0, 20.0])
    wie.add_argument("--samples", type=int, default=100000)
    wie.add_argument("--steps", type=int, default=1024)
    wie.add_argument("--seed", type=int, default=0)
    wie.add_argument("--out", default="wiener.csv")
    return p


def _cmd_run(args, bounds_only: bool) -> int:
    cfg = simrun.parse_config_file(args.config)
    if bounds_only and not (cfg.ml_lb or cfg.aml_lb):
        raise ConfigError("bounds command requires bounds=ml_lb and/or aml_lb in the config")
    det_rows, bound_rows = simrun.run_experiment(cfg, threads=args.threads)
    if not bounds_only:
        simrun.write_result_csv(args.out, cfg, det_rows)
        print(f"wrote {args.out} ({len(det_rows)} rows)")
    if bound_rows:
        bpath = args.out if bounds_only else args.out + ".bounds.csv"
        simrun.write_bounds_csv(bpath, cfg, bound_rows)
        print(f"wrote {bpath} ({len(bound_rows)} rows)")
    return 0


def _cmd_preset(args) -> int:
    cfg = simrun.apply_overrides(simrun.preset(args.name), args.override)
    det_rows, bound_rows = simrun.run_experiment(cfg, threads=args.threads)
    simrun.write_result_csv(args.out, cfg, det_rows)
    print(f"wrote {args.out} ({len(det_rows)} rows)")
    if bound_rows:
        simrun.write_bounds_csv(args.out + ".bounds.csv", cfg, bound_rows)
        print(f"wrote {args.out}.bounds.csv ({len(bound_rows)} rows)")
    return 0


def _cmd_hardness(args) -> int:
    st, sr = args.sigma_t_deg * _DEG, args.sigma_r_deg * _DEG
    gamma = 10.0 ** (args.gamma_db / 10.0)
    k = make_qam(args.qam)
    stats = radius_variance(args.nt, args.nr, gamma, st, sr, k.fourth_moment())
    rng = np.random.default_rng(args.seed)
    draws = sample_radius_sq(args.nt, args.nr, gamma, st, sr, k, args.trials, rng)
    e_emp = float(np.mean(draws))
    v_emp = float(np.var(draws, ddof=1))
    cover = float(np.mean(np.abs(draws - stats.e_r2) <= 0.1 * stats.e_r2))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n_t,n_r,sigma_t_deg,sigma_r_deg,gamma_db,e_r2_closed,e_r2_emp,"
                 "var_closed,var_emp,coverage\n")
        fh.write(f"{args.nt},{args.nr},{args.sigma_t_deg:.17g},{args.sigma_r_deg:.17g},"
                 f"{args.gamma_db:.17g},{stats.e_r2:.17g},{e_emp:.17g},"
                 f"{stats.var_r2:.17g},{v_emp:.17g},{cover:.17g}\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_wiener(args) -> int:
    rng = np.random.default_rng(args.seed)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("phase_std_deg,var_phi_emp,var_phi_cf,var_g_emp,var_g_cf,var_g_db\n")
        for deg in args.phase_std_deg:
            s = 3.0 * (deg * _DEG) ** 2          # Var(Phi) = S/3 inverted
            rec = validate_moments(s, args.samples, args.steps, rng)
            db = 10.0 * np.log10(rec.var_g_emp) if rec.var_g_emp > 0 else float("-inf")
            fh.write(f"{deg:.17g},{rec.var_phi_emp:.17g},{rec.var_phi_cf:.17g},"
                     f"{rec.var_g_emp:.17g},{rec.var_g_cf:.17g},{db:.17g}\n")
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, bounds_only=False)
        if args.command == "bounds":
            return _cmd_run(args, bounds_only=True)
        if args.command == "preset":
            return _cmd_preset(args)
        if args.command == "hardness":
            return _cmd_hardness(args)
        if args.command == "wiener":
            return _cmd_wiener(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except PnmimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
