"""Command-line interface: ``mlama sweep | se | validate``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 a validation
check failed.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .amp import DetectorConfig
from .denoisers import Denoiser
from .exceptions import AnalysisError, ConfigurationError, DetectorError
from .harness import SweepConfig, emit, load_config, parse_detector, run_sweep
from .se import mrt, se_trajectory
from .channel import snr_to_n0
from .tuning import TuningPolicy

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3

# Decoupled-channel equivalents used for SE output of the baselines.
_BASELINE_SE = {
    "lmmse": ("gaussian", "optimal"),
    "zf": ("gaussian", "limit-zero"),
    "mf": ("gaussian", "limit-infinity"),
    "box": ("clip", "limit-zero"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _add_config_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    for key in SweepConfig.keys():
        flag = "--" + key
        alias = "--" + key.replace("_", "-")
        names = [flag] if alias == flag else [flag, alias]
        p.add_argument(*names, dest=key, default=None, help=f"override config key {key!r}")


def build_parser():
    parser = _Parser(prog="mlama", description="Mismatched-prior AMP detectors for massive MU-MIMO.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("sweep", help="Monte-Carlo SER sweep with SE overlay")
    _add_config_flags(p)
    p = sub.add_parser("se", help="SE trajectories, fixed points and MRT table")
    _add_config_flags(p)
    sub.add_parser("validate", help="run the invariant suite")
    return parser


def _config_from_args(args):
    overrides = {k: getattr(args, k) for k in SweepConfig.keys() if getattr(args, k) is not None}
    if args.config:
        return load_config(args.config, overrides)
    return SweepConfig(**overrides)


def _se_config(token, c, t_max):
    spec = parse_detector(token, c, t_max)
    if spec.kind == "amp":
        return spec.config
    fam, pol = _BASELINE_SE[token]
    return DetectorConfig(Denoiser(fam, c), TuningPolicy(pol), t_max)


def cmd_sweep(cfg):
    result = run_sweep(cfg)
    path = emit(result, cfg.format)
    for rec in result.records:
        print(
            f"{rec.detector:>24s} {rec.snr_db:6.2f} dB  SER {rec.ser:.3e} "
            f"[{rec.ci_lo:.3e}, {rec.ci_hi:.3e}]  SE {rec.ser_se_pred:.3e}  div {rec.diverged}"
        )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_se(cfg):
    c = cfg.make_constellation()
    os.makedirs(cfg.out, exist_ok=True)
    traj_path = os.path.join(cfg.out, f"{cfg.name}_se.csv")
    mrt_path = os.path.join(cfg.out, f"{cfg.name}_mrt.csv")
    with open(traj_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detector", "snr_db", "t", "sigma2", "tau_star", "ser_pred", "converged"])
        for token in cfg.detectors:
            dcfg = _se_config(token, c, cfg.t_max)
            for snr in cfg.snr_db:
                N0 = float(snr_to_n0(snr, cfg.beta, c.Es))
                traj = se_trajectory(N0, cfg.beta, dcfg, cfg.t_max)
                ser = traj.ser_pred
                for t, s2 in enumerate(traj.sigma2, start=1):
                    tau = traj.tau_star[t - 1] if t <= len(traj.tau_star) else float("nan")
                    w.writerow([token, f"{snr:.17g}", t, f"{s2:.17g}", f"{tau:.17g}", f"{ser[t - 1]:.17g}", traj.converged])
    with open(mrt_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detector", "beta_min"])
        for token in cfg.detectors:
            dcfg = _se_config(token, c, cfg.t_max)
            beta_min = mrt(dcfg.denoiser, dcfg.tuning)
            w.writerow([token, f"{beta_min:.17g}"])
            print(f"{token:>24s} beta_min = {beta_min:.6f}")
    print(f"wrote {traj_path}\nwrote {mrt_path}")
    return EXIT_OK


def cmd_validate():
    from .validation import run_all

    results = run_all()
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate()
        cfg = _config_from_args(args)
        return cmd_sweep(cfg) if args.command == "sweep" else cmd_se(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AnalysisError, DetectorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
