"""Monte-Carlo SER sweeps with SE overlays, and their CSV/JSON export.

Trials are processed in fixed-size blocks.  Trial ``j`` always draws its
symbols, channel and unit-variance noise from ``trial_rng(seed, j)``, so every
detector and every SNR point sees the same realisations (common random
numbers) and results do not depend on the number of workers.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .amp import DetectorConfig, detect
from .baselines import box_detect, lmmse_detect, mf_detect, zf_detect
from .channel import _gaussian, draw_channel, draw_symbols, snr_to_n0, trial_rng
from .constellation import from_key
from .denoisers import FAMILIES, Denoiser
from .exceptions import AnalysisError, ConfigurationError
from .se import fixed_point, se_trajectory, ser_predict
from .tuning import TuningPolicy, parse_policy

__all__ = [
    "CSV_COLUMNS",
    "DetectorSpec",
    "PointResult",
    "SweepConfig",
    "SweepResult",
    "emit",
    "load_config",
    "parse_detector",
    "read_csv",
    "run_sweep",
    "wilson_interval",
]

CSV_COLUMNS = ("detector", "snr_db", "trials", "errors", "ser", "ci_lo", "ci_hi", "ser_se_pred", "diverged")
BASELINES = ("lmmse", "zf", "mf", "box")
_Z95 = 1.959963984540054


def wilson_interval(errors, n, z=_Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class DetectorSpec:
    """A detector named in a sweep: an AMP variant or a baseline."""

    name: str
    kind: str
    config: DetectorConfig | None = None


def parse_detector(token, constellation, t_max=10):
    """Parse ``"lmmse"``, ``"box"``, or ``"<family>[@<policy>]"`` (e.g. ``"gaussian@limit-zero"``)."""
    token = token.strip().lower()
    if token in BASELINES:
        return DetectorSpec(token, token)
    family, _, pol = token.partition("@")
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown detector {token!r}; expected a baseline {BASELINES} or a family {FAMILIES}")
    policy = parse_policy(pol) if pol else None
    cfg = DetectorConfig(Denoiser(family, constellation), tuning=policy, t_max=t_max)
    return DetectorSpec(token, "amp", cfg)


def _parse_list(value, cast=str):
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return tuple(cast(v.strip()) for v in str(value).split(",") if v.strip())


def _parse_grid(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    value = str(value).strip()
    if ":" in value:
        start, stop, step = (float(v) for v in value.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(round(start + i * step, 10)) for i in range(n))
    return _parse_list(value, float)


def _parse_bool(value):
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def default_snr_grid(constellation):
    """1 dB grid: 0-14 dB for BPSK/QPSK, 4-18 dB for 16-QAM/4-PAM, 8-22 dB above."""
    M = from_key(str(constellation)).M
    lo = {2: 0, 4: 4}.get(M, 8)
    return tuple(float(v) for v in range(lo, lo + 15))


@dataclass
class SweepConfig:
    """All knobs of one sweep; every field is also a config-file key."""

    mr: int = 128
    mt: int = 64
    constellation: str = "qpsk"
    detectors: tuple = ("exact", "gaussian", "clip")
    snr_db: tuple | None = None
    t_max: int = 10
    min_symbol_errors: int = 200
    max_trials: int = 100_000
    batch_size: int = 256
    seed: int = 0
    workers: int = 1
    out: str = "results"
    format: str = "csv"
    name: str = "sweep"
    normalize: bool = False

    _casts = {
        "mr": int,
        "mt": int,
        "constellation": str,
        "detectors": lambda v: _parse_list(v),
        "snr_db": _parse_grid,
        "t_max": int,
        "min_symbol_errors": int,
        "max_trials": int,
        "batch_size": int,
        "seed": int,
        "workers": int,
        "out": str,
        "format": str,
        "name": str,
        "normalize": _parse_bool,
    }

    def __post_init__(self):
        if self.snr_db is None:
            self.snr_db = default_snr_grid(self.constellation)
        for f in fields(self):
            try:
                setattr(self, f.name, self._casts[f.name](getattr(self, f.name)))
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"bad value for {f.name!r}: {exc}") from None
        self.validate()

    def validate(self):
        if self.mr < 1 or self.mt < 1:
            raise ConfigurationError("mr and mt must be positive")
        if not self.snr_db:
            raise ConfigurationError("snr_db grid is empty")
        if not self.detectors:
            raise ConfigurationError("no detectors configured")
        if self.min_symbol_errors < 1:
            raise ConfigurationError("min_symbol_errors must be >= 1")
        if self.max_trials < 1:
            raise ConfigurationError("max_trials must be >= 1")
        if self.batch_size < 1 or self.workers < 1 or self.t_max < 1:
            raise ConfigurationError("batch_size, workers and t_max must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"format must be csv or json, got {self.format!r}")
        c = self.make_constellation()
        for tok in self.detectors:
            parse_detector(tok, c, self.t_max)

    def make_constellation(self):
        return from_key(self.constellation, normalize=self.normalize)

    @property
    def beta(self):
        return self.mt / self.mr

    def to_dict(self):
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


def load_config(path, overrides=None):
    """Read a flat ``key = value`` file (``#`` comments) and apply overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        with open(path) as fh:
            parser.read_string("[sweep]\n" + fh.read())
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    values = dict(parser["sweep"])
    unknown = set(values) - set(SweepConfig.keys())
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return SweepConfig(**values)


@dataclass
class PointResult:
    detector: str
    snr_db: float
    trials: int
    errors: int
    ser: float
    ci_lo: float
    ci_hi: float
    ser_se_pred: float
    diverged: int
    wall_time: float = 0.0


@dataclass
class SweepResult:
    config: SweepConfig
    records: list = field(default_factory=list)

    def get(self, detector, snr_db):
        for rec in self.records:
            if rec.detector == detector and rec.snr_db == snr_db:
                return rec
        raise KeyError((detector, snr_db))

    def curve(self, detector):
        return [r for r in self.records if r.detector == detector]


def _draw_block(constellation, mr, mt, seed, start, count):
    """Symbols, channels and unit-variance noise for ``count`` consecutive trials.

    Uses the same per-trial streams and draw order as :func:`draw_instance`.
    """
    real = not constellation.is_complex
    dtype = float if real else complex
    s0 = np.empty((count, mt), dtype=dtype)
    H = np.empty((count, mr, mt), dtype=dtype)
    w = np.empty((count, mr), dtype=dtype)
    for i in range(count):
        rng = trial_rng(seed, start + i)
        s0[i] = draw_symbols(constellation, mt, rng)
        H[i] = draw_channel(mr, mt, rng, real=real)
        w[i] = _gaussian(rng, (mr,), 1.0, real)
    return s0, H, w


def _run_block(cfg, token, N0, start, count):
    """Errors and divergences for trials ``start .. start+count-1``."""
    c = cfg.make_constellation()
    spec = parse_detector(token, c, cfg.t_max)
    s0, H, w = _draw_block(c, cfg.mr, cfg.mt, cfg.seed, start, count)
    y = (H @ s0[..., None])[..., 0] + np.sqrt(N0) * w
    failed = np.zeros(count, dtype=bool)
    if spec.kind == "amp":
        res = detect(y, H, spec.config, on_divergence="flag")
        hard, failed = res.hard, res.diverged
    else:
        if spec.kind == "lmmse":
            est = lmmse_detect(y, H, N0, c.Es, unbiased=True)
        elif spec.kind == "zf":
            est = zf_detect(y, H)
        elif spec.kind == "mf":
            est = mf_detect(y, H)
        else:
            est, failed = box_detect(y, H, c.alpha, on_failure="flag")
        hard = c.slice(est if c.is_complex else np.real(est))
    errors = np.sum(hard != s0, axis=-1)
    return int(errors.sum()), int(failed.sum()), count


def se_prediction(spec, N0, beta, constellation, t_max):
    """Large-system SER predicted for a detector (NaN when SE does not apply)."""
    try:
        if spec.kind == "amp":
            return float(se_trajectory(N0, beta, spec.config, t_max).ser_pred[-1])
        if spec.kind == "mf":
            return float(ser_predict(N0 + beta * constellation.var, constellation))
        family, policy = {
            "lmmse": ("gaussian", TuningPolicy("optimal")),
            "zf": ("gaussian", TuningPolicy("limit-zero")),
            "box": ("clip", TuningPolicy("limit-zero")),
        }[spec.kind]
        if spec.kind == "zf" and beta >= 1:
            return float("nan")
        cfg = DetectorConfig(Denoiser(family, constellation), tuning=policy)
        return float(ser_predict(fixed_point(N0, beta, cfg), constellation))
    except AnalysisError:
        return float("nan")


def _run_point(cfg, token, snr_db, pool):
    c = cfg.make_constellation()
    spec = parse_detector(token, c, cfg.t_max)
    N0 = float(snr_to_n0(snr_db, cfg.beta, c.Es))
    t0 = time.perf_counter()
    trials = errors = diverged = 0
    start = 0
    while errors < cfg.min_symbol_errors and trials < cfg.max_trials:
        jobs = []
        for _ in range(cfg.workers):
            count = min(cfg.batch_size, cfg.max_trials - start)
            if count <= 0:
                break
            jobs.append((start, count))
            start += count
        if pool is None:
            outs = [_run_block(cfg, token, N0, s, n) for s, n in jobs]
        else:
            outs = list(pool.map(_run_block, *zip(*[(cfg, token, N0, s, n) for s, n in jobs])))
        # Reduce in block order and stop at the first block reaching the target,
        # so the outcome does not depend on how many blocks ran concurrently.
        for e, d, n in outs:
            errors += e
            diverged += d
            trials += n
            if errors >= cfg.min_symbol_errors:
                break
    n_sym = trials * cfg.mt
    lo, hi = wilson_interval(errors, n_sym)
    return PointResult(
        detector=token,
        snr_db=float(snr_db),
        trials=trials,
        errors=errors,
        ser=errors / n_sym,
        ci_lo=lo,
        ci_hi=hi,
        ser_se_pred=se_prediction(spec, N0, cfg.beta, c, cfg.t_max),
        diverged=diverged,
        wall_time=time.perf_counter() - t0,
    )


def run_sweep(cfg):
    """Estimate SER for every (detector, SNR) pair in ``cfg``."""
    cfg.validate()
    result = SweepResult(config=cfg)
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for token in cfg.detectors:
            for snr in cfg.snr_db:
                result.records.append(_run_point(cfg, token, snr, pool))
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit(result, fmt="csv", out_dir=None):
    """Write ``result`` to ``<out_dir>/<name>.<fmt>`` and return the path.

    Raises
    ------
    OSError
        If the output location is not writable.
    """
    out_dir = out_dir or result.config.out
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{result.config.name}.{fmt}")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in result.records:
                w.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])
    elif fmt == "json":
        payload = {
            "config": result.config.to_dict(),
            "seed": result.config.seed,
            "records": [asdict(rec) for rec in result.records],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
    else:
        raise ConfigurationError(f"unknown output format {fmt!r}")
    return path


def read_csv(path):
    """Parse a sweep CSV back into :class:`PointResult` records."""
    casts = {"detector": str, "trials": int, "errors": int, "diverged": int}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [PointResult(**{k: casts.get(k, float)(v) for k, v in row.items()}) for row in rows]
