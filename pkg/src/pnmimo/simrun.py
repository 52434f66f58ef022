"""Batch experiment runner: configs, presets, SNR sweeps, CSV output."""

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import channel as ch_mod
from . import likelihood_bounds as lb
from .constellation import make_qam
from .detector import default_gamma_max, snr_ceiling
from .errors import ConfigError
from .experiment import ErrorCounter, Scenario, run_trial_range

DEFAULT_DETECTORS = ("lmmse", "naive_ml", "selection", "siw")
KNOWN_DETECTORS = ("lmmse", "naive_ml", "selection", "siw", "siw_iter", "exhaustive_aml")
_DEG = np.pi / 180.0


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str                       # siso | los_mimo | uplink_simo | custom
    n_t: int
    n_r: int
    qam_order: int
    pn_family: str                      # gaussian_iid | uniform_iid | none
    sigma_t_deg: float
    sigma_r_deg: float
    snr_db_list: Tuple[float, ...]
    detectors: Tuple[str, ...] = DEFAULT_DETECTORS
    trials: int = 10000
    master_seed: int = 20250826
    gamma_max_db: Optional[float] = None
    max_iter: int = 1
    ml_lb: bool = False
    aml_lb: bool = False
    spacing_fraction: Optional[float] = None
    s_max: int = lb.S_MAX_DEFAULT
    name: str = "custom"

    def validate(self) -> None:
        if self.trials < 100:
            raise ConfigError("trials must be >= 100")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must be nonempty")
        if any(b <= a for a, b in zip(self.snr_db_list, self.snr_db_list[1:])):
            raise ConfigError("snr_db_list must be strictly increasing")
        if self.pn_family not in ("gaussian_iid", "uniform_iid", "none"):
            raise ConfigError(f"unknown pn family {self.pn_family!r}")
        for d in self.detectors:
            if d not in KNOWN_DETECTORS:
                raise ConfigError(f"unknown detector {d!r}")
        if self.scenario == "los_mimo" and self.spacing_fraction is None:
            raise ConfigError("los_mimo scenario requires spacing_fraction")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")

    def to_scenario(self) -> Scenario:
        st, sr = self.sigma_t_deg * _DEG, self.sigma_r_deg * _DEG
        if self.pn_family == "gaussian_iid":
            pn = ch_mod.gaussian_iid(self.n_t, self.n_r, st, sr)
        elif self.pn_family == "uniform_iid":
            pn = ch_mod.uniform_iid(self.n_t, self.n_r, st, sr)
        else:
            pn = ch_mod.no_phase_noise(self.n_t, self.n_r)
        model = "los_mimo" if self.scenario == "los_mimo" else "rayleigh"
        return Scenario(name=self.name, n_t=self.n_t, n_r=self.n_r,
                        constellation=make_qam(self.qam_order), pn=pn,
                        channel_model=model, spacing_fraction=self.spacing_fraction)

    def canonical_text(self) -> str:
        pairs = [
            ("scenario", self.scenario), ("name", self.name),
            ("n_t", self.n_t), ("n_r", self.n_r), ("qam_order", self.qam_order),
            ("pn_family", self.pn_family),
            ("sigma_t_deg", _fmt(self.sigma_t_deg)), ("sigma_r_deg", _fmt(self.sigma_r_deg)),
            ("snr_db_list", ",".join(_fmt(v) for v in self.snr_db_list)),
            ("detectors", ",".join(self.detectors)),
            ("trials", self.trials), ("master_seed", self.master_seed),
            ("gamma_max_db", "" if self.gamma_max_db is None else _fmt(self.gamma_max_db)),
            ("max_iter", self.max_iter),
            ("ml_lb", int(self.ml_lb)), ("aml_lb", int(self.aml_lb)),
            ("spacing_fraction", "" if self.spacing_fraction is None else _fmt(self.spacing_fraction)),
            ("s_max", self.s_max),
        ]
        return "\n".join(f"{k}={v}" for k, v in pairs)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# presets

def _preset_table() -> Dict[str, ExperimentConfig]:
    def siso(order, pn_deg, snrs):
        return ExperimentConfig(scenario="siso", n_t=1, n_r=1, qam_order=order,
                                pn_family="gaussian_iid", sigma_t_deg=pn_deg,
                                sigma_r_deg=pn_deg, snr_db_list=tuple(snrs))

    def los(spacing, order, snrs):
        return ExperimentConfig(scenario="los_mimo", n_t=4, n_r=4, qam_order=order,
                                pn_family="gaussian_iid", sigma_t_deg=1.0, sigma_r_deg=1.0,
                                snr_db_list=tuple(snrs), spacing_fraction=spacing)

    def simo(n_r, order, pn_deg, snrs, gmax):
        return ExperimentConfig(scenario="uplink_simo", n_t=4, n_r=n_r, qam_order=order,
                                pn_family="gaussian_iid", sigma_t_deg=pn_deg, sigma_r_deg=0.0,
                                snr_db_list=tuple(snrs), gamma_max_db=gmax)

    table = {
        "siso64": siso(64, 3.0, (15, 20, 25, 30, 35, 40)),
        "siso256": siso(256, 2.0, (20, 25, 30, 35, 40, 45)),
        "siso1024": siso(1024, 1.0, (25, 30, 35, 40, 45, 50)),
        "los033": los(0.33, 64, (15, 20, 25, 30, 35, 40)),
        "los07": los(0.7, 256, (20, 25, 30, 35, 40, 45)),
        "los10": los(1.0, 1024, (25, 30, 35, 40, 45, 50)),
        "simo44_64": simo(4, 64, 4.0, (15, 20, 25, 30, 35, 40, 45), 37.5),
        "simo44_256": simo(4, 256, 2.0, (20, 25, 30, 35, 40, 45, 50), 50.0),
        "simo410_256": simo(10, 256, 2.0, (15, 20, 25, 30, 35, 40), 30.0),
    }
    table["uniform1024"] = replace(table["siso1024"], pn_family="uniform_iid")
    table["uniform44_64"] = replace(table["simo44_64"], pn_family="uniform_iid")
    table["uniform44_256"] = replace(table["simo44_256"], pn_family="uniform_iid")
    return {name: replace(cfg, name=name) for name, cfg in table.items()}


def preset(name: str) -> ExperimentConfig:
    table = _preset_table()
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(table))}")
    return table[name]


def preset_names() -> List[str]:
    return sorted(_preset_table())


# ---------------------------------------------------------------------------
# flat key=value config files

_BOOL_KEYS = {"ml_lb", "aml_lb"}
_INT_KEYS = {"n_t", "n_r", "qam_order", "trials", "master_seed", "max_iter", "s_max"}
_FLOAT_KEYS = {"sigma_t_deg", "sigma_r_deg", "gamma_max_db", "spacing_fraction"}
_LIST_KEYS = {"snr_db_list", "detectors", "bounds"}
_STR_KEYS = {"scenario", "name", "pn_family", "preset"}


def parse_config_text(text: str) -> ExperimentConfig:
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if val == "":
            continue          # empty value means "keep the default"
        try:
            if key in _BOOL_KEYS:
                values[key] = val.lower() in ("1", "true", "yes")
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key == "snr_db_list":
                values[key] = tuple(float(v) for v in val.split(",") if v.strip())
            elif key in ("detectors",):
                values[key] = tuple(v.strip() for v in val.split(",") if v.strip())
            elif key == "bounds":
                flags = {v.strip() for v in val.split(",") if v.strip()}
                bad = flags - {"ml_lb", "aml_lb"}
                if bad:
                    raise ConfigError(f"line {lineno}: unknown bound flags {sorted(bad)}")
            elif key in _STR_KEYS:
                values[key] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key == "bounds":
                values["ml_lb"] = "ml_lb" in flags
                values["aml_lb"] = "aml_lb" in flags
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    base = preset(values.pop("preset")) if "preset" in values else None
    try:
        cfg = replace(base, **values) if base else ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"incomplete config: {exc}") from exc
    cfg.validate()
    return cfg


def parse_config_file(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def apply_overrides(cfg: ExperimentConfig, overrides: List[str]) -> ExperimentConfig:
    text = cfg.canonical_text().replace("scenario=", "scenario=", 1)
    lines = dict(line.split("=", 1) for line in text.splitlines())
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=val, got {item!r}")
        key, _, val = item.partition("=")
        lines[key.strip()] = val.strip()
    merged = "\n".join(f"{k}={v}" for k, v in lines.items() if v != "")
    return parse_config_text(merged)


# ---------------------------------------------------------------------------
# execution

def _chunk_worker(args):
    scenario, gamma, gamma_eff, seed, snr_index, start, stop, detectors, max_iter = args
    return run_trial_range(scenario, gamma, gamma_eff, seed, snr_index, start, stop,
                           list(detectors), max_iter)


def run_experiment(config: ExperimentConfig, threads: int = 1):
    """Run the configured sweep; returns (detector_rows, bound_rows).

    All detectors in a trial share the same (H, theta, z). Trials use
    per-trial streams, so the counters are identical for any partition of
    the trial range across workers.
    """
    config.validate()
    scenario = config.to_scenario()
    if config.gamma_max_db is None:
        gamma_max = default_gamma_max(config.qam_order)
    else:
        gamma_max = 10.0 ** (config.gamma_max_db / 10.0)
    det_rows = []
    bound_rows = []
    for snr_index, snr_db in enumerate(config.snr_db_list):
        gamma = 10.0 ** (snr_db / 10.0)
        gamma_eff = snr_ceiling(gamma, gamma_max)
        counters = {name: ErrorCounter() for name in config.detectors}
        tasks = []
        n_chunks = max(1, min(threads, config.trials)) if threads > 1 else 1
        bounds = [(i * config.trials) // n_chunks for i in range(n_chunks + 1)]
        for a, b in zip(bounds, bounds[1:]):
            tasks.append((scenario, gamma, gamma_eff, config.master_seed, snr_index,
                          a, b, config.detectors, config.max_iter))
        if threads > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                partials = list(pool.map(_chunk_worker, tasks))
        else:
            partials = [_chunk_worker(t) for t in tasks]
        for part in partials:
            for name, counter in part.items():
                counters[name] = counters[name].merge(counter)
        for name in config.detectors:
            c = counters[name]
            lo, hi = c.ci95()
            det_rows.append({"scenario": config.name, "detector": name,
                             "snr_db": snr_db, "trials": c.trials,
                             "errors": c.vector_errors, "rate": c.rate,
                             "ci_lo": lo, "ci_hi": hi, "avg_nnd_nodes": c.avg_nodes})
        if config.ml_lb:
            rec = lb.ml_lower_bound(scenario, gamma, config.trials, s_max=config.s_max,
                                    master_seed=config.master_seed, snr_index=snr_index,
                                    max_iter=max(config.max_iter, 4), gamma_eff=gamma_eff)
            bound_rows.append(_bound_row(rec, snr_db))
        if config.aml_lb:
            rec = lb.aml_lower_bound(scenario, gamma, config.trials,
                                     master_seed=config.master_seed, snr_index=snr_index,
                                     max_iter=max(config.max_iter, 4), gamma_eff=gamma_eff)
            bound_rows.append(_bound_row(rec, snr_db))
    det_rows.sort(key=lambda r: (r["snr_db"], r["detector"]))
    bound_rows.sort(key=lambda r: (r["snr_db"], r["kind"]))
    return det_rows, bound_rows


def _bound_row(rec: lb.BoundRecord, snr_db: float) -> dict:
    return {"kind": rec.kind, "snr_db": snr_db, "trials": rec.trials,
            "errors": rec.errors_counted, "undecided": rec.undecided,
            "rate": rec.rate, "ci_lo": rec.ci95[0], "ci_hi": rec.ci95[1]}


def write_result_csv(path: str, config: ExperimentConfig, det_rows: List[dict]) -> None:
    """Bit-stable CSV: 17-significant-digit reals, sorted rows, hashed config."""
    cols = ("scenario", "detector", "snr_db", "trials", "errors",
            "rate", "ci_lo", "ci_hi", "avg_nnd_nodes")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# pnmimo result v1\n# config_hash={config.config_hash()}\n")
        fh.write(f"# master_seed={config.master_seed}\n")
        fh.write(",".join(cols) + "\n")
        for row in det_rows:
            fh.write(",".join(_cell(row[c]) for c in cols) + "\n")


def write_bounds_csv(path: str, config: ExperimentConfig, bound_rows: List[dict]) -> None:
    cols = ("kind", "snr_db", "trials", "errors", "undecided", "rate", "ci_lo", "ci_hi")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# pnmimo bounds v1\n# config_hash={config.config_hash()}\n")
        fh.write(f"# master_seed={config.master_seed}\n")
        fh.write(",".join(cols) + "\n")
        for row in bound_rows:
            fh.write(",".join(_cell(row[c]) for c in cols) + "\n")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return str(v)
