"""Scenario plumbing shared by the batch runner and the bound estimators."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import channel as ch_mod
from . import detector
from .channel import ChannelInstance, Observation, PhaseNoiseModel
from .constellation import Constellation
from .rng import trial_rng
from .stats import wilson_interval


@dataclass(frozen=True)
class Scenario:
    """Everything needed to draw one simulation trial."""

    name: str
    n_t: int
    n_r: int
    constellation: Constellation
    pn: PhaseNoiseModel
    channel_model: str = "rayleigh"          # rayleigh | los_mimo | identity | fixed
    spacing_fraction: Optional[float] = None
    fixed_h: Optional[np.ndarray] = field(default=None, repr=False)


def channel_for_trial(scenario: Scenario, master_seed: int, snr_index: int,
                      trial: int) -> ChannelInstance:
    if scenario.channel_model == "rayleigh":
        rng = trial_rng(master_seed, snr_index, trial, "channel")
        return ch_mod.sample_rayleigh(scenario.n_t, scenario.n_r, rng)
    if scenario.channel_model == "los_mimo":
        return ch_mod.make_los_mimo(scenario.spacing_fraction)
    if scenario.channel_model == "identity":
        return ch_mod.identity_channel(scenario.n_t)
    if scenario.channel_model == "fixed":
        return ChannelInstance(h=scenario.fixed_h, model_tag="fixed")
    raise ValueError(f"unknown channel model {scenario.channel_model!r}")


def draw_trial(scenario: Scenario, gamma: float, master_seed: int, snr_index: int,
               trial: int) -> Tuple[ChannelInstance, Observation]:
    """Channel, data symbols, phase noise, and AWGN for one trial.

    Each ingredient has its own stream, so results are invariant to the
    worker partition and to which detectors run afterwards.
    """
    ch = channel_for_trial(scenario, master_seed, snr_index, trial)
    data_rng = trial_rng(master_seed, snr_index, trial, "data")
    x = scenario.constellation.points[
        data_rng.integers(0, scenario.constellation.order, scenario.n_t)]
    theta = ch_mod.sample_phase_noise(scenario.pn, trial_rng(master_seed, snr_index, trial, "phase"))
    obs = ch_mod.apply_channel(ch, x, theta, gamma,
                               trial_rng(master_seed, snr_index, trial, "noise"))
    return ch, obs


def run_detectors(obs: Observation, ch: ChannelInstance, gamma_eff: float,
                  scenario: Scenario, detectors: List[str],
                  max_iter: int = 4) -> Dict[str, detector.DetectionResult]:
    """Run the requested detectors on one shared observation.

    Intermediate results are shared: SIW reuses the naive LMMSE and naive
    ML passes, and "selection" is the score-argmax of those two.
    """
    k = scenario.constellation
    q = scenario.pn.q_theta
    y, h = obs.y, ch.h
    out: Dict[str, detector.DetectionResult] = {}
    need_naives = bool({"lmmse", "naive_ml", "selection", "siw", "siw_iter"} & set(detectors))
    if need_naives:
        lm = detector.naive_lmmse(y, h, gamma_eff, k, q)
        ml0 = detector.nnd(y, h, k, gamma_eff, q)
    for name in detectors:
        if name == "lmmse":
            out[name] = lm
        elif name == "naive_ml":
            out[name] = ml0
        elif name == "selection":
            pick = lm if lm.score > ml0.score else ml0
            out[name] = detector.DetectionResult(x_hat=pick.x_hat, method="selection",
                                                 score=pick.score,
                                                 nnd_node_count=ml0.nnd_node_count)
        elif name == "siw":
            out[name] = detector.siw_detect(y, h, gamma_eff, q, k)
        elif name == "siw_iter":
            out[name] = detector.siw_iterative(y, h, gamma_eff, q, k, max_iter=max_iter)
        elif name == "exhaustive_aml":
            out[name] = detector.exhaustive_aml(y, h, gamma_eff, q, k)
        else:
            raise ValueError(f"unknown detector {name!r}")
    return out


@dataclass
class ErrorCounter:
    """Vector-error tally for one (detector, snr) cell; merge is associative."""

    trials: int = 0
    vector_errors: int = 0
    nnd_nodes: int = 0

    def record(self, error: bool, nodes: int = 0) -> None:
        self.trials += 1
        self.vector_errors += int(error)
        self.nnd_nodes += nodes

    def merge(self, other: "ErrorCounter") -> "ErrorCounter":
        return ErrorCounter(self.trials + other.trials,
                            self.vector_errors + other.vector_errors,
                            self.nnd_nodes + other.nnd_nodes)

    @property
    def rate(self) -> float:
        return self.vector_errors / self.trials if self.trials else 0.0

    def ci95(self) -> Tuple[float, float]:
        return wilson_interval(self.vector_errors, self.trials)

    @property
    def avg_nodes(self) -> float:
        return self.nnd_nodes / self.trials if self.trials else 0.0


def run_trial_range(scenario: Scenario, gamma: float, gamma_eff: float,
                    master_seed: int, snr_index: int, start: int, stop: int,
                    detectors: List[str], max_iter: int = 4) -> Dict[str, ErrorCounter]:
    """Counters for a contiguous trial range (one worker's share)."""
    counters = {name: ErrorCounter() for name in detectors}
    for trial in range(start, stop):
        ch, obs = draw_trial(scenario, gamma, master_seed, snr_index, trial)
        results = run_detectors(obs, ch, gamma_eff, scenario, detectors, max_iter)
        for name, res in results.items():
            err = not np.array_equal(res.x_hat, obs.x_true)
            counters[name].record(err, res.nnd_node_count)
    return counters
