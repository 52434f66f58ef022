"""Near-ML detection for MIMO channels with oscillator phase noise."""

from .constellation import Constellation, make_qam, nearest_symbol, real_alphabet
from .channel import (ChannelInstance, Observation, PhaseNoiseModel, apply_channel,
                      gaussian_iid, make_los_mimo, no_phase_noise, sample_phase_noise,
                      sample_rayleigh, uniform_iid)
from .detector import (DetectionResult, WhitenedSystem, approx_loglik, build_ab, build_w,
                       exhaustive_aml, naive_lmmse, nnd, siw_detect, siw_iterative,
                       snr_ceiling)
from .likelihood_bounds import (BoundRecord, LikelihoodEstimate, aml_lower_bound,
                                mc_loglik, ml_lower_bound, one_dim_likelihood,
                                quad_loglik)
from .hardness_lab import (RadiusStats, expected_radius, high_snr_ratio_check,
                           min_phase_distance, radius_variance)
from .wiener_lab import WienerStats, simulate_filtered_gain, validate_moments, wiener_moments
from .experiment import Scenario
from .simrun import ExperimentConfig, preset, run_experiment

__version__ = "0.1.0"
