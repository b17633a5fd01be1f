"""Decoy-state BB84 key-rate modelling over lossy fibre links."""

from .channel import ChannelModel, gain, qber_mu, qber_n, transmittance, yield_n
from .config import Profile, gys, load_profile
from .decoy import (
    EstimateMethod,
    MeasurementRecord,
    SinglePhotonEstimate,
    invert_yields,
    simulate_records,
    vacuum_weak_bound,
    worst_case_omega,
)
from .keyrate import (
    KeyRateResult,
    Method,
    RateInputs,
    RateSettings,
    intercept_resend_ceiling,
    max_secure_distance,
    optimize_mu,
    rate_decoy,
    rate_gllp_only,
    rate_ideal,
)
from .qkdmath import binary_entropy, find_root, poisson_weights

__version__ = "0.1.0"
