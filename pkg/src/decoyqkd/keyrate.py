"""Secure key rates per emitted signal pulse, optimal intensity search and
distance solvers.

Three rate formulas are available:

``decoy-gllp``
    q * (-Q_mu f H2(E_mu) + Q_1 (1 - H2(e_1))), with Y_1 and e_1 from a
    single-photon estimate (by default the exact forward-model values).
``gllp-only``
    q * Q_mu * (-f H2(E_mu) + Omega (1 - H2(E_mu / Omega))), where Omega is
    the worst-case untagged fraction. The error-correction factor for this
    method defaults to 1 (no inefficiency), independently of ``f_ec``.
``ideal-eq1``
    Q_mu * (-H2(E_mu) + Omega (1 - H2(e_1))): Shannon-limit error correction.

Rates are clamped at zero; the unclamped value is kept as ``raw`` so that
solvers can bracket the point where the rate dies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import channel
from .channel import ChannelModel
from .decoy import SinglePhotonEstimate, exact_estimate, multi_photon_probability, worst_case_omega
from .errors import MissingEstimateError, NoCrossingError
from .qkdmath import binary_entropy, find_root, golden_section_max

DEFAULT_F_EC = 1.22
MU_GRID_STEP = 1e-3
MU_REFINE_TOL = 1e-5
DISTANCE_TOL_KM = 0.1
INTERCEPT_RESEND_QBER = 0.25


class Method(str, enum.Enum):
    DECOY = "decoy-gllp"
    GLLP = "gllp-only"
    IDEAL = "ideal-eq1"


@dataclass(frozen=True)
class RateSettings:
    """Protocol-level knobs that are not properties of the channel."""

    f_ec: float = DEFAULT_F_EC
    gllp_f_ec: float = 1.0
    q_protocol: float = 1.0
    mu_cap: float = 2.0
    distance_cap_km: float = 500.0

    def __post_init__(self):
        if self.f_ec < 1.0 or self.gllp_f_ec < 1.0:
            raise ValueError("error-correction inefficiency must be >= 1")
        if not 0.0 < self.q_protocol <= 1.0:
            raise ValueError("q_protocol must be in (0, 1]")
        if not 0.0 < self.mu_cap <= 2.0:
            raise ValueError("mu_cap must be in (0, 2]")
        if self.distance_cap_km <= 0.0:
            raise ValueError("distance_cap_km must be > 0")

    def f_for(self, method: Method) -> float:
        method = Method(method)
        if method is Method.GLLP:
            return self.gllp_f_ec
        if method is Method.IDEAL:
            return 1.0
        return self.f_ec


@dataclass(frozen=True)
class RateInputs:
    mu: float
    q_mu: float
    e_mu: float
    estimate: Optional[SinglePhotonEstimate] = None
    f_ec: float = DEFAULT_F_EC
    q_protocol: float = 1.0

    def __post_init__(self):
        if self.f_ec < 1.0:
            raise ValueError(f"f_ec={self.f_ec!r} must be >= 1")
        if not 0.0 < self.q_protocol <= 1.0:
            raise ValueError(f"q_protocol={self.q_protocol!r} must be in (0, 1]")


@dataclass(frozen=True)
class KeyRateResult:
    rate: float
    method: Method
    components: dict = field(default_factory=dict)

    @property
    def raw(self) -> float:
        """Formula value before clamping at zero."""
        return self.components["raw"]

    @property
    def secure(self) -> bool:
        return self.rate > 0.0

    def audit(self) -> float:
        """Re-evaluate the pre-clamp rate from the recorded components."""
        c = self.components
        if self.method is Method.GLLP:
            single = c["omega"] * (1.0 - c["h2_e1"]) if c["single_photon_term_valid"] else 0.0
            return c["q"] * c["q_mu"] * (-c["f_ec"] * c["h2_e_mu"] + single)
        return c["q"] * (-c["q_mu"] * c["f_ec"] * c["h2_e_mu"] + c["q1"] * (1.0 - c["h2_e1"]))


def inputs_from_model(
    model: ChannelModel,
    distance_km: float,
    mu: float,
    method: Method | str = Method.DECOY,
    settings: RateSettings = RateSettings(),
) -> RateInputs:
    """Rate inputs for the honest channel, using exact single-photon values."""
    eta = channel.transmittance(model, distance_km).eta
    return RateInputs(
        mu=mu,
        q_mu=channel.gain(model, eta, mu),
        e_mu=channel.qber_mu(model, eta, mu),
        estimate=exact_estimate(model, eta),
        f_ec=settings.f_for(method),
        q_protocol=settings.q_protocol,
    )


def _require_single_photon(inputs: RateInputs) -> SinglePhotonEstimate:
    est = inputs.estimate
    if est is None or est.y1 is None or est.e1 is None:
        raise MissingEstimateError("rate needs an estimate carrying Y_1 and e_1")
    return est


def _single_photon_rate(inputs: RateInputs, method: Method, f_ec: float, q: float) -> KeyRateResult:
    if inputs.q_mu <= 0.0:
        raise ValueError("q_mu must be > 0")
    est = _require_single_photon(inputs)
    q1 = est.q1(inputs.mu)
    e1 = min(est.e1, 0.5)
    h_e_mu = binary_entropy(inputs.e_mu)
    h_e1 = binary_entropy(e1)
    raw = q * (-inputs.q_mu * f_ec * h_e_mu + q1 * (1.0 - h_e1))
    components = dict(
        mu=inputs.mu, q_mu=inputs.q_mu, e_mu=inputs.e_mu, y1=est.y1, e1=e1, q1=q1,
        omega=q1 / inputs.q_mu, h2_e_mu=h_e_mu, h2_e1=h_e1, f_ec=f_ec, q=q, raw=raw,
    )
    return KeyRateResult(rate=max(0.0, raw), method=method, components=components)


def rate_decoy(inputs: RateInputs) -> KeyRateResult:
    """Practical decoy-state rate with error-correction inefficiency f_ec and sift factor q."""
    return _single_photon_rate(inputs, Method.DECOY, inputs.f_ec, inputs.q_protocol)


def rate_ideal(inputs: RateInputs) -> KeyRateResult:
    """Decoy-state rate at the Shannon limit (f = 1, q = 1)."""
    return _single_photon_rate(inputs, Method.IDEAL, 1.0, 1.0)


def rate_gllp_only(inputs: RateInputs) -> KeyRateResult:
    """Rate without decoy states: the multi-photon part of the gain is assumed tagged.

    When Omega = 0 or E_mu / Omega > 1/2 the single-photon term is worth nothing.
    ``inputs.estimate`` is ignored; Omega comes from the worst-case bound.
    """
    if inputs.q_mu <= 0.0:
        raise ValueError("q_mu must be > 0")
    omega = worst_case_omega(inputs.mu, inputs.q_mu).omega_bound
    valid = omega > 0.0 and inputs.e_mu / omega <= 0.5
    e1 = inputs.e_mu / omega if valid else 0.5
    h_e_mu = binary_entropy(inputs.e_mu)
    h_e1 = binary_entropy(e1)
    single = omega * (1.0 - h_e1) if valid else 0.0
    raw = inputs.q_protocol * inputs.q_mu * (-inputs.f_ec * h_e_mu + single)
    q1 = omega * inputs.q_mu
    components = dict(
        mu=inputs.mu, q_mu=inputs.q_mu, e_mu=inputs.e_mu, omega=omega, e1=e1, q1=q1,
        y1=q1 / (inputs.mu * math.exp(-inputs.mu)) if inputs.mu > 0.0 else 0.0,
        h2_e_mu=h_e_mu, h2_e1=h_e1, single_photon_term_valid=valid,
        f_ec=inputs.f_ec, q=inputs.q_protocol, raw=raw,
    )
    return KeyRateResult(rate=max(0.0, raw), method=Method.GLLP, components=components)


def key_rate(inputs: RateInputs, method: Method | str) -> KeyRateResult:
    method = Method(method)
    if method is Method.DECOY:
        return rate_decoy(inputs)
    if method is Method.GLLP:
        return rate_gllp_only(inputs)
    return rate_ideal(inputs)


def _entropy_array(p):
    p = np.asarray(p, dtype=float)
    inside = (p > 0.0) & (p < 1.0)
    safe = np.where(inside, p, 0.5)
    h = -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe)
    return np.where(inside, h, 0.0)


def rate_curve(
    model: ChannelModel,
    eta: float,
    mus,
    method: Method | str,
    settings: RateSettings = RateSettings(),
):
    """Pre-clamp rates over an array of intensities (exact single-photon values).

    Vectorised twin of ``key_rate(inputs_from_model(...))`` used by the optimisers.
    """
    method = Method(method)
    mus = np.asarray(mus, dtype=float)
    f = settings.f_for(method)
    q = 1.0 if method is Method.IDEAL else settings.q_protocol
    q_mu = np.asarray(channel.gain_closed(model, eta, mus), dtype=float)
    qe_mu = channel.error_gain_closed(model, eta, mus)
    # Q_mu = 0 only at mu = 0 with no background; every term then vanishes
    e_mu = np.divide(qe_mu, q_mu, out=np.full_like(q_mu, 0.5), where=q_mu > 0.0)
    h_e_mu = _entropy_array(e_mu)
    if method is Method.GLLP:
        p_multi = np.array([multi_photon_probability(m) for m in mus.ravel()]).reshape(mus.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            omega = np.where(q_mu > 0.0, np.maximum(0.0, 1.0 - p_multi / q_mu), 0.0)
        valid = (omega > 0.0) & (e_mu <= 0.5 * omega)
        ratio = np.where(valid, e_mu / np.where(valid, omega, 1.0), 0.5)
        single = np.where(valid, omega * (1.0 - _entropy_array(ratio)), 0.0)
        return q * q_mu * (-f * h_e_mu + single)
    y1 = channel.yield_n(model, eta, 1)
    e1 = min(channel.qber_n(model, eta, 1), 0.5) if y1 > 0.0 else 0.5
    q1 = y1 * mus * np.exp(-mus)
    return q * (-q_mu * f * h_e_mu + q1 * (1.0 - binary_entropy(e1)))


def _best_mu(model, eta, method, settings, mu_range):
    lo, hi = mu_range
    n = int(round((hi - lo) / MU_GRID_STEP))
    grid = lo + MU_GRID_STEP * np.arange(n + 1)
    grid[-1] = hi
    raw = rate_curve(model, eta, grid, method, settings)
    i = int(np.argmax(raw))  # first maximum: ties go to the smaller mu
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if b > a:
        x, fx = golden_section_max(
            lambda m: float(rate_curve(model, eta, m, method, settings)), a, b, MU_REFINE_TOL
        )
        if fx > raw[i]:
            return x, fx
    return float(grid[i]), float(raw[i])


def optimize_mu(
    model: ChannelModel,
    distance_km: float,
    method: Method | str = Method.DECOY,
    mu_range: Optional[tuple[float, float]] = None,
    settings: RateSettings = RateSettings(),
) -> tuple[float, KeyRateResult]:
    """Intensity maximising the key rate at a given distance.

    A 1e-3 grid scan followed by golden-section refinement to 1e-5 around the
    best grid point. If no intensity gives a positive rate the sentinel
    ``(0.0, zero-rate result)`` is returned; check ``result.secure``.
    """
    method = Method(method)
    if mu_range is None:
        mu_range = (0.0, settings.mu_cap)
    lo, hi = mu_range
    if not 0.0 <= lo < hi <= 2.0:
        raise ValueError(f"mu_range {mu_range} must lie within [0, 2]")
    eta = channel.transmittance(model, distance_km).eta
    mu_opt, best = _best_mu(model, eta, method, settings, (lo, hi))
    if best <= 0.0:
        mu_opt = 0.0
        result = KeyRateResult(rate=0.0, method=method, components=dict(raw=best, mu=0.0))
        return mu_opt, result
    return mu_opt, key_rate(inputs_from_model(model, distance_km, mu_opt, method, settings), method)


def best_raw_rate(
    model: ChannelModel,
    distance_km: float,
    method: Method | str,
    settings: RateSettings = RateSettings(),
    mu_scale: float = 1.0,
) -> float:
    """Pre-clamp rate at the optimal intensity, optionally evaluated at a
    scaled intensity ``mu_scale * mu_opt`` (for sensitivity studies)."""
    eta = channel.transmittance(model, distance_km).eta
    mu_opt, best = _best_mu(model, eta, method, settings, (0.0, settings.mu_cap))
    if mu_scale == 1.0:
        return best
    return float(rate_curve(model, eta, mu_scale * mu_opt, method, settings))


def max_secure_distance(
    model: ChannelModel,
    method: Method | str = Method.DECOY,
    settings: RateSettings = RateSettings(),
    mu_scale: float = 1.0,
) -> float:
    """Largest distance (km) with a positive rate at the optimal intensity.

    Bisection to 0.1 km on the sign of the optimised pre-clamp rate. Returns 0
    if no key is possible at zero distance, and ``settings.distance_cap_km`` if
    the rate is still positive there.
    """
    method = Method(method)

    def f(d):
        return best_raw_rate(model, d, method, settings, mu_scale)

    if f(0.0) <= 0.0:
        return 0.0
    cap = settings.distance_cap_km
    if f(cap) > 0.0:
        return cap
    return find_root(f, 0.0, cap, DISTANCE_TOL_KM)


def intercept_resend_ceiling(model: ChannelModel, settings: RateSettings = RateSettings()) -> float:
    """Distance at which the single-photon error rate reaches 1/4.

    Past this point an intercept-resend attack explains all single-photon
    detections, so no BB84 key is possible whatever the decoy analysis.
    """
    if model.y0 <= 0.0 and model.e_detector < INTERCEPT_RESEND_QBER:
        raise NoCrossingError("without background e_1 = e_detector < 1/4 at every distance")

    def f(d):
        eta = channel.transmittance(model, d).eta
        return channel.qber_n(model, eta, 1) - INTERCEPT_RESEND_QBER

    if f(0.0) >= 0.0:
        return 0.0
    cap = settings.distance_cap_km
    if f(cap) < 0.0:
        raise NoCrossingError(f"e_1 stays below 1/4 up to {cap} km")
    return find_root(f, 0.0, cap, 1e-6)


@dataclass(frozen=True)
class ScanRow:
    distance_km: float
    method: Method
    mu: float
    rate: float
    q_mu: float
    e_mu: float
    y1: float
    e1: float
    omega: float


def scan_point(
    model: ChannelModel,
    distance_km: float,
    method: Method | str,
    settings: RateSettings = RateSettings(),
    mu: Optional[float] = None,
) -> ScanRow:
    """One row of a distance sweep. ``mu=None`` optimises the intensity; a
    distance without secure key is reported at the mu = 0 sentinel.

    For ``gllp-only`` rows, y1 and e1 are the values implied by the worst-case
    Omega (Omega Q_mu / (mu e^-mu) and E_mu / Omega).
    """
    method = Method(method)
    mu_used = optimize_mu(model, distance_km, method, settings=settings)[0] if mu is None else float(mu)
    inputs = inputs_from_model(model, distance_km, mu_used, method, settings)
    if inputs.q_mu == 0.0:
        return ScanRow(float(distance_km), method, mu_used, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0)
    c = key_rate(inputs, method).components
    return ScanRow(
        distance_km=float(distance_km), method=method, mu=mu_used, rate=max(0.0, c["raw"]),
        q_mu=c["q_mu"], e_mu=c["e_mu"], y1=c["y1"], e1=c["e1"], omega=c["omega"],
    )


def scan(
    model: ChannelModel,
    distances: Sequence[float],
    methods: Sequence[Method | str] = (Method.DECOY, Method.GLLP),
    settings: RateSettings = RateSettings(),
    mu: Optional[float] = None,
) -> list[ScanRow]:
    """Rows ordered by distance, then method name."""
    methods = sorted({Method(m) for m in methods}, key=lambda m: m.value)
    return [scan_point(model, d, m, settings, mu) for d in sorted(distances) for m in methods]
