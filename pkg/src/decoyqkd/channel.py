"""Honest-channel forward model for a phase-randomised weak-coherent BB84 link.

Photon-number-resolved yields and error rates, and their Poisson averages
(gain Q_mu and QBER E_mu) for a pulse of mean photon number mu.

Yields keep the background/signal cross term, Y_n = eta_n + Y0 - eta_n Y0 with
eta_n = 1 - (1 - eta)^n, and the n-photon error rate is
e_n = (e_detector eta_n + Y0 / 2) / Y_n. Summing over Poisson weights gives
the closed forms

    Q_mu       = 1 - (1 - Y0) exp(-eta mu)
    Q_mu E_mu  = e_detector (1 - exp(-eta mu)) + Y0 / 2

because Y_n e_n = e_detector eta_n + Y0/2 for every n (including n = 0).
Neither yield_n nor qber_n takes an intensity: the per-photon-number
quantities are shared by every intensity the source emits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .qkdmath import DEFAULT_TAIL_TOL, check_probability, clamp_probability, poisson_weights

VACUUM_QBER = 0.5
SERIES_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class ChannelModel:
    """Physical parameters of the link.

    alpha is the fibre loss in dB/km; eta_bob lumps Bob's internal
    transmittance and detector efficiency; y0 is the background (dark count)
    rate per pulse; e_detector the intrinsic misalignment error.
    """

    alpha: float
    eta_bob: float
    y0: float
    e_detector: float
    e0: float = field(default=VACUUM_QBER, init=False)

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise ValueError(f"alpha={self.alpha!r} must be >= 0 dB/km")
        for name in ("eta_bob", "y0", "e_detector"):
            object.__setattr__(self, name, check_probability(getattr(self, name), name))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.y0 >= 0.01 or self.eta_bob == 0.0:
            warnings.warn(
                "y0 >= 0.01 or eta_bob == 0: background is not small against the signal",
                RuntimeWarning,
                stacklevel=3,
            )

    def replace(self, **changes) -> "ChannelModel":
        params = dict(alpha=self.alpha, eta_bob=self.eta_bob, y0=self.y0, e_detector=self.e_detector)
        params.update(changes)
        return ChannelModel(**params)


@dataclass(frozen=True)
class LinkBudget:
    distance_km: float
    eta: float


@dataclass(frozen=True)
class IntensityStatistics:
    mu: float
    gain: float
    qber: float


def transmittance(model: ChannelModel, distance_km: float) -> LinkBudget:
    """Overall per-photon transmission eta_bob * 10^(-alpha L / 10)."""
    if distance_km < 0.0:
        raise ValueError(f"distance_km={distance_km!r} must be >= 0")
    eta = model.eta_bob * 10.0 ** (-model.alpha * distance_km / 10.0)
    return LinkBudget(distance_km=float(distance_km), eta=eta)


def eta_at(model: ChannelModel, distance_km):
    """Vectorised transmittance; accepts arrays of distances."""
    return model.eta_bob * np.power(10.0, -model.alpha * np.asarray(distance_km, dtype=float) / 10.0)


def _eta_n(eta: float, n: int) -> float:
    # 1 - (1 - eta)^n without cancellation for small eta
    if eta == 1.0:
        return 1.0 if n > 0 else 0.0
    return -math.expm1(n * math.log1p(-eta))


def yield_n(model: ChannelModel, eta: float, n: int) -> float:
    """Detection probability given an n-photon pulse."""
    if n < 0:
        raise ValueError("photon number must be >= 0")
    eta = check_probability(eta, "eta")
    if n == 0:
        return model.y0
    en = _eta_n(eta, n)
    return clamp_probability(en + model.y0 - en * model.y0)


def qber_n(model: ChannelModel, eta: float, n: int) -> float:
    """Error rate of detections caused by n-photon pulses. Exactly 1/2 for n = 0."""
    if n == 0:
        return model.e0
    y = yield_n(model, eta, n)
    if y == 0.0:
        raise ZeroDivisionError(f"Y_{n} = 0: error rate undefined (y0 = 0 and eta = 0)")
    return clamp_probability((model.e_detector * _eta_n(eta, n) + model.e0 * model.y0) / y)


def gain_closed(model: ChannelModel, eta, mu):
    """Q_mu = 1 - (1 - Y0) exp(-eta mu); vectorises over numpy arrays."""
    x = np.multiply(eta, mu)
    return -np.expm1(-x) + model.y0 * np.exp(-x)


def error_gain_closed(model: ChannelModel, eta, mu):
    """Q_mu E_mu = e_detector (1 - exp(-eta mu)) + Y0 / 2; vectorises."""
    x = np.multiply(eta, mu)
    return -model.e_detector * np.expm1(-x) + model.e0 * model.y0


def gain_series(model: ChannelModel, eta: float, mu: float, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """Truncated sum of Y_n p_n."""
    pw = poisson_weights(mu, tail_tol)
    return math.fsum(p * yield_n(model, eta, n) for n, p in enumerate(pw.weights))


def error_gain_series(model: ChannelModel, eta: float, mu: float, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """Truncated sum of Y_n e_n p_n."""
    pw = poisson_weights(mu, tail_tol)
    terms = []
    for n, p in enumerate(pw.weights):
        y = yield_n(model, eta, n)
        if y > 0.0:
            terms.append(p * y * qber_n(model, eta, n))
    return math.fsum(terms)


def gain(model: ChannelModel, eta: float, mu: float) -> float:
    """Gain Q_mu of intensity mu (closed form, checked against the series)."""
    if mu < 0.0:
        raise ValueError(f"mu={mu!r} must be >= 0")
    eta = check_probability(eta, "eta")
    q = float(gain_closed(model, eta, mu))
    if __debug__:
        q_series = gain_series(model, eta, mu)
        assert abs(q - q_series) <= SERIES_CHECK_TOL, (q, q_series)
    return clamp_probability(q)


def qber_mu(model: ChannelModel, eta: float, mu: float) -> float:
    """QBER E_mu of intensity mu: the photon-number average of e_n weighted by Y_n p_n."""
    if mu < 0.0:
        raise ValueError(f"mu={mu!r} must be >= 0")
    eta = check_probability(eta, "eta")
    q = gain(model, eta, mu)
    if q == 0.0:
        raise ZeroDivisionError("Q_mu = 0: QBER undefined")
    qe = error_gain_series(model, eta, mu)
    if __debug__:
        qe_closed = float(error_gain_closed(model, eta, mu))
        assert abs(qe - qe_closed) <= SERIES_CHECK_TOL, (qe, qe_closed)
    return clamp_probability(qe / q)


def intensity_statistics(model: ChannelModel, eta: float, mu: float) -> IntensityStatistics:
    return IntensityStatistics(mu=float(mu), gain=gain(model, eta, mu), qber=qber_mu(model, eta, mu))
