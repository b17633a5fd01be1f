"""Single-photon estimation from intensity-level measurements.

Three estimators share the same output type:

* ``invert_yields`` solves the truncated linear system linking gains (and
  error gains) at many intensities to the photon-number yields;
* ``vacuum_weak_bound`` gives a lower bound on Y_1 and an upper bound on e_1
  from a vacuum, a weak decoy and a signal intensity;
* ``worst_case_omega`` is the pessimistic single-photon fraction obtained by
  crediting every multi-photon pulse to the eavesdropper.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import channel
from .errors import (
    IllConditionedError,
    InfeasibleRecordsError,
    InsufficientRecordsError,
    ParseError,
)
from .qkdmath import check_probability

RECORDS_HEADER = ("mu", "gain", "qber")
# scan CSVs name the same quantities q_mu and e_mu
COLUMN_ALIASES = {"gain": "q_mu", "qber": "e_mu"}
DEFAULT_N_MAX = 6
DEFAULT_COND_CAP = 1e12
# small decoy grid; n_max = 6 interpolates it exactly
DEFAULT_DECOY_GRID = (0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06)
MIN_YIELD = 1e-12
UNINFORMATIVE_QBER = 0.5


class EstimateMethod(str, enum.Enum):
    EXACT = "exact-model"
    GRID = "grid-inversion"
    VACUUM_WEAK = "vacuum-weak-bound"
    GLLP = "gllp-worst-case"


@dataclass(frozen=True)
class MeasurementRecord:
    mu: float
    gain: float
    qber: float

    def __post_init__(self):
        if not self.mu >= 0.0:
            raise ValueError(f"mu={self.mu!r} must be >= 0")
        check_probability(self.gain, "gain")
        check_probability(self.qber, "qber")


@dataclass(frozen=True)
class SinglePhotonEstimate:
    """Single-photon yield and error rate, estimated or bounded.

    For ``gllp-worst-case`` only ``omega_bound`` is set.
    """

    method: EstimateMethod
    y0: Optional[float] = None
    y1: Optional[float] = None
    e1: Optional[float] = None
    omega_bound: Optional[float] = None
    yields: tuple[float, ...] = ()
    errors: tuple[float, ...] = ()

    def q1(self, mu: float) -> float:
        """Gain from single-photon pulses, Y_1 mu exp(-mu)."""
        if self.y1 is None:
            raise ValueError(f"{self.method.value} estimate carries no Y_1")
        return self.y1 * mu * math.exp(-mu)

    def omega(self, mu: float, gain: float) -> float:
        """Fraction of detections that came from single-photon pulses."""
        if self.y1 is None:
            if self.omega_bound is None:
                raise ValueError("estimate carries neither Y_1 nor a bound on omega")
            return self.omega_bound
        if gain <= 0.0:
            raise ZeroDivisionError("gain must be > 0")
        return self.q1(mu) / gain


def exact_estimate(model: channel.ChannelModel, eta: float) -> SinglePhotonEstimate:
    """Read Y_0, Y_1, e_1 straight off the forward model (the infinite-decoy limit)."""
    return SinglePhotonEstimate(
        method=EstimateMethod.EXACT,
        y0=model.y0,
        y1=channel.yield_n(model, eta, 1),
        e1=channel.qber_n(model, eta, 1),
    )


def simulate_records(
    model: channel.ChannelModel,
    eta: float,
    mus: Sequence[float],
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> list[MeasurementRecord]:
    """Noiseless (mu, Q_mu, E_mu) records from the forward model.

    ``noise`` > 0 applies a relative Gaussian perturbation to gain and QBER,
    for robustness experiments only; perturbed records carry no security claim.
    """
    mus = [float(m) for m in mus]
    if not mus:
        raise ValueError("need at least one intensity")
    if len(set(mus)) != len(mus):
        raise ValueError("intensities must be distinct")
    if noise and rng is None:
        rng = np.random.default_rng()
    records = []
    for mu in mus:
        q = channel.gain(model, eta, mu)
        e = channel.qber_mu(model, eta, mu)
        if noise:
            q = min(1.0, max(0.0, q * (1.0 + noise * rng.standard_normal())))
            e = min(1.0, max(0.0, e * (1.0 + noise * rng.standard_normal())))
        records.append(MeasurementRecord(mu=mu, gain=q, qber=e))
    return records


def _check_distinct(records: Sequence[MeasurementRecord]) -> None:
    mus = [r.mu for r in records]
    if len(set(mus)) != len(mus):
        raise ValueError("record intensities must be distinct")


def invert_yields(
    records: Sequence[MeasurementRecord],
    n_max: int = DEFAULT_N_MAX,
    cond_cap: float = DEFAULT_COND_CAP,
) -> SinglePhotonEstimate:
    """Least-squares inversion for Y_0..Y_nmax and e_0..e_nmax.

    Solves Q_i exp(mu_i) = sum_n Y_n mu_i^n / n! and the analogous system for
    the products Y_n e_n. Columns are scaled to unit norm before solving; the
    condition number of the scaled matrix is what ``cond_cap`` limits.
    Truncating the photon-number sum is the only approximation, so small
    intensities (where the dropped terms are tiny) recover Y_1 best.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if len(records) < n_max + 1:
        raise InsufficientRecordsError(
            f"{len(records)} records cannot determine {n_max + 1} yields (need n_max + 1)"
        )
    _check_distinct(records)

    mus = np.array([r.mu for r in records])
    q = np.array([r.gain for r in records])
    e = np.array([r.qber for r in records])
    a = np.array([[m**n / math.factorial(n) for n in range(n_max + 1)] for m in mus])
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0.0):
        raise IllConditionedError("intensity grid leaves some photon numbers unconstrained")
    a_scaled = a / norms
    cond = np.linalg.cond(a_scaled)
    if not cond <= cond_cap:
        raise IllConditionedError(f"condition number {cond:.3g} exceeds cap {cond_cap:.3g}")

    rhs = np.column_stack([q * np.exp(mus), q * e * np.exp(mus)])
    sol, *_ = np.linalg.lstsq(a_scaled, rhs, rcond=None)
    sol = sol / norms[:, None]
    yields = np.clip(sol[:, 0], 0.0, 1.0)
    products = np.clip(sol[:, 1], 0.0, 1.0)

    errors = []
    for y, z in zip(yields, products):
        errors.append(UNINFORMATIVE_QBER if y < MIN_YIELD else min(1.0, z / y))

    return SinglePhotonEstimate(
        method=EstimateMethod.GRID,
        y0=float(yields[0]),
        y1=float(yields[1]) if n_max >= 1 else None,
        e1=float(errors[1]) if n_max >= 1 else None,
        yields=tuple(float(y) for y in yields),
        errors=tuple(float(x) for x in errors),
    )


def vacuum_weak_bound(
    vacuum: MeasurementRecord,
    weak: MeasurementRecord,
    signal: MeasurementRecord,
) -> SinglePhotonEstimate:
    """Lower bound on Y_1 and upper bound on e_1 from three intensities.

    With g(x) = Q_x exp(x) = sum_n Y_n x^n / n! and weak < signal,

        g(weak) - g(signal) weak^2/signal^2
            = Y_1 (weak - weak^2/signal) + Y_0 (1 - weak^2/signal^2)
              - sum_{n>=3} Y_n (signal^{n-2} weak^2 - weak^n) / n!

    and every term of the final sum is nonnegative, so dropping it bounds Y_1
    from below using only Y_n >= 0 (no truncation). The error gain of the
    weak decoy, with the vacuum contribution removed, caps Y_1 e_1.
    """
    if vacuum.mu != 0.0:
        raise ValueError("vacuum record must have mu = 0")
    nu, mu = weak.mu, signal.mu
    if not 0.0 < nu < mu:
        raise ValueError(f"need 0 < weak mu < signal mu, got {nu} and {mu}")

    y0 = vacuum.gain
    z0 = vacuum.gain * vacuum.qber
    g_nu = weak.gain * math.exp(nu)
    g_mu = signal.gain * math.exp(mu)
    h_nu = weak.gain * weak.qber * math.exp(nu)
    h_mu = signal.gain * signal.qber * math.exp(mu)

    # Nonnegative power-series coefficients force g(x) >= g(0) and
    # (g(x) - g(0)) / x nondecreasing; same for the error gain h.
    for name, at0, at_nu, at_mu in (("gain", y0, g_nu, g_mu), ("error gain", z0, h_nu, h_mu)):
        if at_nu < at0 or at_mu < at0:
            raise InfeasibleRecordsError(f"{name}: decoy/signal below the vacuum contribution")
        if (at_mu - at0) / mu < (at_nu - at0) / nu:
            raise InfeasibleRecordsError(
                f"{name}: signal grows slower than the weak decoy; no nonnegative yields fit"
            )

    y1 = mu / (mu * nu - nu * nu) * (g_nu - g_mu * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0)
    y1 = min(1.0, max(0.0, y1))
    if y1 > 0.0:
        e1 = min(UNINFORMATIVE_QBER, max(0.0, (h_nu - z0) / (y1 * nu)))
    else:
        e1 = UNINFORMATIVE_QBER
    return SinglePhotonEstimate(method=EstimateMethod.VACUUM_WEAK, y0=y0, y1=y1, e1=e1)


def multi_photon_probability(mu: float) -> float:
    """P(n >= 2) = 1 - exp(-mu) - mu exp(-mu)."""
    if mu < 0.0:
        raise ValueError(f"mu={mu!r} must be >= 0")
    if mu < 0.1:
        # direct form cancels catastrophically for small mu
        term, total = mu * mu / 2.0, 0.0
        n = 2
        while term > 1e-18 * (total or 1.0):
            total += term
            n += 1
            term *= mu / n
        return math.exp(-mu) * total
    return -math.expm1(-mu) - mu * math.exp(-mu)


def worst_case_omega(mu: float, gain: float) -> SinglePhotonEstimate:
    """Single-photon fraction assuming every multi-photon pulse reached Bob."""
    if gain <= 0.0:
        raise ValueError("gain must be > 0")
    p_multi = multi_photon_probability(mu)
    omega = max(0.0, 1.0 - p_multi / gain)
    return SinglePhotonEstimate(method=EstimateMethod.GLLP, omega_bound=omega)


def estimate(
    records: Sequence[MeasurementRecord],
    method: EstimateMethod | str,
    n_max: int = DEFAULT_N_MAX,
    cond_cap: float = DEFAULT_COND_CAP,
) -> SinglePhotonEstimate:
    """Dispatch to an estimator by name; vacuum+weak picks mu = 0, the smallest
    positive intensity and the largest one."""
    method = EstimateMethod(method)
    if method is EstimateMethod.GRID:
        return invert_yields(records, n_max=n_max, cond_cap=cond_cap)
    if method is EstimateMethod.VACUUM_WEAK:
        _check_distinct(records)
        vac = [r for r in records if r.mu == 0.0]
        rest = sorted((r for r in records if r.mu > 0.0), key=lambda r: r.mu)
        if not vac or len(rest) < 2:
            raise InsufficientRecordsError("vacuum+weak needs a vacuum record and two positive intensities")
        return vacuum_weak_bound(vac[0], rest[0], rest[-1])
    raise ValueError(f"{method.value} is not a records-based estimator")


def format_records(records: Iterable[MeasurementRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORDS_HEADER)
    for r in records:
        writer.writerow([repr(r.mu), repr(r.gain), repr(r.qber)])
    return buf.getvalue()


def write_records(path, records: Iterable[MeasurementRecord]) -> None:
    Path(path).write_text(format_records(records))


def parse_records(text: str, path=None) -> list[MeasurementRecord]:
    """Parse ``mu,gain,qber`` CSV. Extra columns are ignored; ``q_mu``/``e_mu``
    are accepted for gain/qber so scan output can be read back."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty records file", path=path) from None
    try:
        cols = [header.index(name if name in header else COLUMN_ALIASES.get(name, name))
                for name in RECORDS_HEADER]
    except ValueError:
        raise ParseError(f"header must contain {','.join(RECORDS_HEADER)}", path=path, line=1) from None

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            mu, q, e = (float(row[i]) for i in cols)
            records.append(MeasurementRecord(mu=mu, gain=q, qber=e))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad record: {exc}", path=path, line=lineno) from None
    if not records:
        raise ParseError("no records", path=path)
    mus = [r.mu for r in records]
    if len(set(mus)) != len(mus):
        raise ParseError("duplicate intensities", path=path)
    return records


def read_records(path) -> list[MeasurementRecord]:
    return parse_records(Path(path).read_text(), path=path)
