"""Scalar numerical primitives: binary entropy, Poisson weights, root and
maximum finding.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import NoSignChangeError

DEFAULT_TAIL_TOL = 1e-12
# e^{-mu} underflows to a subnormal past this point
MAX_POISSON_MU = 700.0

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def check_probability(value: float, name: str = "p") -> float:
    """Return ``value`` as a float, raising ``ValueError`` outside [0, 1]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}={value!r} must be in [0, 1]")
    return value


def clamp_probability(value: float, slack: float = 1e-12) -> float:
    """Clamp round-off excursions back into [0, 1].

    Excursions larger than ``slack`` indicate a real bug, not round-off.
    """
    assert -slack < value < 1.0 + slack, f"probability {value!r} out of range"
    return min(1.0, max(0.0, value))


def binary_entropy(p: float) -> float:
    """
    Binary Shannon entropy in bits, h(p) = -p log2 p - (1-p) log2 (1-p).

    h(0) = h(1) = 0 by continuity.

    Raises
    ------
    ValueError
        If p is not in [0, 1].

    Examples
    --------
    >>> binary_entropy(0.5)
    1.0
    >>> binary_entropy(0.0)
    0.0
    """
    p = check_probability(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@dataclass(frozen=True)
class PoissonWeights:
    """Truncated photon-number distribution of a phase-randomised coherent state."""

    mu: float
    n_max: int
    weights: tuple[float, ...]

    @property
    def tail(self) -> float:
        """Probability mass above ``n_max``."""
        return max(0.0, 1.0 - math.fsum(self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, n: int) -> float:
        return self.weights[n]


def poisson_weights(mu: float, tail_tol: float = DEFAULT_TAIL_TOL) -> PoissonWeights:
    """Poisson weights p_0..p_nmax, with n_max the smallest order leaving at most
    ``tail_tol`` of the mass untruncated.

    Uses the recurrence p_{n+1} = p_n * mu / (n + 1).
    """
    mu = float(mu)
    if mu < 0.0:
        raise ValueError(f"mu={mu!r} must be >= 0")
    if mu > MAX_POISSON_MU:
        raise ValueError(f"mu={mu!r} too large for double-precision weights")
    if tail_tol <= 0.0:
        raise ValueError(f"tail_tol={tail_tol!r} must be > 0")

    p = math.exp(-mu)
    weights = [p]
    n = 0
    while 1.0 - math.fsum(weights) > tail_tol:
        p *= mu / (n + 1)
        n += 1
        weights.append(p)
        # past the mode with nothing left to add: the deficit is round-off
        if n > mu and p < tail_tol * 1e-6:
            break
    return PoissonWeights(mu=mu, n_max=n, weights=tuple(weights))


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9) -> float:
    """Bisection root of ``f`` on [lo, hi].

    Returns the midpoint of the final bracket, whose width is at most ``tol``.
    An exact zero at either endpoint is returned as is.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NoSignChangeError(f"f has the same sign at {lo} ({flo:g}) and {hi} ({fhi:g})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0.0) == (flo < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-5
) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on [lo, hi]; returns ``(x, f(x))``.

    Deterministic: the same inputs always produce the same evaluation sequence.
    """
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        # >= keeps the left (smaller-x) point on ties
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)
