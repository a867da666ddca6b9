"""Exact distributions, tails and cumulants for sums of independent indicators.

Rational arithmetic is the default; sums of more than ``EXACT_LIMIT``
indicators fall back to float64 with a per-entry relative error bound
stored on the distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

EXACT_LIMIT = 200
_UNIT_ROUNDOFF = 2.0 ** -53


def to_fraction(x) -> Fraction:
    """Convert ``x`` to a Fraction.

    Floats go through their shortest repr, so ``0.3`` becomes ``3/10``
    rather than the binary expansion of the double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise DomainError(f"cannot convert {x!r} to a fraction")
        return Fraction(repr(float(x)))
    return Fraction(str(x))


def log_fraction(x) -> float:
    """Natural log of a nonnegative rational without float underflow."""
    if x < 0:
        raise DomainError("log of a negative number")
    if x == 0:
        return -math.inf
    if not isinstance(x, Fraction):
        return math.log(x)
    f = float(x)
    if f > 1e-290:
        return math.log(f)
    return math.log(x.numerator) - math.log(x.denominator)


def _check_probability(p):
    if not 0 <= p <= 1:
        raise DomainError(f"probability {p} outside [0, 1]")


@dataclass(frozen=True)
class ExactDistribution:
    """Law of an integer random variable with finite support.

    ``probs[i]`` is ``P(X = offset + i)``. With ``exact`` set the entries are
    Fractions summing to exactly one; otherwise they are floats, each within
    relative error ``rel_error`` of the true value.
    """

    offset: int
    probs: tuple
    exact: bool = True
    rel_error: float = 0.0

    def __post_init__(self):
        if any(q < 0 for q in self.probs):
            raise DomainError("negative probability")
        total = sum(self.probs)
        if self.exact:
            if total != 1:
                raise DomainError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_mapping(cls, pmf: dict) -> "ExactDistribution":
        keys = [k for k, v in pmf.items() if v != 0]
        lo, hi = min(keys), max(keys)
        probs = tuple(to_fraction(pmf.get(k, 0)) for k in range(lo, hi + 1))
        return cls(lo, probs)

    @property
    def support_min(self) -> int:
        return self.offset

    @property
    def support_max(self) -> int:
        return self.offset + len(self.probs) - 1

    def pmf(self, k: int):
        i = k - self.offset
        if 0 <= i < len(self.probs):
            return self.probs[i]
        return Fraction(0) if self.exact else 0.0

    def items(self):
        return ((self.offset + i, q) for i, q in enumerate(self.probs))

    def as_dict(self) -> dict:
        return {k: q for k, q in self.items() if q != 0}

    def moment(self, order: int, center=0):
        return sum(q * (k - center) ** order for k, q in self.items())

    def mean(self):
        return self.moment(1)

    def variance(self):
        mu = self.mean()
        return self.moment(2, mu)

    def log_mgf(self, t: float) -> float:
        """``ln E e^{tX}`` evaluated with a log-sum-exp."""
        terms = [log_fraction(q) + t * k for k, q in self.items() if q != 0]
        top = max(terms)
        return top + math.log(math.fsum(math.exp(v - top) for v in terms))

    def tail(self, side: str, threshold):
        return exact_tail(self, side, threshold)

    def deviation_tail(self, side: str, a):
        """``P(X >= EX + a)`` (upper) or ``P(X <= EX - a)`` (lower)."""
        mu = self.mean()
        if self.exact:
            a = to_fraction(a)
        return exact_tail(self, side, mu + a if side == "upper" else mu - a)


def _integer_cut(threshold, side: str) -> int:
    """Smallest (upper) or largest (lower) integer inside the tail event."""
    if isinstance(threshold, (int, Fraction)):
        return math.ceil(threshold) if side == "upper" else math.floor(threshold)
    t = float(threshold)
    tol = 1e-9 * max(1.0, abs(t))
    # near-integer floats snap so the boundary mass is included
    if side == "upper":
        return math.ceil(t - tol)
    return math.floor(t + tol)


def exact_tail(dist: ExactDistribution, side: str, threshold):
    """Sum of the pmf over ``X >= threshold`` or ``X <= threshold``."""
    if side not in ("upper", "lower"):
        raise DomainError(f"unknown side {side!r}")
    cut = _integer_cut(threshold, side)
    zero = Fraction(0) if dist.exact else 0.0
    if side == "upper":
        terms = [q for k, q in dist.items() if k >= cut]
    else:
        terms = [q for k, q in dist.items() if k <= cut]
    if not terms:
        return zero
    return sum(terms, zero) if dist.exact else math.fsum(terms)


def binomial_distribution(n: int, p, exact: bool | None = None) -> ExactDistribution:
    """Law of Bi(n, p) via the multiplicative pmf recurrence."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if exact is None:
        exact = n <= EXACT_LIMIT
    if not exact:
        p = float(p)
        _check_probability(p)
        if p in (0.0, 1.0):
            return binomial_distribution(n, to_fraction(p), exact=True)
        k = np.arange(n + 1)
        logpmf = np.array(
            [math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) for j in k]
        ) + k * math.log(p) + (n - k) * math.log1p(-p)
        probs = np.exp(logpmf)
        probs /= probs.sum()
        rel = 64 * _UNIT_ROUNDOFF * (n + 1) * max(1.0, math.log(n + 1))
        return ExactDistribution(0, tuple(float(x) for x in probs), exact=False, rel_error=rel)
    p = to_fraction(p)
    _check_probability(p)
    if p == 1:
        return ExactDistribution(n, (Fraction(1),))
    if p == 0:
        return ExactDistribution(0, (Fraction(1),))
    q = 1 - p
    ratio = p / q
    probs = [q ** n]
    for k in range(n):
        probs.append(probs[-1] * ratio * (n - k) / (k + 1))
    return ExactDistribution(0, tuple(probs))


def poisson_binomial_distribution(ps: Sequence, exact: bool | None = None) -> ExactDistribution:
    """Law of a sum of independent Be(p_i) by sequential convolution."""
    ps = list(ps)
    if exact is None:
        exact = len(ps) <= EXACT_LIMIT
    if exact:
        probs = [Fraction(1)]
        for p in ps:
            p = to_fraction(p)
            _check_probability(p)
            q = 1 - p
            nxt = [x * q for x in probs] + [Fraction(0)]
            for i, x in enumerate(probs):
                nxt[i + 1] += x * p
            probs = nxt
        return _trimmed(0, probs, exact=True)
    vec = np.array([1.0])
    for p in ps:
        p = float(p)
        _check_probability(p)
        vec = np.convolve(vec, [1.0 - p, p])
    # every entry is a sum of products of nonnegative terms
    rel = 4 * _UNIT_ROUNDOFF * (len(ps) + 1)
    return _trimmed(0, [float(x) for x in vec], exact=False, rel_error=rel)


def _trimmed(offset, probs, exact=True, rel_error=0.0):
    lo = 0
    while lo < len(probs) - 1 and probs[lo] == 0:
        lo += 1
    hi = len(probs)
    while hi > lo + 1 and probs[hi - 1] == 0:
        hi -= 1
    return ExactDistribution(offset + lo, tuple(probs[lo:hi]), exact=exact, rel_error=rel_error)


def poisson_tail(lam: float, k: int) -> float:
    """``P(Po(lam) >= k)`` by upward summation.

    Summation stops once the geometric bound on the remaining terms drops
    below 1e-17, so the truncation error is well under 1e-15.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if k <= 0:
        return 1.0
    j = k
    term = math.exp(-lam + j * math.log(lam) - math.lgamma(j + 1))
    terms = [term]
    while True:
        ratio = lam / (j + 1)
        if ratio < 1 and term * ratio / (1 - ratio) < 1e-17:
            break
        j += 1
        term *= ratio
        terms.append(term)
    return min(1.0, math.fsum(terms))


@dataclass(frozen=True)
class CumulantSet:
    kappa1: object
    kappa2: object
    kappa3: object
    kappa4: object

    @property
    def skewness(self) -> float:
        return float(self.kappa3) / float(self.kappa2) ** 1.5

    @property
    def excess(self) -> float:
        return float(self.kappa4) / float(self.kappa2) ** 2


def cumulants(ps: Iterable) -> CumulantSet:
    """First four cumulants of a sum of independent Be(p_i).

    Exact when the p_i are rational; cumulants add over independent terms.
    """
    k1 = k2 = k3 = k4 = Fraction(0)
    for p in ps:
        p = to_fraction(p)
        _check_probability(p)
        pq = p * (1 - p)
        k1 += p
        k2 += pq
        k3 += pq * (1 - 2 * p)
        k4 += pq * (1 - 6 * pq)
    return CumulantSet(k1, k2, k3, k4)
