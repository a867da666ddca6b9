"""Closed-form tail bounds for sums of indicators, evaluated in log domain.

Every bound is identified by its catalog id (``"1.2"``, ``"1.4a"``,
``"1.13"``, ...). Values are natural logs of the bound and are never
clamped to 0, so a relaxation that exceeds probability one shows up as a
positive ``log_value``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import (
    DomainError,
    PreconditionError,
    SideMismatchError,
    UnsupportedSpecError,
)
from .exact import to_fraction

SIDES = ("upper", "lower")

# bound id -> sides it applies to
CHERNOFF_IDS = {"1.2": ("upper",), "1.3": ("lower",)}
BINOMIAL_TYPE_IDS = {
    "1.4a": ("upper",), "1.4b": ("upper",), "1.4c": ("upper",),
    "1.5": ("upper",),
    "1.6a": ("upper",), "1.6b": ("upper",),
    "1.7a": ("lower",), "1.7b": ("lower",), "1.7c": ("lower",),
    "1.8": ("lower",),
    "1.9": ("lower",),
    "1.10": ("lower",),
}
VARIANCE_AWARE_IDS = {
    "1.13": SIDES, "1.14a": SIDES, "1.14b": SIDES, "1.15": SIDES,
    "1.16": ("lower",),
}
LOWER_TAIL_IDS = {"3.8": ("lower",)}
CATALOG = {**CHERNOFF_IDS, **BINOMIAL_TYPE_IDS, **VARIANCE_AWARE_IDS, **LOWER_TAIL_IDS}

# binomial-type bounds that only use lambda = np (valid for Poisson too)
LAMBDA_ONLY_IDS = frozenset({"1.5", "1.6a", "1.6b", "1.8", "1.9"})
# polynomial relaxations whose exponent turns upward past a = 2*scale
RELAXATION_IDS = frozenset({"1.4c", "1.6b", "1.7c", "1.14b"})


@dataclass(frozen=True)
class IndicatorSumSpec:
    """Describes ``X = I_1 + ... + I_n`` by parameters or by moments.

    ``kind`` is one of ``homogeneous``, ``heterogeneous``, ``moments`` or
    ``poisson`` (the n -> infinity limit with ``sigma2 = lambda``).
    """

    kind: str
    n: Optional[int] = None
    p: Optional[Fraction] = None
    ps: tuple = ()
    lam_: Optional[Fraction] = None
    sigma2_: Optional[Fraction] = None
    label: str = field(default="", compare=False)

    @classmethod
    def homogeneous(cls, n: int, p) -> "IndicatorSumSpec":
        p = to_fraction(p)
        if n < 1:
            raise DomainError("n must be a positive integer")
        if not 0 <= p <= 1:
            raise DomainError(f"p={p} outside [0, 1]")
        return cls("homogeneous", n=int(n), p=p)

    @classmethod
    def heterogeneous(cls, ps: Sequence) -> "IndicatorSumSpec":
        ps = tuple(to_fraction(p) for p in ps)
        if not ps:
            raise DomainError("heterogeneous spec needs at least one p_i")
        if any(not 0 <= p <= 1 for p in ps):
            raise DomainError("every p_i must lie in [0, 1]")
        return cls("heterogeneous", n=len(ps), ps=ps)

    @classmethod
    def moments(cls, lam, sigma2, n: Optional[int] = None) -> "IndicatorSumSpec":
        lam, sigma2 = to_fraction(lam), to_fraction(sigma2)
        if lam < 0 or sigma2 < 0:
            raise DomainError("lambda and sigma2 must be nonnegative")
        if not (sigma2 < lam or sigma2 == lam == 0):
            raise DomainError("moments spec needs sigma2 < lambda")
        if n is not None:
            if n < 1:
                raise DomainError("n must be a positive integer")
            if lam > n:
                raise DomainError("lambda exceeds n")
            if sigma2 > lam - lam * lam / n:
                raise DomainError("sigma2 exceeds lambda - lambda^2/n")
        return cls("moments", n=n, lam_=lam, sigma2_=sigma2)

    @classmethod
    def poisson(cls, lam) -> "IndicatorSumSpec":
        lam = to_fraction(lam)
        if lam <= 0:
            raise DomainError("Poisson mean must be positive")
        return cls("poisson", lam_=lam, sigma2_=lam)

    @property
    def lam(self) -> Fraction:
        if self.kind == "homogeneous":
            return self.n * self.p
        if self.kind == "heterogeneous":
            return sum(self.ps, Fraction(0))
        return self.lam_

    @property
    def sigma2(self) -> Fraction:
        if self.kind == "homogeneous":
            return self.n * self.p * (1 - self.p)
        if self.kind == "heterogeneous":
            return sum((p * (1 - p) for p in self.ps), Fraction(0))
        return self.sigma2_

    @property
    def mean_p(self) -> Fraction:
        if self.n is None:
            raise UnsupportedSpecError(f"{self.kind} spec has no n")
        return self.lam / self.n

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.label:
            out["label"] = self.label
        if self.n is not None:
            out["n"] = self.n
        if self.kind == "homogeneous":
            out["p"] = str(self.p)
        if self.kind == "heterogeneous":
            out["ps"] = [str(p) for p in self.ps]
        out["lambda"] = str(self.lam)
        out["sigma2"] = str(self.sigma2)
        return out


@dataclass(frozen=True)
class TailQuery:
    side: str
    a: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise DomainError(f"side must be 'upper' or 'lower', got {self.side!r}")
        if not self.a >= 0:
            raise DomainError(f"deviation a={self.a} must be nonnegative")


@dataclass(frozen=True)
class LogBound:
    log_value: float
    bound_id: str
    in_validity_domain: bool = True

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709 else math.inf

    def clamped_value(self) -> float:
        return min(1.0, self.value)


def _h_series(y: float) -> float:
    # sum_{k>=2} (-1)^k y^k / (k(k-1)), |y| <= 1/4
    total, power = 0.0, y
    for k in range(2, 40):
        power *= y
        term = power / (k * (k - 1))
        total += -term if k % 2 else term
        if abs(term) < 1e-19 * abs(total):
            break
    return total


def h_ext(y: float) -> float:
    """``(1+y)ln(1+y) - y`` on ``[-1, inf)`` with ``0 ln 0 = 0``."""
    if y < -1:
        raise DomainError(f"h is undefined at {y} < -1")
    if y == -1:
        return 1.0
    if math.isinf(y):
        return math.inf
    if abs(y) <= 0.25:
        return _h_series(y)
    return (1.0 + y) * math.log1p(y) - y


def h(y: float) -> float:
    """Bennett's function ``(1+y)ln(1+y) - y`` for ``y >= 0``."""
    if not y >= 0:
        raise DomainError(f"h(y) requires y >= 0, got {y}")
    return h_ext(y)


def scaled_h(scale: float, a: float) -> float:
    """``scale * h(a/scale)``, extended to ``scale = 0`` by its limit."""
    if scale == 0:
        if a == 0:
            return 0.0
        if a > 0:
            return math.inf
        raise DomainError("negative deviation against zero scale")
    return scale * h_ext(a / scale)


def _need_n(spec: IndicatorSumSpec, bound_id: str) -> int:
    if spec.n is None:
        raise UnsupportedSpecError(f"bound {bound_id} needs n; {spec.kind} spec has none")
    return spec.n


def _check_side(bound_id: str, q: TailQuery, table: dict):
    if bound_id not in table:
        raise DomainError(f"unknown bound id {bound_id!r}")
    if q.side not in table[bound_id]:
        raise SideMismatchError(f"bound {bound_id} is for the {table[bound_id][0]} tail")


def _zero_deviation(q: TailQuery) -> bool:
    return q.a == 0


def binomial_chernoff(spec: IndicatorSumSpec, q: TailQuery) -> LogBound:
    """The optimized binomial Chernoff exponent ``1.2`` or its mirror ``1.3``.

    Outside ``0 <= a <= n - lambda`` (upper) or ``0 <= a <= lambda`` (lower)
    the tail is empty and the result is ``-inf`` flagged out of domain.
    """
    bound_id = "1.2" if q.side == "upper" else "1.3"
    if spec.kind == "poisson":
        raise UnsupportedSpecError("binomial Chernoff bound needs a finite n")
    n = _need_n(spec, bound_id)
    lam = float(spec.lam)
    rest = n - lam
    a = float(q.a)
    if a == 0:
        return LogBound(0.0, bound_id)
    head, tail = (lam, rest) if q.side == "upper" else (rest, lam)
    # upper: -lam*h(a/lam) - (n-lam)*h(-a/(n-lam)); lower swaps the roles
    exact_tail = n - spec.lam if q.side == "upper" else spec.lam
    if q.a > exact_tail:
        return LogBound(-math.inf, bound_id, in_validity_domain=False)
    a_in = min(a, tail)
    log_value = -scaled_h(head, a_in) - scaled_h(tail, -a_in) if tail > 0 else -scaled_h(head, a_in)
    return LogBound(log_value, bound_id)


def binomial_type_bound(spec: IndicatorSumSpec, q: TailQuery, bound_id: str) -> LogBound:
    """One of the binomial-type relaxations ``1.4`` to ``1.10``.

    Heterogeneous and moment specs use ``p = lambda/n``. Where a printed
    formula is undefined (the tail there is empty) the result is ``-inf``
    flagged out of domain.
    """
    _check_side(bound_id, q, BINOMIAL_TYPE_IDS)
    a = float(q.a)
    lam = float(spec.lam)
    if bound_id in LAMBDA_ONLY_IDS:
        if lam <= 0:
            raise PreconditionError(f"bound {bound_id} divides by lambda = 0")
        if a == 0:
            return LogBound(0.0, bound_id)
        if bound_id == "1.5":
            return LogBound(-scaled_h(lam, a), bound_id)
        if bound_id == "1.6a":
            return LogBound(-a * a / (2 * lam * (1 + a / (3 * lam))), bound_id)
        if bound_id == "1.6b":
            return LogBound(-(a * a / (2 * lam)) * (1 - a / (3 * lam)), bound_id)
        if bound_id == "1.8":
            if a > lam:
                return LogBound(-math.inf, bound_id, in_validity_domain=False)
            return LogBound(-scaled_h(lam, -a), bound_id)
        return LogBound(-a * a / (2 * lam), bound_id)  # 1.9

    n = _need_n(spec, bound_id)
    p = float(spec.mean_p)
    if not 0 < p < 1:
        raise PreconditionError(f"bound {bound_id} needs 0 < p < 1, got p={p}")
    pq = p * (1 - p)
    npq = n * pq
    skew = (1 - p) - p
    if bound_id == "1.10" and p > 0.5:
        raise PreconditionError("bound 1.10 requires p <= 1/2")
    if a == 0:
        return LogBound(0.0, bound_id)

    def quadratic(denominator):
        if denominator <= 0:
            return LogBound(-math.inf, bound_id, in_validity_domain=False)
        return LogBound(-a * a / (2 * denominator), bound_id)

    if bound_id == "1.4a":
        return quadratic(npq + a * skew / 3)
    if bound_id == "1.7a":
        return quadratic(npq - a * skew / 3)
    if bound_id in ("1.4b", "1.7b"):
        return quadratic(npq + a / 3)
    if bound_id in ("1.4c", "1.7c"):
        return LogBound(-(a * a / (2 * npq)) * (1 - a / (3 * npq)), bound_id)
    return LogBound(-a * a / (2 * npq), bound_id)  # 1.10


def variance_aware_bound(
    spec: IndicatorSumSpec, q: TailQuery, bound_id: str, c: Optional[float] = None
) -> LogBound:
    """Bennett ``1.13``, Bernstein ``1.14``, the linear form ``1.15`` and ``1.16``.

    For ``1.15``, ``c`` defaults to ``a/sigma2``, the largest admissible value.
    """
    _check_side(bound_id, q, VARIANCE_AWARE_IDS)
    s2 = float(spec.sigma2)
    if not s2 > 0:
        raise PreconditionError("variance-aware bounds need sigma2 > 0")
    a = float(q.a)
    if bound_id == "1.15":
        if c is None:
            if a == 0:
                raise PreconditionError("bound 1.15 needs a > 0 (c = a/sigma2 must be positive)")
            c = a / s2
        if not c > 0:
            raise PreconditionError("bound 1.15 needs c > 0")
        if a < c * s2 * (1 - 1e-12):
            raise PreconditionError(f"bound 1.15 needs a >= c*sigma2 = {c * s2}")
        # ((1 + 1/c) ln(1+c) - 1) = h(c)/c
        return LogBound(-h(c) / c * a, bound_id)
    if bound_id == "1.16" and spec.sigma2 < spec.lam / 2:
        raise PreconditionError("bound 1.16 requires sigma2 >= lambda/2")
    if a == 0:
        return LogBound(0.0, bound_id)
    if bound_id == "1.13":
        return LogBound(-scaled_h(s2, a), bound_id)
    if bound_id == "1.14a":
        return LogBound(-(a * a / (2 * s2)) / (1 + a / (3 * s2)), bound_id)
    if bound_id == "1.14b":
        return LogBound(-(a * a / (2 * s2)) * (1 - a / (3 * s2)), bound_id)
    return LogBound(-a * a / (2 * s2), bound_id)  # 1.16


def catalog_bound(spec: IndicatorSumSpec, q: TailQuery, bound_id: str) -> LogBound:
    """Dispatch any catalog id, including the Chernoff pair and ``3.8``."""
    if bound_id not in CATALOG:
        raise DomainError(f"unknown bound id {bound_id!r}")
    if bound_id in CHERNOFF_IDS:
        _check_side(bound_id, q, CHERNOFF_IDS)
        return binomial_chernoff(spec, q)
    if bound_id in BINOMIAL_TYPE_IDS:
        return binomial_type_bound(spec, q, bound_id)
    if bound_id in VARIANCE_AWARE_IDS:
        return variance_aware_bound(spec, q, bound_id)
    from .chernoff import variance_lower_tail

    _check_side(bound_id, q, LOWER_TAIL_IDS)
    lam, s2 = float(spec.lam), float(spec.sigma2)
    if not 0 < s2 < lam:
        raise PreconditionError("bound 3.8 needs 0 < sigma2 < lambda")
    # compare exactly: float(lam) may round below a Fraction a == lam
    if q.a > spec.lam:
        return LogBound(-math.inf, bound_id, in_validity_domain=False)
    return variance_lower_tail(lam, s2, min(float(q.a), lam))


def applicable_bounds(spec: IndicatorSumSpec, side: str, variance_aware: bool = True) -> list:
    """Catalog ids whose preconditions the spec satisfies on ``side``.

    ``1.15`` is included; it is skipped at ``a = 0`` by the caller.
    """
    ids = []
    has_n = spec.n is not None
    lam, s2 = spec.lam, spec.sigma2
    for bound_id, sides in CATALOG.items():
        if side not in sides:
            continue
        if bound_id in CHERNOFF_IDS:
            if has_n and spec.kind != "poisson":
                ids.append(bound_id)
        elif bound_id in BINOMIAL_TYPE_IDS:
            if bound_id in LAMBDA_ONLY_IDS:
                if lam > 0:
                    ids.append(bound_id)
            elif has_n and 0 < spec.mean_p < 1:
                if bound_id == "1.10" and spec.mean_p > Fraction(1, 2):
                    continue
                ids.append(bound_id)
        elif not variance_aware or spec.kind == "poisson":
            continue
        elif bound_id in VARIANCE_AWARE_IDS:
            if s2 > 0 and not (bound_id == "1.16" and s2 < lam / 2):
                ids.append(bound_id)
        elif 0 < s2 < lam:
            ids.append(bound_id)
    return ids
