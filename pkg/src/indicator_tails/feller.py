"""Cumulant-corrected tail bounds from Feller's expansion.

Only the first two expansion coefficients are computed; the tail bounds
are the two closed forms valid for ``sigma <= a <= sigma^2/24``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .bounds import LogBound
from .errors import DomainError, PreconditionError
from .exact import CumulantSet


@dataclass(frozen=True)
class FellerCoefficients:
    q1: float
    q2: float


def feller_coefficients(kappas: CumulantSet) -> FellerCoefficients:
    """``q1 = -k3/(3 s^3)`` and ``q2 = -k4/(12 s^4) + k3^2/(4 s^6)``."""
    k2 = float(kappas.kappa2)
    if not k2 > 0:
        raise DomainError("Feller coefficients need kappa2 > 0")
    k3, k4 = float(kappas.kappa3), float(kappas.kappa4)
    sigma = math.sqrt(k2)
    q1 = -k3 / (3 * sigma ** 3)
    q2 = -k4 / (12 * k2 ** 2) + k3 * k3 / (4 * k2 ** 3)
    return FellerCoefficients(q1, q2)


def feller_coefficients_from_moments(skewness: float, excess: float) -> FellerCoefficients:
    """The same coefficients written through skewness and excess kurtosis."""
    return FellerCoefficients(-skewness / 3, -excess / 12 + skewness * skewness / 4)


def in_feller_window(a: float, sigma: float) -> bool:
    return sigma <= a <= sigma * sigma / 24


def feller_upper_bound(a: float, sigma: float, kappa3: Optional[float] = None,
                       side: str = "upper") -> LogBound:
    """Bound ``1.20``, or ``1.23`` when ``kappa3`` is supplied.

    The lower tail reuses the formulas with the odd ``kappa3`` term negated.
    Raises ``PreconditionError`` outside ``sigma <= a <= sigma^2/24``.
    """
    a, sigma = float(a), float(sigma)
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if side not in ("upper", "lower"):
        raise DomainError(f"unknown side {side!r}")
    if not in_feller_window(a, sigma):
        raise PreconditionError(
            f"a={a} outside the window [sigma, sigma^2/24] = [{sigma}, {sigma * sigma / 24}]"
        )
    s2 = sigma * sigma
    lead = a * a / (2 * s2)
    if kappa3 is None:
        return LogBound(-lead * (1 - 24 / 7 * a / s2), "1.20")
    k3 = float(kappa3) if side == "upper" else -float(kappa3)
    return LogBound(-lead * (1 - 288 / 7 * a * a / (s2 * s2) - a * k3 / (3 * s2 * s2)), "1.23")
