"""Numeric Chernoff optimization and the variance-aware MGF estimates.

The generic engine minimizes ``-s(lambda + a) + ln E e^{sX}`` over
``s >= 0`` with a derivative-free golden-section search. The
``(1 - t)``/``(1 + t)`` parametrized estimates are bridged into this
``s`` form by ``t = 1 - e^s`` (``s <= 0``) and ``t = e^s - 1`` (``s >= 0``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .bounds import LogBound, TailQuery, h_ext
from .errors import DomainError, NonConvexError, UnsupportedSpecError
from .exact import ExactDistribution

GOLDEN = (math.sqrt(5) - 1) / 2
S_CAP = 4096.0
WIDTH_TOL = 1e-12


@dataclass(frozen=True)
class MgfEvaluator:
    """``s -> ln E e^{sX}`` (or an upper bound on it) valid on ``[s_min, s_max]``.

    ``support_min``/``support_max`` are optional bounds on the range of X;
    when known they let the engine short-circuit empty tails.
    """

    log_mgf: Callable[[float], float]
    s_min: float = -math.inf
    s_max: float = math.inf
    support_min: Optional[float] = None
    support_max: Optional[float] = None
    name: str = "mgf"

    def __call__(self, s: float) -> float:
        if not self.s_min <= s <= self.s_max:
            raise DomainError(f"{self.name} evaluated at s={s} outside [{self.s_min}, {self.s_max}]")
        if s == 0:
            return 0.0
        return self.log_mgf(s)


def _log_bernoulli_mgf(p: float, s: float) -> float:
    # ln(q + p e^s), stable for large |s|
    if p == 0:
        return 0.0
    if p == 1:
        return s
    return _logaddexp(math.log1p(-p), math.log(p) + s)


def _logaddexp(x: float, y: float) -> float:
    top = max(x, y)
    return top + math.log1p(math.exp(-abs(x - y)))


def binomial_mgf(n: int, p) -> MgfEvaluator:
    p = float(p)
    lo, hi = (0, n) if 0 < p < 1 else ((n, n) if p == 1 else (0, 0))
    return MgfEvaluator(lambda s: n * _log_bernoulli_mgf(p, s), support_min=lo,
                        support_max=hi, name=f"Bi({n},{p})")


def product_mgf(ps: Sequence) -> MgfEvaluator:
    ps = [float(p) for p in ps]
    lo = sum(1 for p in ps if p == 1)
    hi = sum(1 for p in ps if p > 0)
    return MgfEvaluator(lambda s: math.fsum(_log_bernoulli_mgf(p, s) for p in ps),
                        support_min=lo, support_max=hi, name="product")


def distribution_mgf(dist: ExactDistribution) -> MgfEvaluator:
    return MgfEvaluator(dist.log_mgf, support_min=dist.support_min,
                        support_max=dist.support_max, name="exact")


def poisson_mgf(lam: float) -> MgfEvaluator:
    lam = float(lam)
    return MgfEvaluator(lambda s: lam * math.expm1(s) if s < 700 else math.inf,
                        support_min=0, name=f"Po({lam})")


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = WIDTH_TOL):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(argmin, min)``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        if b - a <= tol or c >= d:
            break
    candidates = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    best_val, best_x = min(candidates)
    return best_x, best_val


def _check_convex(f, hi: float, points: int = 24):
    step = hi / points
    vals = [f(i * step) for i in range(points + 1)]
    for i in range(1, points):
        second = vals[i - 1] - 2 * vals[i] + vals[i + 1]
        scale = 1.0 + abs(vals[i])
        if second < -1e-9 * scale:
            raise NonConvexError(
                f"second difference {second:.3g} < 0 at s={i * step:.6g}: evaluator is not convex"
            )


def minimize_exponent(f: Callable[[float], float], s_max: float = S_CAP):
    """Infimum over ``s >= 0`` of a convex ``f`` with ``f(0) = 0``.

    The bracket starts at ``[0, 1]`` and doubles while ``f`` keeps
    decreasing, up to ``s_max``.
    """
    s_max = min(s_max, S_CAP)
    if s_max <= 0:
        return 0.0, 0.0
    hi = min(1.0, s_max)
    while hi < s_max and f(min(2 * hi, s_max)) < f(hi):
        hi = min(2 * hi, s_max)
    right = min(2 * hi, s_max)
    _check_convex(f, right)
    s, val = golden_section(f, 0.0, right)
    return s, min(val, 0.0)


def generic_chernoff(mgf: MgfEvaluator, lam: float, q: TailQuery, bound_id: str = "1.1") -> LogBound:
    """Numerically optimized Chernoff bound for ``P(X >= lam + a)`` or ``P(X <= lam - a)``."""
    lam = float(lam)
    a = float(q.a)
    if a == 0:
        return LogBound(0.0, bound_id)
    lo, hi = mgf.support_min, mgf.support_max
    if lo is not None and hi is not None and lo == hi:
        # deterministic X: the tail is empty for every a > 0
        return LogBound(-math.inf, bound_id, in_validity_domain=False)
    if q.side == "upper":
        target = lam + a
        if hi is not None and target > hi + 1e-12 * max(1.0, abs(hi)):
            return LogBound(-math.inf, bound_id, in_validity_domain=False)
        s_max = mgf.s_max

        def f(s):
            return -s * target + mgf(s)
    else:
        target = lam - a
        if lo is not None and target < lo - 1e-12 * max(1.0, abs(lo)):
            return LogBound(-math.inf, bound_id, in_validity_domain=False)
        s_max = -mgf.s_min

        def f(s):
            return s * target + mgf(-s)

    if s_max <= 0:
        raise UnsupportedSpecError(f"{mgf.name} gives no estimate for the {q.side} tail")
    _, val = minimize_exponent(f, s_max)
    return LogBound(val, bound_id)


def _check_lower_mgf(lam: float, sigma2: float):
    if not 0 <= sigma2 < lam:
        raise DomainError(f"need 0 <= sigma2 < lambda, got lambda={lam}, sigma2={sigma2}")


def lower_log_mgf_bound(lam: float, sigma2: float, t: float) -> float:
    """Upper bound ``3.6`` on ``ln E (1-t)^X`` for ``0 <= t <= 1``."""
    lam, sigma2, t = float(lam), float(sigma2), float(t)
    if not 0 <= t <= 1:
        raise DomainError(f"t={t} outside [0, 1]")
    _check_lower_mgf(lam, sigma2)
    if t == 0:
        return 0.0
    inner = -t * (1 - sigma2 / lam)
    if inner <= -1:
        return -math.inf
    return lam * lam / (lam - sigma2) * math.log1p(inner)


def upper_log_mgf_bound(n: int, lam: float, sigma2: float, t: float) -> float:
    """Upper bound ``3.7`` on ``ln E (1+t)^X`` for ``t >= 0``."""
    lam, sigma2, t = float(lam), float(sigma2), float(t)
    if t < 0:
        raise DomainError(f"t={t} must be nonnegative")
    if not 0 <= lam <= n:
        raise DomainError("need 0 <= lambda <= n")
    rest = n - lam - sigma2
    if rest < -1e-12 * n or sigma2 < 0:
        raise DomainError("need sigma2 >= 0 and n - lambda - sigma2 >= 0")
    if t == 0:
        return 0.0
    if rest <= 1e-12 * n:
        # all p_i = 1 in the limit: X = n
        return n * math.log1p(t)
    alpha1 = (n - lam) ** 2 / rest
    x1 = sigma2 / (n - lam)
    return (n - alpha1) * math.log1p(t) + alpha1 * math.log1p(t * x1)


def lower_variance_mgf(lam: float, sigma2: float) -> MgfEvaluator:
    """``3.6`` in ``s`` form, valid for ``s <= 0`` via ``t = 1 - e^s``."""
    lam, sigma2 = float(lam), float(sigma2)
    _check_lower_mgf(lam, sigma2)
    return MgfEvaluator(lambda s: lower_log_mgf_bound(lam, sigma2, -math.expm1(s)),
                        s_max=0.0, support_min=0, name="3.6")


def upper_variance_mgf(n: int, lam: float, sigma2: float) -> MgfEvaluator:
    """``3.7`` in ``s`` form, valid for ``s >= 0`` via ``t = e^s - 1``."""
    upper_log_mgf_bound(n, lam, sigma2, 0.0)

    def log_mgf(s):
        if s > 30:
            # ln(1+t) = s exactly; ln(1 + t x1) via logaddexp
            rest = n - lam - sigma2
            if rest <= 1e-12 * n:
                return n * s
            alpha1 = (n - lam) ** 2 / rest
            x1 = sigma2 / (n - lam)
            return (n - alpha1) * s + alpha1 * _log_bernoulli_mgf(x1, s)
        return upper_log_mgf_bound(n, lam, sigma2, math.expm1(s))

    return MgfEvaluator(log_mgf, s_min=0.0, support_max=n, name="3.7")


def variance_aware_chernoff(lam, sigma2, q: TailQuery, n: Optional[int] = None,
                            route: str = "3.6") -> LogBound:
    """Chernoff bound built on ``3.6`` (``route='3.6'``) or ``3.7``.

    The side not covered directly by a route is reached through
    ``n - X``, which has mean ``n - lambda`` and the same variance.
    """
    lam, sigma2 = float(lam), float(sigma2)
    bound_id = "3.6-chernoff" if route == "3.6" else "3.7-chernoff"
    if route not in ("3.6", "3.7"):
        raise DomainError(f"unknown route {route!r}")
    direct = (route == "3.6") == (q.side == "lower")
    if not direct and n is None:
        raise UnsupportedSpecError(f"{bound_id} on the {q.side} tail needs n")
    mean = lam if direct else n - lam
    side = q.side if direct else ("lower" if q.side == "upper" else "upper")
    if route == "3.6":
        mgf = lower_variance_mgf(mean, sigma2)
    else:
        if n is None:
            raise UnsupportedSpecError("route 3.7 needs n")
        mgf = upper_variance_mgf(n, mean, sigma2)
    return generic_chernoff(mgf, mean, TailQuery(side, q.a), bound_id=bound_id)


def variance_lower_tail(lam: float, sigma2: float, a: float) -> LogBound:
    """The closed-form lower-tail bound ``3.8``, with ``0 ln 0 = 0`` at ``a = lam``.

    Evaluated as ``-K h(a/K) - lam h(-a/lam)`` with
    ``K = lam sigma2/(lam - sigma2)``, an exact rearrangement of the printed
    expression that avoids cancellation for small ``a``.
    """
    lam, sigma2, a = float(lam), float(sigma2), float(a)
    if not 0 < sigma2 < lam:
        raise DomainError("need 0 < sigma2 < lambda")
    if not 0 <= a <= lam:
        raise DomainError(f"a={a} outside [0, lambda={lam}]")
    if a == 0:
        return LogBound(0.0, "3.8")
    k = lam * sigma2 / (lam - sigma2)
    u = a * (lam - sigma2) / (sigma2 * lam)
    return LogBound(-k * h_ext(u) - lam * h_ext(-a / lam), "3.8")


def variance_lower_tail_optimum(lam: float, sigma2: float, a: float) -> float:
    return a / (a + sigma2 - a * sigma2 / lam)


def g(x: float, y: float) -> float:
    """Lower-tail exponent ``g(x, y)``, ``x = sigma2/lambda``, ``0 < x < 1``, ``0 <= y <= 1/x``.

    Computed as ``h(y(1-x))/(1-x) + h(-xy)/x``.
    """
    x, y = float(x), float(y)
    if not 0 < x < 1:
        raise DomainError(f"x={x} outside (0, 1)")
    if not 0 <= y <= 1 / x * (1 + 1e-15):
        raise DomainError(f"y={y} outside [0, 1/x]")
    xy = min(x * y, 1.0)
    return h_ext(y * (1 - x)) / (1 - x) + h_ext(-xy) / x


def g_half(y: float) -> float:
    """``g(1/2, y) = (2+y)ln(1+y/2) + (2-y)ln(1-y/2)`` for ``0 <= y <= 2``."""
    if not 0 <= y <= 2:
        raise DomainError("g(1/2, y) needs 0 <= y <= 2")
    second = 0.0 if y == 2 else (2 - y) * math.log1p(-y / 2)
    return (2 + y) * math.log1p(y / 2) + second


@dataclass(frozen=True)
class TwoPointReduction:
    """Moment-matched two-atom measures bracketing a measure on [0, 1].

    ``(m - alpha0) delta_0 + alpha0 delta_x0`` and
    ``(m - alpha1) delta_1 + alpha1 delta_x1`` share the total mass, first
    and second moments of the original measure.
    """

    m: object
    x0: object
    alpha0: object
    x1: object
    alpha1: object

    def lower_measure(self):
        return [(0, self.m - self.alpha0), (self.x0, self.alpha0)]

    def upper_measure(self):
        return [(1, self.m - self.alpha1), (self.x1, self.alpha1)]

    def sandwich(self, f: Callable[[float], float], atoms: Iterable):
        """``(lower, integral, upper)`` for ``f``; ordered when ``f''' >= 0``."""
        integral = math.fsum(float(w) * f(float(x)) for x, w in atoms)
        lower = math.fsum(float(w) * f(float(x)) for x, w in self.lower_measure())
        upper = math.fsum(float(w) * f(float(x)) for x, w in self.upper_measure())
        return lower, integral, upper


def _div0(num, den):
    if den == 0:
        return 0 * num
    if isinstance(num, int) and isinstance(den, int):
        return Fraction(num, den)
    return num / den


def two_point_reduction(mu) -> TwoPointReduction:
    """Reduce a finite point-mass measure on [0, 1] to its two-atom envelopes.

    ``mu`` is an iterable of ``(atom, mass)`` pairs or a mapping atom -> mass.
    Exact when given Fractions. Degenerate ratios follow ``0/0 = 0``.
    """
    atoms = list(mu.items()) if isinstance(mu, dict) else list(mu)
    for x, w in atoms:
        if not 0 <= x <= 1:
            raise DomainError(f"atom {x} outside [0, 1]")
        if w < 0:
            raise DomainError(f"negative mass {w}")
    m = sum(w for _, w in atoms)
    s1 = sum(w * x for x, w in atoms)
    s2 = sum(w * x * x for x, w in atoms)
    r1 = sum(w * (1 - x) for x, w in atoms)
    r2 = sum(w * (1 - x) ** 2 for x, w in atoms)
    return TwoPointReduction(
        m=m,
        x0=_div0(s2, s1),
        alpha0=_div0(s1 * s1, s2),
        x1=1 - _div0(r2, r1),
        alpha1=_div0(r1 * r1, r2),
    )
