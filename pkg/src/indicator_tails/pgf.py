"""Probability generating functions, exact real-rootedness, Bernoulli factors.

Realness of the roots is decided exactly with Sturm sequences over the
rationals. Floating point enters only afterwards, when the certified
isolating intervals are converted to success probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath

from .errors import PreconditionError
from .exact import ExactDistribution, to_fraction

REFINE_BITS = 120
WORKING_DPS = 50


@dataclass(frozen=True)
class RationalPolynomial:
    """Exact polynomial; ``coeffs[i]`` multiplies ``x**i``."""

    coeffs: tuple

    def __post_init__(self):
        c = [to_fraction(x) for x in self.coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c) if c else (Fraction(0),))

    @classmethod
    def from_roots(cls, roots, lead=1) -> "RationalPolynomial":
        out = cls((to_fraction(lead),))
        for r in roots:
            out = out * cls((-to_fraction(r), Fraction(1)))
        return out

    @property
    def degree(self) -> int:
        return -1 if self.is_zero() else len(self.coeffs) - 1

    @property
    def lead(self) -> Fraction:
        return self.coeffs[-1]

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def __call__(self, x):
        acc = 0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __mul__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return RationalPolynomial(tuple(out))

    def __sub__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        size = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (size - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (size - len(other.coeffs))
        return RationalPolynomial(tuple(x - y for x, y in zip(a, b)))

    def __neg__(self) -> "RationalPolynomial":
        return RationalPolynomial(tuple(-c for c in self.coeffs))

    def __eq__(self, other):
        return isinstance(other, RationalPolynomial) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def derivative(self) -> "RationalPolynomial":
        if len(self.coeffs) == 1:
            return RationalPolynomial((Fraction(0),))
        return RationalPolynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i))

    def divmod(self, other: "RationalPolynomial"):
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        quot = [Fraction(0)] * max(1, len(rem) - dq)
        lead = other.lead
        for i in range(len(rem) - 1, dq - 1, -1):
            coef = rem[i] / lead
            if coef:
                quot[i - dq] = coef
                for j, b in enumerate(other.coeffs):
                    rem[i - dq + j] -= coef * b
        return RationalPolynomial(tuple(quot)), RationalPolynomial(tuple(rem[:dq] or [0]))

    def monic(self) -> "RationalPolynomial":
        return RationalPolynomial(tuple(c / self.lead for c in self.coeffs))

    def primitive(self) -> "RationalPolynomial":
        """Integer coefficients with no common factor and a positive lead."""
        scale = math.lcm(*(c.denominator for c in self.coeffs))
        ints = [int(c * scale) for c in self.coeffs]
        g = math.gcd(*ints) or 1
        if ints[-1] < 0:
            g = -g
        return RationalPolynomial(tuple(Fraction(c // g) for c in ints))

    def shift_out_zero_roots(self):
        """Return ``(k, q)`` with ``self = x**k * q`` and ``q(0) != 0``."""
        k = 0
        while k < len(self.coeffs) - 1 and self.coeffs[k] == 0:
            k += 1
        return k, RationalPolynomial(self.coeffs[k:])

    def to_string(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            terms.append(str(c) if i == 0 else f"{c}*x" + (f"^{i}" if i > 1 else ""))
        return " + ".join(terms) or "0"


def poly_gcd(a: RationalPolynomial, b: RationalPolynomial) -> RationalPolynomial:
    while not b.is_zero():
        a, b = b, a.divmod(b)[1]
    return a.monic() if not a.is_zero() else a


def squarefree_factors(poly: RationalPolynomial) -> list:
    """Yun's algorithm: ``[(f_1, 1), (f_2, 2), ...]`` with ``poly ~ prod f_i^i``."""
    out = []
    d = poly.derivative()
    a0 = poly_gcd(poly, d)
    b = poly.divmod(a0)[0]
    c = d.divmod(a0)[0]
    dd = c - b.derivative()
    i = 1
    while b.degree > 0:
        a = poly_gcd(b, dd)
        if a.degree > 0:
            out.append((a.monic(), i))
        b = b.divmod(a)[0]
        c = dd.divmod(a)[0]
        dd = c - b.derivative()
        i += 1
    return out


def sturm_chain(poly: RationalPolynomial) -> list:
    chain = [poly, poly.derivative()]
    while not chain[-1].is_zero() and chain[-1].degree > 0:
        rem = chain[-2].divmod(chain[-1])[1]
        if rem.is_zero():
            break
        chain.append(-rem)
    return [p for p in chain if not p.is_zero()]


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _variations(signs) -> int:
    signs = [s for s in signs if s]
    return sum(1 for u, v in zip(signs, signs[1:]) if u != v)


def sign_changes_at(chain, x) -> int:
    return _variations(_sign(p(x)) for p in chain)


def sign_changes_at_infinity(chain, positive: bool) -> int:
    signs = []
    for p in chain:
        s = _sign(p.lead)
        if not positive and p.degree % 2:
            s = -s
        signs.append(s)
    return _variations(signs)


def cauchy_bound(poly: RationalPolynomial) -> Fraction:
    lead = abs(poly.lead)
    return 1 + max((abs(c) / lead for c in poly.coeffs[:-1]), default=Fraction(0))


def isolate_real_roots(poly: RationalPolynomial) -> list:
    """Disjoint intervals ``(lo, hi]``, each holding exactly one distinct real root.

    An interval with ``lo == hi`` is an exact rational root.
    """
    sqf = poly.divmod(poly_gcd(poly, poly.derivative()))[0] if poly.degree > 1 else poly
    if sqf.degree < 1:
        return []
    chain = sturm_chain(sqf)
    bound = cauchy_bound(sqf)
    lo, hi = -bound, bound
    out = []
    stack = [(lo, hi, sign_changes_at(chain, lo), sign_changes_at(chain, hi))]
    while stack:
        a, b, va, vb = stack.pop()
        count = va - vb
        if count == 0:
            continue
        if count == 1:
            out.append((b, b) if sqf(b) == 0 else (a, b))
            continue
        mid = (a + b) / 2
        vm = sign_changes_at(chain, mid)
        stack.append((mid, b, vm, vb))
        stack.append((a, mid, va, vm))
    return sorted(out)


def refine_root(poly: RationalPolynomial, interval, bits: int = REFINE_BITS):
    """Shrink an isolating interval of a squarefree ``poly`` below ``2**-bits``."""
    a, b = interval
    if a == b:
        return a, b
    chain = sturm_chain(poly)
    va, vb = sign_changes_at(chain, a), sign_changes_at(chain, b)
    width = Fraction(1, 1 << bits)
    while b - a > width:
        mid = (a + b) / 2
        if poly(mid) == 0:
            return mid, mid
        vm = sign_changes_at(chain, mid)
        if va - vm == 1:
            b, vb = mid, vm
        else:
            a, va = mid, vm
    return a, b


@dataclass(frozen=True)
class RootCertificate:
    """Outcome of the exact real-rootedness decision."""

    real_rooted: bool
    degree: int
    zero_roots: int
    real_roots: int
    nonreal_roots: int
    sign_changes_neg_inf: int
    sign_changes_pos_inf: int
    isolating_intervals: tuple
    nonreal_factor: Optional[RationalPolynomial] = None
    discriminant: Optional[Fraction] = None
    factors: tuple = field(default=(), repr=False)

    def __bool__(self):
        return self.real_rooted

    def as_dict(self) -> dict:
        out = {
            "real_rooted": self.real_rooted,
            "degree": self.degree,
            "zero_roots": self.zero_roots,
            "real_roots_with_multiplicity": self.real_roots,
            "nonreal_roots": self.nonreal_roots,
            "sturm_sign_changes": [self.sign_changes_neg_inf, self.sign_changes_pos_inf],
            "isolating_intervals": [[str(a), str(b)] for a, b in self.isolating_intervals],
        }
        if self.nonreal_factor is not None:
            out["nonreal_factor"] = self.nonreal_factor.to_string()
        if self.discriminant is not None:
            out["discriminant"] = str(self.discriminant)
        return out


def pgf_of(dist: ExactDistribution) -> RationalPolynomial:
    """The PGF ``E x^X`` of an exact distribution on nonnegative integers."""
    if not dist.exact:
        raise PreconditionError("PGFs are built from exact (rational) distributions")
    if dist.offset < 0:
        raise PreconditionError("PGF needs nonnegative support")
    return RationalPolynomial((Fraction(0),) * dist.offset + tuple(dist.probs))


def is_real_rooted(poly: RationalPolynomial) -> RootCertificate:
    """Decide whether every root of ``poly`` is real, exactly over Q."""
    if poly.is_zero():
        raise PreconditionError("the zero polynomial has no root structure")
    zeros, rest = poly.shift_out_zero_roots()
    factors = squarefree_factors(rest) if rest.degree > 0 else []
    total_real = zeros
    intervals = []
    nonreal_factor = None
    for f, mult in factors:
        chain = sturm_chain(f)
        v_neg = sign_changes_at_infinity(chain, positive=False)
        v_pos = sign_changes_at_infinity(chain, positive=True)
        distinct = v_neg - v_pos
        total_real += mult * distinct
        if distinct < f.degree and nonreal_factor is None:
            nonreal_factor = f.primitive()
        intervals.extend(isolate_real_roots(f))
    sqf = rest.divmod(poly_gcd(rest, rest.derivative()))[0] if rest.degree > 1 else rest
    chain = sturm_chain(sqf) if sqf.degree > 0 else [sqf]
    disc = None
    if nonreal_factor is not None and nonreal_factor.degree == 2:
        c0, c1, c2 = nonreal_factor.coeffs
        disc = c1 * c1 - 4 * c0 * c2
    return RootCertificate(
        real_rooted=total_real == poly.degree,
        degree=poly.degree,
        zero_roots=zeros,
        real_roots=total_real,
        nonreal_roots=poly.degree - total_real,
        sign_changes_neg_inf=sign_changes_at_infinity(chain, positive=False),
        sign_changes_pos_inf=sign_changes_at_infinity(chain, positive=True),
        isolating_intervals=tuple(sorted(intervals)),
        nonreal_factor=nonreal_factor,
        discriminant=disc,
        factors=tuple(factors),
    )


@dataclass(frozen=True)
class BernoulliDecomposition:
    """``poly = prod (1 - p_i + p_i x)``; deterministic ones are the zero roots."""

    probabilities: tuple
    zero_roots: int
    residual: mpmath.mpf
    mean: mpmath.mpf
    variance: mpmath.mpf
    certificate: RootCertificate

    def as_floats(self) -> list:
        return [float(p) for p in self.probabilities]

    def as_dict(self) -> dict:
        with mpmath.workdps(WORKING_DPS):
            return self._as_dict()

    def _as_dict(self) -> dict:
        return {
            "probabilities": [mpmath.nstr(p, 30) for p in self.probabilities],
            "zero_roots": self.zero_roots,
            "sum_p": mpmath.nstr(mpmath.fsum(self.probabilities), 30),
            "sum_pq": mpmath.nstr(mpmath.fsum(p * (1 - p) for p in self.probabilities), 30),
            "mean": mpmath.nstr(self.mean, 30),
            "variance": mpmath.nstr(self.variance, 30),
            "residual": mpmath.nstr(self.residual, 5),
        }


def _pgf_moments(poly: RationalPolynomial):
    d1 = poly.derivative()
    d2 = d1.derivative()
    mean = d1(Fraction(1))
    return mean, d2(Fraction(1)) + mean - mean * mean


def bernoulli_decomposition(poly: RationalPolynomial) -> BernoulliDecomposition:
    """Write a real-rooted PGF as a product of Bernoulli PGFs.

    Each negative root ``r`` contributes ``p = 1/(1 - r)``; each root at
    zero contributes a deterministic component ``p = 1``.
    """
    if any(c < 0 for c in poly.coeffs) or sum(poly.coeffs) != 1:
        raise PreconditionError("input is not a PGF (nonnegative coefficients summing to 1)")
    cert = is_real_rooted(poly)
    if not cert.real_rooted:
        raise PreconditionError(
            f"PGF has {cert.nonreal_roots} non-real roots; no independent-indicator decomposition"
        )
    with mpmath.workdps(WORKING_DPS):
        probs = [mpmath.mpf(1)] * cert.zero_roots
        for f, mult in cert.factors:
            for interval in isolate_real_roots(f):
                a, b = refine_root(f, interval)
                root = (mpmath.mpf(a.numerator) / a.denominator + mpmath.mpf(b.numerator) / b.denominator) / 2
                probs.extend([1 / (1 - root)] * mult)
        probs.sort()
        rebuilt = [mpmath.mpf(1)]
        for p in probs:
            nxt = [mpmath.mpf(0)] * (len(rebuilt) + 1)
            for i, c in enumerate(rebuilt):
                nxt[i] += c * (1 - p)
                nxt[i + 1] += c * p
            rebuilt = nxt
        target = [mpmath.mpf(c.numerator) / c.denominator for c in poly.coeffs]
        size = max(len(rebuilt), len(target))
        rebuilt += [mpmath.mpf(0)] * (size - len(rebuilt))
        target += [mpmath.mpf(0)] * (size - len(target))
        residual = max(abs(x - y) for x, y in zip(rebuilt, target))
        mean, var = _pgf_moments(poly)
        return BernoulliDecomposition(
            probabilities=tuple(probs),
            zero_roots=cert.zero_roots,
            residual=residual,
            mean=mpmath.mpf(mean.numerator) / mean.denominator,
            variance=mpmath.mpf(var.numerator) / var.denominator,
            certificate=cert,
        )
