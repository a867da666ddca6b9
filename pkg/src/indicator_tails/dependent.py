"""Negatively related indicator families and their explicit couplings.

Covers the hypergeometric urn model, the occupancy (empty urns) model, the
binomial conditioned on a lower threshold and Barbour's three-point law.
Urn and indicator indices are 0-based.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterator, Optional

import numpy as np

from .errors import DomainError, PreconditionError, SearchExhaustedError
from .exact import ExactDistribution, binomial_distribution, to_fraction

MODEL_NAMES = ("hypergeometric", "occupancy", "conditioned-binomial", "barbour")
RESAMPLE_CAP = 10_000
DEFAULT_CHUNK = 100_000


@dataclass(frozen=True)
class DependentModel:
    """One of the negatively related families; ``params`` holds its integers.

    hypergeometric: ``N, m, n``; occupancy: ``n, m``; conditioned-binomial:
    ``n, p, k``; barbour: none.
    """

    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v, p = self.variant, self.params
        if v == "hypergeometric":
            N, m, n = p["N"], p["m"], p["n"]
            if min(N, m, n) < 1 or max(m, n) > N:
                raise DomainError("hypergeometric needs positive N, m, n with max(m, n) <= N")
        elif v == "occupancy":
            if p["n"] < 1 or p["m"] < 0:
                raise DomainError("occupancy needs n >= 1 and m >= 0")
        elif v == "conditioned-binomial":
            prob = to_fraction(p["p"])
            if not 0 < prob < 1:
                raise DomainError("conditioned binomial needs 0 < p < 1")
            if not 0 <= p["k"] <= p["n"]:
                raise DomainError("conditioned binomial needs 0 <= k <= n")
        elif v != "barbour":
            raise DomainError(f"unknown model {v!r}; expected one of {MODEL_NAMES}")

    @classmethod
    def hypergeometric(cls, N: int, m: int, n: int) -> "DependentModel":
        return cls("hypergeometric", {"N": N, "m": m, "n": n})

    @classmethod
    def occupancy(cls, n: int, m: int) -> "DependentModel":
        return cls("occupancy", {"n": n, "m": m})

    @classmethod
    def conditioned_binomial(cls, n: int, p, k: int) -> "DependentModel":
        return cls("conditioned-binomial", {"n": n, "p": to_fraction(p), "k": k})

    @classmethod
    def barbour(cls) -> "DependentModel":
        return cls("barbour", {})

    @classmethod
    def from_dict(cls, data: dict) -> "DependentModel":
        data = dict(data)
        name = data.pop("name", None) or data.pop("variant")
        if name == "conditioned-binomial" and "p" in data:
            data["p"] = to_fraction(data["p"])
        return cls(name, data)

    @property
    def n_indicators(self) -> int:
        if self.variant == "barbour":
            return 5
        return self.params["n"]

    def distribution(self) -> ExactDistribution:
        p = self.params
        if self.variant == "hypergeometric":
            return hypergeometric_distribution(p["N"], p["m"], p["n"])
        if self.variant == "occupancy":
            return occupancy_distribution(p["n"], p["m"])
        if self.variant == "conditioned-binomial":
            return conditioned_binomial(p["n"], p["p"], p["k"])
        return barbour_distribution()

    def describe(self) -> dict:
        out = {"model": self.variant}
        out.update({k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.params.items()})
        return out


def hypergeometric_distribution(N: int, m: int, n: int) -> ExactDistribution:
    """Number of the ``m`` balls landing in urns ``0..n-1`` out of ``N``."""
    if min(N, m, n) < 1 or max(m, n) > N:
        raise DomainError("hypergeometric needs positive N, m, n with max(m, n) <= N")
    total = comb(N, m)
    lo, hi = max(0, m + n - N), min(m, n)
    probs = tuple(Fraction(comb(n, k) * comb(N - n, m - k), total) for k in range(lo, hi + 1))
    return ExactDistribution(lo, probs)


def occupancy_distribution(n: int, m: int) -> ExactDistribution:
    """Number of empty urns after ``m`` uniform throws into ``n`` urns.

    Inclusion-exclusion over the set of urns forced empty.
    """
    if n < 1 or m < 0:
        raise DomainError("occupancy needs n >= 1 and m >= 0")
    pmf = {}
    for k in range(n + 1):
        s = sum(
            (-1) ** j * comb(n - k, j) * Fraction(n - k - j, n) ** m
            for j in range(n - k + 1)
        )
        pmf[k] = comb(n, k) * s
    return ExactDistribution.from_mapping(pmf)


def occupancy_moments(n: int, m: int):
    """Closed-form mean and variance of the number of empty urns."""
    one = Fraction(1)
    lam = n * (one - Fraction(1, n)) ** m
    sigma2 = lam + n * (n - 1) * (one - Fraction(2, n)) ** m - n * n * (one - Fraction(1, n)) ** (2 * m)
    return lam, sigma2


def conditioned_binomial(n: int, p, k: int) -> ExactDistribution:
    """Bi(n, p) conditioned on being at least ``k``."""
    p = to_fraction(p)
    if not 0 <= k <= n:
        raise DomainError("need 0 <= k <= n")
    base = binomial_distribution(n, p, exact=True)
    mass = base.tail("upper", k)
    if mass == 0:
        raise PreconditionError("conditioning event has probability zero")
    probs = tuple(base.pmf(i) / mass for i in range(k, n + 1))
    return ExactDistribution(k, probs)


def conditioned_ratio(n: int, p, k: int, i: int) -> Fraction:
    """Right-hand side ``(p/q)(n-k-i)/(k+i+1)`` of the successive pmf ratio."""
    p = to_fraction(p)
    return p / (1 - p) * Fraction(n - k - i, k + i + 1)


def barbour_distribution() -> ExactDistribution:
    return ExactDistribution(3, (Fraction(4, 13), Fraction(5, 13), Fraction(4, 13)))


def geometric_tail(r: float, x: float) -> float:
    """``P(Y > x)`` for ``P(Y = i) = (1-r) r^i``, ``i >= 0``."""
    if x < 0:
        return 1.0
    return r ** (math.floor(x) + 1)


@dataclass
class HeavyTailWitness:
    model: DependentModel
    epsilon: Fraction
    mean: Fraction
    variance: Fraction
    tail: Fraction
    target: float
    limit_ratio: Fraction
    log: list

    def as_dict(self) -> dict:
        return {
            **self.model.describe(),
            "epsilon": str(self.epsilon),
            "mean": str(self.mean),
            "variance": str(self.variance),
            "variance_float": float(self.variance),
            "tail": str(self.tail),
            "tail_float": float(self.tail),
            "target": self.target,
            "log_tail": math.log(self.tail),
            "log_target": math.log(self.target),
            "limit_ratio": str(self.limit_ratio),
            "schedule": self.log,
        }


def strict_deviation_tail(dist: ExactDistribution, alpha) -> tuple:
    """Exact ``P(X - EX > alpha*sigma)`` together with ``EX`` and ``Var X``.

    The irrational threshold is avoided by comparing squares:
    ``i - EX > 0`` and ``(i - EX)^2 > alpha^2 Var X``.
    """
    alpha = Fraction(alpha)
    mu = dist.mean()
    var = dist.variance()
    cut = alpha * alpha * var
    tail = sum((q for i, q in dist.items() if i > mu and (i - mu) ** 2 > cut), Fraction(0))
    return tail, mu, var


def find_heavy_tail_witness(alpha: float, c: float, A: float, p=Fraction(1, 2),
                     eps_start=Fraction(1, 5), max_halvings: int = 10,
                     n_start: int = 64, n_max: int = 1 << 14) -> HeavyTailWitness:
    """Search conditioned binomials for ``Var > A`` and ``P(X > EX + alpha sigma) > c e^-alpha``.

    ``epsilon`` halves from ``eps_start``; for each value ``n`` doubles from
    ``n_start`` until the first pmf ratio is within 1% of its limit ``r``,
    with ``k = floor(n(p + epsilon)) + 1``.
    """
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    if not 0 < c < math.exp(-1):
        raise PreconditionError("c must lie in (0, 1/e)")
    if not A < math.inf:
        raise PreconditionError("A must be finite")
    p = to_fraction(p)
    q = 1 - p
    target = c * math.exp(-alpha)
    log = []
    eps = to_fraction(eps_start)
    for _ in range(max_halvings + 1):
        if not 0 < eps < q:
            break
        r = p * (q - eps) / ((p + eps) * q)
        n = n_start
        while n <= n_max:
            k = math.floor(n * (p + eps)) + 1
            if k > n:
                n *= 2
                continue
            ratio = conditioned_ratio(n, p, k, 0)
            if abs(ratio - r) <= r / 100:
                break
            n *= 2
        else:
            log.append({"epsilon": str(eps), "n": None, "status": "ratio did not stabilize"})
            eps /= 2
            continue
        model = DependentModel.conditioned_binomial(n, p, k)
        tail, mu, var = strict_deviation_tail(model.distribution(), alpha)
        entry = {
            "epsilon": str(eps), "n": n, "k": k, "r": float(r),
            "variance": float(var), "tail": float(tail),
        }
        if var > A and tail > target:
            entry["status"] = "witness"
            log.append(entry)
            return HeavyTailWitness(model, eps, mu, var, tail, target, r, log)
        entry["status"] = "variance too small" if var <= A else "tail too small"
        log.append(entry)
        eps /= 2
    raise SearchExhaustedError("no witness within the search budget; enlarge it", log)


# couplings ----------------------------------------------------------------


@dataclass(frozen=True)
class CouplingSample:
    i_vector: tuple
    j_index: int
    j_vector: tuple

    def violations(self) -> int:
        bad = int(self.j_vector[self.j_index] != 1)
        bad += sum(1 for i, (x, y) in enumerate(zip(self.i_vector, self.j_vector))
                   if i != self.j_index and y > x)
        return bad


def _check_coupling(model: DependentModel, j: int):
    if model.variant not in ("hypergeometric", "occupancy"):
        raise DomainError("couplings exist for hypergeometric and occupancy models")
    n = model.n_indicators
    if not 0 <= j < n:
        raise DomainError(f"index j={j} outside 0..{n - 1}")
    if model.variant == "occupancy" and n == 1 and model.params["m"] > 0:
        raise PreconditionError("urn j cannot be empty when it is the only urn")


def coupling_sample(model: DependentModel, j: int, rng_seed) -> CouplingSample:
    """One joint draw of the indicators and their version conditioned on ``I_j = 1``."""
    _check_coupling(model, j)
    rng = np.random.default_rng(rng_seed)
    if model.variant == "hypergeometric":
        N, m, n = model.params["N"], model.params["m"], model.params["n"]
        balls = [int(u) for u in rng.choice(N, size=m, replace=False)]
        before = tuple(int(u in balls) for u in range(n))
        if j not in balls:
            balls[int(rng.integers(m))] = j
        after = tuple(int(u in balls) for u in range(n))
        return CouplingSample(before, j, after)
    n, m = model.params["n"], model.params["m"]
    balls = [int(u) for u in rng.integers(n, size=m)]
    counts = Counter(balls)
    before = tuple(int(counts[u] == 0) for u in range(n))
    for b, urn in enumerate(balls):
        tries = 0
        while urn == j:
            tries += 1
            if tries > RESAMPLE_CAP:
                raise RuntimeError("redistribution did not leave urn j after the resampling cap")
            urn = int(rng.integers(n))
        balls[b] = urn
    counts = Counter(balls)
    after = tuple(int(counts[u] == 0) for u in range(n))
    return CouplingSample(before, j, after)


def _batch_hypergeometric(rng, N, m, n, j, size):
    keys = rng.random((size, N))
    balls = np.argsort(keys, axis=1)[:, :m]
    before = np.zeros((size, N), dtype=bool)
    np.put_along_axis(before, balls, True, axis=1)
    after = before.copy()
    missing = ~before[:, j]
    pick = rng.integers(m, size=size)
    moved = balls[np.arange(size), pick]
    rows = np.nonzero(missing)[0]
    after[rows, moved[rows]] = False
    after[rows, j] = True
    return before[:, :n], after[:, :n]


def _batch_occupancy(rng, n, m, j, size):
    balls = rng.integers(n, size=(size, m))
    before = np.ones((size, n), dtype=bool)
    rows = np.repeat(np.arange(size), m)
    before[rows, balls.ravel()] = False
    redo = balls == j
    rounds = 0
    while redo.any():
        rounds += 1
        if rounds > RESAMPLE_CAP:
            raise RuntimeError("redistribution did not leave urn j after the resampling cap")
        balls[redo] = rng.integers(n, size=int(redo.sum()))
        redo = balls == j
    after = np.ones((size, n), dtype=bool)
    after[rows, balls.ravel()] = False
    return before, after


def iter_coupling_batches(model: DependentModel, j: int, seed: int, trials: int,
                          chunk: int = DEFAULT_CHUNK) -> Iterator[tuple]:
    """Yield ``(I, J)`` boolean arrays in chunks of fixed size.

    Each chunk draws from its own child of ``SeedSequence(seed)``, so the
    output depends only on ``seed``, ``trials`` and ``chunk``.
    """
    _check_coupling(model, j)
    n_chunks = -(-trials // chunk) if trials else 0
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for idx, child in enumerate(children):
        size = min(chunk, trials - idx * chunk)
        rng = np.random.default_rng(child)
        if model.variant == "hypergeometric":
            p = model.params
            yield _batch_hypergeometric(rng, p["N"], p["m"], p["n"], j, size)
        else:
            yield _batch_occupancy(rng, model.params["n"], model.params["m"], j, size)


def count_violations(before: np.ndarray, after: np.ndarray, j: int) -> int:
    """Rows breaking ``J_j = 1`` or ``J_i <= I_i`` for some ``i != j``."""
    others = np.ones(before.shape[1], dtype=bool)
    others[j] = False
    bad = (~after[:, j]) | np.any(after[:, others] & ~before[:, others], axis=1)
    return int(bad.sum())


def _hypergeometric_layouts(N, m):
    total = comb(N, m)
    for balls in itertools.combinations(range(N), m):
        yield frozenset(balls), Fraction(1, total)


def _occupancy_layouts(n, m):
    weight = Fraction(1, n ** m)
    for balls in itertools.product(range(n), repeat=m):
        yield balls, weight


def conditional_law(model: DependentModel, j: int) -> dict:
    """Law of the indicator vector given ``I_j = 1``, by full enumeration."""
    _check_coupling(model, j)
    law = Counter()
    if model.variant == "hypergeometric":
        N, m, n = model.params["N"], model.params["m"], model.params["n"]
        for balls, w in _hypergeometric_layouts(N, m):
            if j in balls:
                law[tuple(int(u in balls) for u in range(n))] += w
    else:
        n, m = model.params["n"], model.params["m"]
        for balls, w in _occupancy_layouts(n, m):
            if j not in balls:
                law[tuple(int(u not in balls) for u in range(n))] += w
    total = sum(law.values())
    return {k: v / total for k, v in law.items()}


def coupling_law(model: DependentModel, j: int) -> tuple:
    """Exact law of the coupled vector and the number of violating outcomes.

    Enumerates both the model's randomness and the coupling's own choices.
    """
    _check_coupling(model, j)
    law = Counter()
    violations = 0
    if model.variant == "hypergeometric":
        N, m, n = model.params["N"], model.params["m"], model.params["n"]
        for balls, w in _hypergeometric_layouts(N, m):
            before = tuple(int(u in balls) for u in range(n))
            if j in balls:
                outcomes = [(balls, w)]
            else:
                outcomes = [((balls - {b}) | {j}, w / m) for b in balls]
            for after_set, w2 in outcomes:
                after = tuple(int(u in after_set) for u in range(n))
                law[after] += w2
                violations += CouplingSample(before, j, after).violations() > 0
    else:
        n, m = model.params["n"], model.params["m"]
        others = [u for u in range(n) if u != j]
        for balls, w in _occupancy_layouts(n, m):
            before = tuple(int(u not in balls) for u in range(n))
            moved = [b for b, urn in enumerate(balls) if urn == j]
            w2 = w / (n - 1) ** len(moved) if moved else w
            for dest in itertools.product(others, repeat=len(moved)):
                new = list(balls)
                for b, urn in zip(moved, dest):
                    new[b] = urn
                after = tuple(int(u not in new) for u in range(n))
                law[after] += w2
                violations += CouplingSample(before, j, after).violations() > 0
    return dict(law), violations


def load_seed_manifest(path) -> list:
    """Read a JSON list of ``{model, j, seed, trials}`` entries.

    ``model`` is an object such as ``{"name": "occupancy", "n": 5, "m": 6}``.
    """
    with open(path) as fh:
        entries = json.load(fh)
    out = []
    for entry in entries:
        model = DependentModel.from_dict(entry["model"])
        out.append((model, int(entry["j"]), int(entry["seed"]), int(entry["trials"])))
    return out


def pattern_counts(batches, n: int) -> Counter:
    """Histogram of the coupled vectors ``J`` over all batches."""
    weights = 1 << np.arange(n)[::-1]
    counts = Counter()
    for _, after in batches:
        codes = after.astype(np.int64) @ weights
        values, freq = np.unique(codes, return_counts=True)
        for v, f in zip(values, freq):
            counts[tuple(int(b) for b in format(int(v), f"0{n}b"))] += int(f)
    return counts


def independent_mgf_gap(dist: ExactDistribution, n: int, ts) -> float:
    """Largest ``ln E e^{tX} - n ln(1 + p(e^t - 1))`` over ``ts`` with ``p = EX/n``."""
    p = float(dist.mean()) / n
    worst = -math.inf
    for t in ts:
        independent = n * math.log1p(p * math.expm1(t))
        worst = max(worst, dist.log_mgf(t) - independent)
    return worst
