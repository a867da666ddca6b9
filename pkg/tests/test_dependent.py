import itertools
import json
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from indicator_tails.dependent import (
    CouplingSample,
    DependentModel,
    barbour_distribution,
    conditional_law,
    conditioned_binomial,
    conditioned_ratio,
    count_violations,
    coupling_law,
    coupling_sample,
    find_heavy_tail_witness,
    geometric_tail,
    hypergeometric_distribution,
    independent_mgf_gap,
    iter_coupling_batches,
    load_seed_manifest,
    occupancy_distribution,
    occupancy_moments,
    pattern_counts,
    strict_deviation_tail,
)
from indicator_tails.errors import DomainError, PreconditionError, SearchExhaustedError
from indicator_tails.exact import binomial_distribution


def brute_occupancy(n, m):
    law = Counter()
    for balls in itertools.product(range(n), repeat=m):
        law[n - len(set(balls))] += Fraction(1, n ** m)
    return dict(law)


# exact laws -------------------------------------------------------------------------


def test_hypergeometric_examples():
    assert hypergeometric_distribution(2, 1, 1).as_dict() == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    assert hypergeometric_distribution(4, 2, 2).as_dict() == {
        0: Fraction(1, 6), 1: Fraction(4, 6), 2: Fraction(1, 6)}
    assert hypergeometric_distribution(10, 5, 5).mean() == Fraction(5, 2)


@pytest.mark.parametrize("N,m,n", [(12, 5, 7), (20, 3, 15), (9, 9, 4), (30, 12, 11)])
def test_hypergeometric_against_scipy(N, m, n):
    d = hypergeometric_distribution(N, m, n)
    for k, q in d.items():
        assert math.isclose(float(q), stats.hypergeom.pmf(k, N, m, n), rel_tol=1e-10)


def test_hypergeometric_rejects_bad_parameters():
    with pytest.raises(DomainError):
        hypergeometric_distribution(3, 4, 1)


def test_occupancy_examples():
    assert occupancy_distribution(2, 1).as_dict() == {1: 1}
    assert occupancy_distribution(2, 2).as_dict() == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    assert occupancy_distribution(3, 3).mean() == Fraction(8, 9)


@pytest.mark.parametrize("n,m", [(1, 3), (3, 2), (4, 5), (5, 3), (3, 7), (6, 6)])
def test_occupancy_against_enumeration(n, m):
    assert occupancy_distribution(n, m).as_dict() == brute_occupancy(n, m)


def test_occupancy_moments_examples():
    assert occupancy_moments(2, 1) == (1, 0)
    assert occupancy_moments(3, 2) == (Fraction(4, 3), Fraction(2, 9))
    d = occupancy_distribution(10, 10)
    assert occupancy_moments(10, 10) == (d.mean(), d.variance())


def test_conditioned_binomial_examples():
    d = conditioned_binomial(2, Fraction(1, 2), 1)
    assert d.as_dict() == {1: Fraction(2, 3), 2: Fraction(1, 3)}
    assert d.mean() == Fraction(4, 3) and d.variance() == Fraction(2, 9)
    assert conditioned_binomial(5, Fraction(1, 2), 0) == binomial_distribution(5, Fraction(1, 2))


@pytest.mark.parametrize("n,p,k", [(20, Fraction(1, 2), 12), (30, Fraction(1, 3), 5), (9, Fraction(4, 5), 9)])
def test_conditioned_binomial_successive_ratio(n, p, k):
    d = conditioned_binomial(n, p, k)
    for i in range(n - k):
        assert d.pmf(k + i + 1) / d.pmf(k + i) == conditioned_ratio(n, p, k, i)


def test_conditioned_pmf_dominated_by_geometric_envelope():
    p = Fraction(1, 2)
    for eps in (Fraction(1, 5), Fraction(1, 10)):
        r = p * (1 - p - eps) / ((p + eps) * (1 - p))
        for n in (64, 200):
            k = math.floor(n * (p + eps)) + 1
            d = conditioned_binomial(n, p, k)
            for i in range(n - k + 1):
                assert d.pmf(k + i) <= r ** i * d.pmf(k)


def test_barbour_law():
    d = barbour_distribution()
    assert d.as_dict() == {3: Fraction(4, 13), 4: Fraction(5, 13), 5: Fraction(4, 13)}
    assert DependentModel.barbour().n_indicators == 5


def test_model_round_trip():
    m = DependentModel.from_dict({"name": "occupancy", "n": 4, "m": 6})
    assert m.variant == "occupancy" and m.params == {"n": 4, "m": 6}
    assert m.distribution() == occupancy_distribution(4, 6)
    with pytest.raises(DomainError):
        DependentModel.from_dict({"name": "urns"})


# negative dependence consequences -------------------------------------------------------


def test_mgf_below_independent_counterpart():
    ts = np.linspace(-3, 3, 61)
    for N in range(1, 9):
        for m in range(1, N + 1):
            for n in range(1, N + 1):
                assert independent_mgf_gap(hypergeometric_distribution(N, m, n), n, ts) <= 1e-12
    for n in range(1, 7):
        for m in range(0, 9):
            assert independent_mgf_gap(occupancy_distribution(n, m), n, ts) <= 1e-12


def test_geometric_limit():
    alpha, r = 4, 0.999
    val = geometric_tail(r, (1 + alpha) / (1 - r))
    assert abs(val / math.exp(-(1 + alpha)) - 1) < 0.02


# witness search ------------------------------------------------------------------------


def test_witness_search_finds_instance():
    w = find_heavy_tail_witness(4, 1 / (2 * math.e), 10)
    assert w.model.variant == "conditioned-binomial"
    assert w.variance > 10
    assert w.tail > Fraction(math.exp(-5) / 2)
    tail, mu, var = strict_deviation_tail(w.model.distribution(), 4)
    assert (tail, mu, var) == (w.tail, w.mean, w.variance)
    assert w.log[-1]["status"] == "witness"


def test_witness_precondition_and_budget():
    with pytest.raises(PreconditionError):
        find_heavy_tail_witness(4, 0.5, 10)
    with pytest.raises(SearchExhaustedError) as info:
        find_heavy_tail_witness(4, 1 / (2 * math.e), 10, max_halvings=0, n_max=32)
    assert info.value.log


def test_strict_tail_excludes_boundary():
    d = binomial_distribution(4, Fraction(1, 2))
    # sigma = 1, EX = 2: X - 2 > 1 means X = 4 only
    tail, _, _ = strict_deviation_tail(d, 1)
    assert tail == Fraction(1, 16)


# couplings -----------------------------------------------------------------------------


def test_coupling_full_urns():
    model = DependentModel.hypergeometric(2, 2, 2)
    for seed in range(20):
        s = coupling_sample(model, seed % 2, seed)
        assert s.i_vector == (1, 1) and s.j_vector == (1, 1)


def test_coupling_sample_invariants():
    occ = DependentModel.occupancy(3, 2)
    hyp = DependentModel.hypergeometric(7, 3, 5)
    for seed in range(300):
        for model, j in ((occ, 2), (hyp, 1)):
            s = coupling_sample(model, j, seed)
            assert s.j_vector[j] == 1 and s.violations() == 0


def test_violation_counter_detects_bad_pairs():
    assert CouplingSample((1, 0, 1), 0, (1, 1, 1)).violations() == 1
    before = np.array([[True, False, True]])
    after = np.array([[True, True, True]])
    assert count_violations(before, after, 0) == 1


@pytest.mark.parametrize("model,j", [
    (DependentModel.hypergeometric(4, 2, 2), 1),
    (DependentModel.hypergeometric(6, 3, 4), 0),
    (DependentModel.occupancy(3, 2), 2),
    (DependentModel.occupancy(4, 5), 1),
])
def test_coupling_law_equals_conditional_law(model, j):
    law, violations = coupling_law(model, j)
    assert violations == 0
    assert law == conditional_law(model, j)


def test_batches_independent_of_how_they_are_consumed():
    model = DependentModel.occupancy(5, 7)
    a = list(iter_coupling_batches(model, 3, seed=11, trials=2500, chunk=1000))
    b = list(iter_coupling_batches(model, 3, seed=11, trials=2500, chunk=1000))
    assert [x.shape[0] for x, _ in a] == [1000, 1000, 500]
    for (x1, y1), (x2, y2) in zip(a, b):
        assert (x1 == x2).all() and (y1 == y2).all()


def test_batch_samplers_respect_coupling():
    for model, j in ((DependentModel.hypergeometric(9, 4, 6), 5), (DependentModel.occupancy(6, 8), 0)):
        for before, after in iter_coupling_batches(model, j, seed=3, trials=20000):
            assert count_violations(before, after, j) == 0
            assert after[:, j].all()


def test_pattern_counts_sum_to_trials():
    model = DependentModel.hypergeometric(4, 2, 2)
    counts = pattern_counts(iter_coupling_batches(model, 1, seed=8, trials=5000), 2)
    assert sum(counts.values()) == 5000
    assert set(counts) <= set(conditional_law(model, 1))


def test_seed_manifest(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([{"model": {"name": "hypergeometric", "N": 4, "m": 2, "n": 2},
                                 "j": 1, "seed": 5, "trials": 10}]))
    [(model, j, seed, trials)] = load_seed_manifest(path)
    assert model.params == {"N": 4, "m": 2, "n": 2} and (j, seed, trials) == (1, 5, 10)


def test_coupling_rejects_bad_index():
    with pytest.raises(DomainError):
        coupling_sample(DependentModel.occupancy(3, 2), 3, 0)
    with pytest.raises(DomainError):
        coupling_sample(DependentModel.barbour(), 0, 0)
