from fractions import Fraction
from math import ceil, erfc, exp, pi, sqrt

import pytest
from hypothesis import given, strategies as st

from lyzero.conditions import ConditionError, cnf_params_from_fractions
from lyzero.corpus import disjoint_edges, random_cnf
from lyzero.exact import ExactDistribution
from lyzero.model import (AtomicCsp, CnfFormula, Hypergraph, coloring_to_atomic_csp,
                          special_value_projection)
from lyzero.stats import (DegenerateLawError, chebyshev_verify, clt_report,
                          coloring_local_uniformity, disjoint_edge_law, lclt_report,
                          local_uniformity_check, marginal_bounds, moser_tardos_marking,
                          total_influence_exact, verify_marking)

from conftest import proper_colourings

ALPHA, BETA = Fraction("0.171562"), Fraction("0.257342")


def float_kolmogorov(probs):
    mean = sum(i * p for i, p in enumerate(probs))
    sd = sqrt(sum((i - mean) ** 2 * p for i, p in enumerate(probs)))
    cdf, worst = 0.0, 0.0
    for i, p in enumerate(probs):
        phi = erfc(-(i - mean) / (sd * sqrt(2))) / 2
        worst = max(worst, abs(cdf - phi), abs(cdf + p - phi))
        cdf += p
    return worst


def test_single_edge_law():
    dist = disjoint_edge_law(3, 3, 1)
    assert dist.probabilities == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]


def test_point_mass_rejected():
    with pytest.raises(DegenerateLawError):
        clt_report(ExactDistribution([5]), 1)
    with pytest.raises(DegenerateLawError):
        lclt_report(ExactDistribution([0, 3]), 1)


def test_clt_single_edge():
    rep = clt_report(disjoint_edge_law(3, 3, 1), 3)
    assert abs(float(rep.kolmogorov) - float_kolmogorov([0.25, 0.5, 0.25])) < 1e-15
    assert abs(float(rep.kolmogorov) - 0.25) < 1e-15


def test_lclt_single_edge():
    sd = sqrt(0.5)
    dens = [exp(-((t - 1) / sd) ** 2 / 2) / (sd * sqrt(2 * pi)) for t in range(3)]
    expected = max(abs(p - d) for p, d in zip([0.25, 0.5, 0.25], dens))
    assert abs(float(lclt_report(disjoint_edge_law(3, 3, 1), 3).sup_error) - expected) < 1e-15


@given(st.lists(st.integers(0, 50), min_size=2, max_size=12).filter(lambda w: sum(x > 0 for x in w) > 1))
def test_reflection_invariance(w):
    a, b = ExactDistribution(w), ExactDistribution(w[::-1])
    assert abs(clt_report(a, 2).kolmogorov - clt_report(b, 2).kolmogorov) < 1e-20
    assert abs(lclt_report(a, 2).sup_error - lclt_report(b, 2).sup_error) < 1e-20
    assert 0 <= clt_report(a, 2).kolmogorov <= 1
    probs = [x / sum(w) for x in w]
    assert abs(float(clt_report(a, 2).kolmogorov) - float_kolmogorov(probs)) < 1e-12


def test_trends_small_grid():
    reps = [(clt_report(disjoint_edge_law(3, 3, m), 3 * m), lclt_report(disjoint_edge_law(3, 3, m), 3 * m))
            for m in (16, 64, 256)]
    for a, b in zip(reps, reps[1:]):
        assert b[0].kolmogorov < a[0].kolmogorov and b[1].sup_error < a[1].sup_error
    assert all(r[0].scaled <= 1.5 * reps[0][0].scaled for r in reps)
    assert all(r[1].scaled <= 1.5 * reps[0][1].scaled for r in reps)


def test_uniformity_disjoint_edges():
    csp = coloring_to_atomic_csp(disjoint_edges(3, 2), 3)
    rep = local_uniformity_check(csp, special_value_projection(csp), 1)
    assert rep.marginals == [Fraction(1, 3)] * 6 and rep.passed


def test_uniformity_without_constraints():
    csp = AtomicCsp([3, 3], [])
    rep = local_uniformity_check(csp, special_value_projection(csp), 2)
    assert rep.marginals == [Fraction(1, 2)] * 2


@given(st.integers(2, 20), st.fractions(Fraction(1, 10), 3), st.integers(1, 10), st.integers(2, 8))
def test_bounds_widen(q, lam, delta, k):
    lo, hi = marginal_bounds(q, 1, lam, delta, k)
    lo2, hi2 = marginal_bounds(q, 1, lam, delta + 1, k)
    assert lo <= lo2 <= hi2 <= hi


def test_coloring_uniformity():
    premise, ok, lo, hi = coloring_local_uniformity(Hypergraph(3, [[0, 1, 2]]), 5, 3)
    assert premise and ok and lo == hi == Fraction(1, 5)


def test_chebyshev_family():
    for m in (10, 100):
        rep = chebyshev_verify(6, 1000, m)
        assert rep.condition_passed and rep.passed
        assert rep.variance <= rep.variance_bound
        assert 0 < rep.mean - rep.mean_lower <= Fraction(rep.n, 6 * 1000) / 1000


def test_chebyshev_vacuous_flag():
    rep = chebyshev_verify(6, 1000, 10)
    assert all(rep.vacuous[d] == (rep.bounds[d] >= 1) for d in rep.bounds)


def brute_influence(h, q, v, value):
    cols = list(proper_colourings(h, q))
    pinned = [s for s in cols if s[v] == value]
    total = Fraction(0)
    for u in range(h.n):
        if u != v:
            total += abs(Fraction(sum(s[u] == 0 for s in pinned), len(pinned))
                         - Fraction(sum(s[u] == 0 for s in cols), len(cols)))
    return total


def test_influence_single_edge():
    h = Hypergraph(3, [[0, 1, 2]])
    csp = coloring_to_atomic_csp(h, 3)
    got = total_influence_exact(csp, special_value_projection(csp), 1, 0, 1)
    assert got == brute_influence(h, 3, 0, 1) == Fraction(1, 12)


def test_influence_disconnected():
    csp = coloring_to_atomic_csp(Hypergraph(4, [[0, 1]]), 3)
    assert total_influence_exact(csp, special_value_projection(csp), 1, 3, 2) == 0


def test_influence_decreases_with_q():
    vals = []
    for q in (3, 4, 5, 6):
        csp = coloring_to_atomic_csp(Hypergraph(3, [[0, 1, 2]]), q)
        vals.append(total_influence_exact(csp, special_value_projection(csp), 1, 0, 1))
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_marking_large_k():
    f = random_cnf(3000, 300, 2, 19, seed=0)
    p = cnf_params_from_fractions(300, 2, ALPHA, BETA)
    r = moser_tardos_marking(f, p, seed=0)
    assert verify_marking(f, r.marked, p)
    assert all(mk >= ceil(ALPHA * 300) and umk >= ceil(BETA * 300) for mk, umk in r.clause_counts)
    assert moser_tardos_marking(f, p, seed=0).marked == r.marked


def test_marking_without_clauses():
    p = cnf_params_from_fractions(300, 2, ALPHA, BETA)
    f = CnfFormula(500, [])
    r = moser_tardos_marking(f, p, seed=3)
    assert verify_marking(f, r.marked, p)


def test_marking_precondition():
    p = cnf_params_from_fractions(4, 2, ALPHA, BETA)
    with pytest.raises(ConditionError):
        moser_tardos_marking(CnfFormula(4, [([0, 1, 2, 3], [True] * 4)]), p)
