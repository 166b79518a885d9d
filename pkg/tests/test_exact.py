from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import colour_count_poly, proper_colourings
from lyzero.exact import (PartitionPolynomial, ZeroMeasureError, brute_force_partition_poly,
                          coloring_projected_counts, conditional_marginal,
                          exact_law_of_special_count, factorized_partition_poly, gibbs_measure,
                          measure_from_counts, projected_measure, single_edge_closed_form)
from lyzero.model import (AtomicCsp, Hypergraph, coloring_to_atomic_csp, collapse_projection,
                          extend_projection, identity_projection, make_coloring_projection,
                          special_value_projection)

EDGE3 = [6, 12, 6]


def _poly(h, q):
    csp = coloring_to_atomic_csp(h, q)
    return csp, special_value_projection(csp)


def test_single_edge_brute_force(edge3):
    assert brute_force_partition_poly(*_poly(edge3, 3)).coeffs == EDGE3


def test_two_vertex_edge_has_root_at_zero():
    assert brute_force_partition_poly(*_poly(Hypergraph(2, [[0, 1]]), 2)).coeffs == [0, 2]


def test_no_constraints():
    csp = AtomicCsp([3], [])
    assert brute_force_partition_poly(csp, special_value_projection(csp)).coeffs == [2, 1]


@pytest.mark.parametrize("k,q,expected", [(3, 3, EDGE3), (2, 2, [0, 2])])
def test_closed_form(k, q, expected):
    assert single_edge_closed_form(k, q).coeffs == expected


def test_closed_form_value_at_one():
    assert single_edge_closed_form(50, 700)(1) == 700**50 - 700


@pytest.mark.parametrize("m", [1, 2])
def test_disjoint_edges_factorise(m):
    h = Hypergraph(3 * m, [range(3 * i, 3 * i + 3) for i in range(m)])
    csp, sp = _poly(h, 3)
    expected = PartitionPolynomial(EDGE3) ** m
    assert factorized_partition_poly(csp, sp) == expected == brute_force_partition_poly(csp, sp)


def test_edge_plus_isolated_vertex():
    csp, sp = _poly(Hypergraph(4, [[0, 1, 2]]), 3)
    assert factorized_partition_poly(csp, sp) == PartitionPolynomial(EDGE3) * PartitionPolynomial([2, 1])


@given(st.integers(2, 4), st.integers(2, 3),
       st.lists(st.lists(st.integers(0, 5), min_size=3, max_size=3, unique=True), max_size=3))
def test_brute_force_matches_direct_count(q, k, raw):
    edges = sorted({tuple(sorted(e[:k])) for e in raw})
    h = Hypergraph(6, edges, k)
    if q**6 > 5000:
        return
    csp, sp = _poly(h, q)
    assert brute_force_partition_poly(csp, sp).coeffs == colour_count_poly(h, q)
    assert factorized_partition_poly(csp, sp) == brute_force_partition_poly(csp, sp)
    assert brute_force_partition_poly(csp, sp)(1) == sum(1 for _ in proper_colourings(h, q))


def test_gibbs_uniform_at_one(edge3):
    csp, sp = _poly(edge3, 3)
    mu = gibbs_measure(csp, sp, 1)
    nz = [x for x in mu.values if x != 0]
    assert len(nz) == 24 and set(nz) == {Fraction(1, 24)}
    digits = np.unravel_index(np.arange(27), csp.domains)
    no_special = (digits[0] != 0) & (digits[1] != 0) & (digits[2] != 0)
    assert mu.measure(no_special) == Fraction(6, 24)


def test_gibbs_at_root_raises():
    csp, sp = _poly(Hypergraph(3, [[0, 1, 2]]), 3)
    with pytest.raises(ZeroMeasureError):
        gibbs_measure(csp, sp, -1)


def test_projection_identity_and_collapse(edge3):
    csp, sp = _poly(edge3, 3)
    lam = 0.5 + 0.25j
    assert np.allclose(projected_measure(csp, identity_projection(csp, [0] * 3), lam).values,
                       gibbs_measure(csp, sp, lam).values)
    assert projected_measure(csp, collapse_projection(csp), lam).values[0] == pytest.approx(1)


def test_projected_measure_by_direct_count(two_edges):
    q, B = 6, 2
    proj = extend_projection(make_coloring_projection(q, B), 4)
    psi = projected_measure(coloring_to_atomic_csp(two_edges, q), proj, Fraction(1))
    counts = np.zeros(proj.bucket_counts, dtype=object)
    counts[:] = 0
    for sigma in proper_colourings(two_edges, q):
        counts[proj.project(sigma)] += 1
    assert psi.values.size == 81
    total = int(counts.sum())
    assert list(psi.values) == [Fraction(int(c), total) for c in counts.reshape(-1)]


def test_inclusion_exclusion_counts_match_enumeration(two_edges):
    q, B = 5, 2
    proj = extend_projection(make_coloring_projection(q, B), 4)
    counts = coloring_projected_counts(two_edges, q, proj)
    direct = projected_measure(coloring_to_atomic_csp(two_edges, q), proj, 0.3 - 0.2j)
    assert np.allclose(measure_from_counts(counts, proj.bucket_counts, proj, 0.3 - 0.2j).values,
                       direct.values)


def test_law_of_single_edge():
    d = exact_law_of_special_count(PartitionPolynomial(EDGE3), 1)
    assert d.probabilities == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]
    assert (d.mean, d.variance) == (1, Fraction(1, 2))


@given(st.integers(1, 6), st.fractions(min_value=Fraction(1, 10), max_value=10))
def test_law_of_edge_powers(m, lam):
    d = exact_law_of_special_count(PartitionPolynomial(EDGE3) ** m, lam)
    assert sum(d.probabilities) == 1
    if lam == 1:
        assert (d.mean, d.variance) == (m, Fraction(m, 2))


def test_conditional_marginal(edge3):
    csp, sp = _poly(edge3, 3)
    assert conditional_marginal(csp, sp, 1, {0: 0}) == 1
    # of the 8 completions of v0 = 0, v1 = 0 forces v2 in {1, 2}
    assert conditional_marginal(csp, sp, 1, {0: 0}, {1: 0}) == Fraction(2, 8)
    with pytest.raises(ZeroMeasureError):
        conditional_marginal(coloring_to_atomic_csp(Hypergraph(2, [[0, 1]]), 2),
                             special_value_projection(AtomicCsp([2, 2], [])), 1, {0: 0, 1: 0})


@given(st.complex_numbers(min_magnitude=0.1, max_magnitude=3))
def test_measures_normalised(lam):
    csp, sp = _poly(Hypergraph(4, [[0, 1, 2], [1, 2, 3]]), 3)
    try:
        mu = gibbs_measure(csp, sp, lam)
    except ZeroMeasureError:
        return
    assert abs(mu.total() - 1) <= 1e-12


def test_total_measure_over_partition_is_exact(two_edges):
    proj = extend_projection(make_coloring_projection(6, 2), 4)
    psi = projected_measure(coloring_to_atomic_csp(two_edges, 6), proj, Fraction(2, 3))
    first = np.unravel_index(np.arange(81), psi.dims)[0]
    assert sum(psi.measure(first == b) for b in range(3)) == 1
