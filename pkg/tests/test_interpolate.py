import itertools
from math import comb, log

import pytest
from hypothesis import given, strategies as st

from lyzero.corpus import random_hypergraph
from lyzero.exact import factorized_partition_poly
from lyzero.interpolate import (MAX_ORDER, binomial_transform, cluster_series,
                                fisher_lambda, fisher_partition_poly, fisher_reduce,
                                truncated_log_count, verify_reduction_identity)
from lyzero.model import AtomicCsp, Hypergraph, coloring_to_atomic_csp

from conftest import proper_colourings


def violation_counts(csp):
    """Brute-force oracle: assignments by number of violated constraints."""
    out = [0] * (len(csp.constraints) + 1)
    for sigma in itertools.product(*[range(q) for q in csp.domains]):
        bad = sum(all(sigma[v] == a for v, a in zip(vs, fb)) for vs, fb in csp.constraints)
        out[bad] += 1
    return out


@st.composite
def tiny_csps(draw):
    n = draw(st.integers(1, 5))
    domains = draw(st.lists(st.integers(2, 3), min_size=n, max_size=n))
    cons = []
    for _ in range(draw(st.integers(0, 5))):
        vs = tuple(sorted(draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=min(3, n)))))
        fb = tuple(draw(st.integers(0, domains[v] - 1)) for v in vs)
        cons.append((vs, fb))
    return AtomicCsp(domains, cons)


def test_fisher_single_two_edge():
    csp = coloring_to_atomic_csp(Hypergraph(2, [[0, 1]]), 2)
    assert fisher_partition_poly(csp).coeffs == [2, 2]


def test_fisher_no_constraints():
    assert fisher_partition_poly(AtomicCsp([3, 2, 2], [])).coeffs == [12]


@given(tiny_csps())
def test_fisher_matches_brute_force(csp):
    f = fisher_partition_poly(csp)
    expected = violation_counts(csp)
    assert f.coeffs == expected[:len(f.coeffs)] and not any(expected[len(f.coeffs):])
    assert f(1) == csp.space_size()


def test_fisher_at_zero_counts_proper_colourings(two_edges):
    csp = coloring_to_atomic_csp(two_edges, 3)
    assert fisher_partition_poly(csp)(0) == len(list(proper_colourings(two_edges, 3)))


def test_reduce_structure():
    csp = coloring_to_atomic_csp(Hypergraph(2, [[0, 1]]), 2)
    red = fisher_reduce(csp, 0.5)
    assert list(red.csp.domains) == [2, 2, 2, 2]
    assert all(len(vs) == 3 for vs, _ in red.csp.constraints)
    assert red.csp.delta == csp.delta
    assert red.lam == 1.0
    assert list(red.special.one) == [None, None, 1, 1]


def test_reduce_rejects_beta_one():
    csp = AtomicCsp([2], [((0,), (0,))])
    with pytest.raises(ValueError):
        fisher_reduce(csp, 1)
    with pytest.raises(ValueError):
        fisher_lambda(1)


def test_reduction_two_edge():
    csp = coloring_to_atomic_csp(Hypergraph(2, [[0, 1]]), 2)
    rep = verify_reduction_identity(csp, [0.3, 0.2 + 0.7j, -2.0])
    assert rep.ok and rep.polynomial_identity
    assert rep.fisher.coeffs == [2, 2]


def test_reduction_at_beta_zero(two_edges):
    csp = coloring_to_atomic_csp(two_edges, 3)
    red = fisher_reduce(csp)
    ly = factorized_partition_poly(red.csp, red.special)
    assert ly(0) == fisher_partition_poly(csp)(0)
    assert ly.degree <= len(csp.constraints)


@given(tiny_csps(), st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_reduction_identity(csp, beta):
    if abs(beta - 1) < 1e-3:
        beta = 0.3
    assert verify_reduction_identity(csp, [0.3, beta]).ok


def test_series_single_three_edge():
    s = cluster_series(coloring_to_atomic_csp(Hypergraph(3, [[0, 1, 2]]), 3), 4)
    assert s.coeffs[:2] == [27, 3]
    assert s.a0 == 27


def test_series_order_cap():
    with pytest.raises(ValueError):
        cluster_series(AtomicCsp([2], []), MAX_ORDER + 1)


@given(tiny_csps(), st.integers(0, 6))
def test_series_binomial_transform(csp, J):
    s = cluster_series(csp, J)
    assert s.coeffs == binomial_transform(fisher_partition_poly(csp), J)
    assert s.a0 == csp.space_size() and min(s.coeffs) >= 0


@pytest.mark.parametrize("seed", range(6))
def test_coloring_series_routes_agree(seed):
    h = random_hypergraph(6, 3, 2, 3, seed)
    csp = coloring_to_atomic_csp(h, 3)
    general = cluster_series(csp, 6).coeffs
    assert cluster_series(csp, 6, hypergraph=h, q=3).coeffs == general
    direct = fisher_partition_poly(csp).coeffs
    assert general == [sum(comb(m, j) * c for m, c in enumerate(direct)) for j in range(7)]


def test_log_count_without_constraints():
    est = truncated_log_count(cluster_series(AtomicCsp([2, 2], []), 3), 0, 4)
    assert est.errors == [0]


def test_log_count_three_edge():
    s = cluster_series(coloring_to_atomic_csp(Hypergraph(3, [[0, 1, 2]]), 3), 10)
    est = truncated_log_count(s, exact_count=24)
    errs = est.errors
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert abs(float(est.value) - log(24)) < 1e-11


def test_log_count_needs_positive_a0():
    with pytest.raises(ValueError):
        truncated_log_count([0, 1])
