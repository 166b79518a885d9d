import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from lyzero import conditions as cond
from lyzero.exact import coloring_projected_counts, measure_from_counts
from lyzero.model import (CnfFormula, Hypergraph, coloring_to_atomic_csp, extend_projection,
                          make_cnf_projection, make_coloring_projection)


def test_derive_at_k50():
    p = cond.derive_coloring_params(50, 1)
    assert (p.q, p.B, p.s) == (700, 13, 53)
    assert cond.check_coloring_condition(p).passed


def test_derive_degree_two():
    # ceil(700 * 2**(1/8)) = 764
    assert cond.derive_coloring_params(50, 2).q == math.ceil(700 * 2 ** 0.125) == 764


def test_derive_needs_k50():
    with pytest.raises(cond.ConditionError):
        cond.derive_coloring_params(49, 1)


def test_small_instance_fails_first_item():
    rep = cond.check_coloring_condition(cond.coloring_params(3, 2, 5, 2))
    first = next(iter(rep.items))
    assert rep.items[first] is False


def test_centre_outside_unit_interval():
    rep = cond.check_coloring_condition(cond.coloring_params(50, 1, 700, 13, lambda_c=2))
    assert list(rep.items.values())[2] is False


def test_disk_boundary_fails_closed():
    p = cond.coloring_params(50, 1, 700, 13)
    # an exact tie on the circle is left undecided, which counts as a fail
    assert list(cond.check_coloring_condition(p, 1 + p.gamma).items.values())[2] is None
    assert list(cond.check_coloring_condition(p, 1 + p.gamma / 2).items.values())[2] is True
    outside = list(cond.check_coloring_condition(p, 1 + p.gamma * Fraction(1001, 1000)).items.values())
    assert outside[2] is False


@pytest.mark.parametrize("k,delta", [(50, 1), (50, 64), (65, 8), (80, 32)])
def test_grid_cells_strict(k, delta):
    p = cond.derive_coloring_params(k, delta)
    rep = cond.check_coloring_condition(p)
    assert rep.passed and not rep.indeterminate
    assert cond.closed_form_bounds(p).product_ok is True


CLOSED = "k >= 12log2(D) + 24log2(k) + 57"


def test_cnf_at_k300():
    p = cond.cnf_params_from_fractions(300, 2, Fraction("0.171562"), Fraction("0.257342"))
    assert (p.k_mk, p.k_umk) == (52, 78)
    rep = cond.check_cnf_condition(p)
    assert rep.passed and rep.extra[CLOSED] is True
    b = cond.closed_form_bounds(p)
    assert b.product_ok is True


def test_cnf_closed_form_fails_at_k100():
    p = cond.cnf_params_from_fractions(100, 2, Fraction("0.171562"), Fraction("0.257342"))
    # 100 < 12 log2(2) + 24 log2(100) + 57 ~ 228.5
    assert cond.check_cnf_condition(p).extra[CLOSED] is False


def test_cnf_marks_must_fit():
    with pytest.raises(cond.ConditionError):
        cond.CnfParams(10, 2, 6, 5)


def _zeta_float(r):
    return 2 * math.log(2 - r) / (math.log(1 / r) - math.log(2 - r))


@pytest.mark.parametrize("r", [Fraction(1, 700), Fraction(1, 1000), Fraction(1, 3)])
def test_zeta_matches_float_formula(r):
    assert float(cond.zeta(r)) == pytest.approx(_zeta_float(float(r)), rel=1e-13)


def test_zeta_values():
    assert cond.zeta(Fraction(1, 700)) <= mpmath.mpf("0.23638")
    assert float(cond.zeta(Fraction(1, 1000))) == pytest.approx(0.2228914, abs=1e-7)


@given(st.fractions(min_value=Fraction(1, 10**6), max_value=Fraction(9, 10)),
       st.fractions(min_value=Fraction(1, 10**6), max_value=Fraction(9, 10)))
def test_zeta_monotone(a, b):
    if a < b:
        assert cond.zeta(a) < cond.zeta(b)


def test_chebyshev_condition():
    assert cond.check_chebyshev_condition(6, 1000, 1000).passed
    # float oracle: (8e)^3 * 1000^-5 * 6001^(2 + zeta) is below one
    r = 1 / 1000
    assert 3 * math.log(8 * math.e) - 5 * math.log(1000) + (2 + _zeta_float(r)) * math.log(6001) < 0
    assert not cond.check_chebyshev_condition(3, 460, 460).passed
    with pytest.raises(cond.ConditionError):
        cond.check_chebyshev_condition(6, 1000, 1000, 0)


def test_clt_condition():
    assert cond.check_clt_condition(50, 700, 700, 1).passed
    assert not cond.check_clt_condition(3, 2, 3, 1).passed
    with pytest.raises(cond.ConditionError):
        cond.check_clt_condition(3, 2, 3, 3)


def test_lclt_condition():
    assert cond.check_lclt_condition(50, 1, 700, 1, 1, 136, 26).passed
    with pytest.raises(cond.ConditionError):
        cond.check_lclt_condition(8, 1, 16, 1, 1, 4, 8)
    rep = cond.check_lclt_condition(8, 2, 16, 1, 1, 8, 4)
    assert list(rep.items.values())[0] is False


def test_coloring_scheme_at_one():
    p = cond.coloring_params(50, 1, 700, 13)
    s = cond.build_coloring_decomposition(p, Fraction(1))
    assert s.bottom[0] == Fraction(1, 700) + Fraction(699, p.rho * 700)
    assert s.values[0][0] == 0
    assert s.is_exactly_normalised()


@given(st.complex_numbers(max_magnitude=2))
def test_coloring_scheme_normalised(lam):
    p = cond.coloring_params(6, 2, 400, 2)
    s = cond.build_coloring_decomposition(p, lam)
    assert s.normalisation_error() <= 1e-13


def test_cnf_scheme():
    f = CnfFormula(3, [([0, 1, 2], [False, True, False])])
    p = cond.cnf_params_from_fractions(300, 2, Fraction("0.171562"), Fraction("0.257342"))
    s = cond.build_cnf_decomposition(p, Fraction(1), make_cnf_projection(f, {0}))
    e = math.exp(1 / p.s_cnf)
    assert s.values[1] == [1] and s.bottom[1] == 0
    assert s.values[0][0] == pytest.approx(1 - e / 2) and s.values[0][1] == pytest.approx(1 - e / 2)
    assert s.bottom[0] == pytest.approx(e - 1)


def _two_edges():
    h = Hypergraph(4, [[0, 1, 2], [1, 2, 3]])
    q, B = 6, 2
    return h, coloring_to_atomic_csp(h, q), extend_projection(make_coloring_projection(q, B), 4), \
        cond.coloring_params(3, 2, q, B)


def test_nhat_small_instance_below_closed_form():
    h, csp, proj, p = _two_edges()
    ib = cond.compute_nhat_mhat_exact(csp, proj, Fraction(1), cond.build_coloring_decomposition(p, 1, 4))
    nb, _ = cond.coloring_bound_values(p)
    assert ib.n_hat == Fraction(375561871738697504438245, 648807427635420592078848)
    assert mpmath.mpf(ib.n_hat.numerator) / ib.n_hat.denominator < nb


def test_nhat_empty_constraints():
    from lyzero.model import AtomicCsp
    proj = extend_projection(make_coloring_projection(6, 2), 2)
    p = cond.coloring_params(3, 1, 6, 2)
    ib = cond.compute_nhat_mhat_exact(AtomicCsp([6, 6], []), proj, Fraction(1),
                                      cond.build_coloring_decomposition(p, 1, 2))
    assert ib.n_hat == 0 and ib.product_ok is True


def test_adversarial_pinning():
    h, csp, proj, p = _two_edges()
    lam = Fraction(-29, 6)  # root of one conditional row sum
    with pytest.raises(cond.WellDefinednessError) as err:
        cond.compute_nhat_mhat_exact(csp, proj, lam, cond.build_coloring_decomposition(p, lam, 4))
    assert (err.value.u, err.value.tau) == (3, (1, 1, 1))


def test_closed_form_bound_at_k50():
    b = cond.closed_form_bounds(cond.coloring_params(50, 1, 700, 13))
    assert b.product_ok is True and b.log_product < math.log(0.25)
    with pytest.raises(cond.ConditionError):
        cond.closed_form_bounds(cond.coloring_params(3, 2, 5, 2))


# the k = 6, q = 400 instance sits inside the first and third items of the
# colouring condition; the counts do not depend on lambda
_H = Hypergraph(7, [[0, 1, 2, 3, 4, 5], [1, 2, 3, 4, 5, 6]])
_P = cond.coloring_params(6, 2, 400, 2)
_PROJ = extend_projection(make_coloring_projection(400, 2), 7)
_CACHE = {}


def _counts():
    if "c" not in _CACHE:
        _CACHE["c"] = coloring_projected_counts(_H, 400, _PROJ, [range(400), range(399)])
    return _CACHE["c"]


@given(st.floats(0, 0.99), st.floats(0, 2 * math.pi))
def test_exact_quantities_within_closed_forms(radius, angle):
    lam = 1 + complex(float(_P.gamma) * radius * math.cos(angle), float(_P.gamma) * radius * math.sin(angle))
    rep = cond.check_coloring_condition(_P, lam)
    items = list(rep.items.values())
    assert items[0] is True and items[2] is True
    counts = _counts()
    psi = measure_from_counts(counts, _PROJ.bucket_counts, _PROJ, lam)
    ib = cond.compute_nhat_mhat_exact(coloring_to_atomic_csp(_H, 400), _PROJ, lam,
                                      cond.build_coloring_decomposition(_P, lam, 7),
                                      psi=psi, counts=counts, delta=2, k=6)
    nb, mb = cond.coloring_bound_values(_P)
    assert ib.n_hat <= nb
    assert ib.m_hat <= float(mb)
