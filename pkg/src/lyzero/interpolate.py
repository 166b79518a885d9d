"""Fisher polynomials (one factor beta per violated constraint), the
reduction to a field on auxiliary variables, and truncated log-series
estimates of the number of solutions."""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

import mpmath
import numpy as np

from .exact import (DEFAULT_BUDGET, PartitionPolynomial, _check_budget, _chunks,
                    _violation_counts, factorized_partition_poly)
from .model import AtomicCsp, ProjectionScheme

MAX_ORDER = 10


def fisher_partition_poly(csp, budget=DEFAULT_BUDGET):
    """Coefficient j counts assignments violating exactly j constraints."""
    _check_budget(csp, budget)
    counts = np.zeros(len(csp.constraints) + 1, dtype=object)
    counts[:] = 0
    for idx, digits in _chunks(csp.domains):
        viol = _violation_counts(csp, digits, len(idx))
        for j, c in enumerate(np.bincount(viol, minlength=len(counts))):
            counts[j] += int(c)
    return PartitionPolynomial([int(c) for c in counts], var="beta")


@dataclass
class FisherInstance:
    csp: AtomicCsp
    betas: list

    def __post_init__(self):
        self.betas = list(self.betas) if isinstance(self.betas, (list, tuple)) else [self.betas]

    def poly(self):
        return fisher_partition_poly(self.csp)


@dataclass
class ReducedInstance:
    csp: AtomicCsp
    special: ProjectionScheme
    lam: object
    original_n: int


def fisher_lambda(beta):
    if beta == 1:
        raise ValueError("beta = 1 has no reduced field")
    return beta / (1 - beta)


def fisher_reduce(csp, beta=None):
    """Append a binary variable to every constraint; the constraint is now
    violated only when the old one is and the new variable is 0.  The
    field sits on value 1 of the new variables, lambda = beta/(1 - beta)."""
    lam = None if beta is None else fisher_lambda(Fraction(beta) if isinstance(beta, int) else beta)
    n, m = csp.n, len(csp.constraints)
    cons = [(vs + (n + i,), fb + (0,)) for i, (vs, fb) in enumerate(csp.constraints)]
    reduced = AtomicCsp(list(csp.domains) + [2] * m, cons)
    rows = [list(range(q)) for q in csp.domains] + [[0, 1]] * m
    special = ProjectionScheme(rows, [None] * n + [1] * m)
    return ReducedInstance(reduced, special, lam, n)


@dataclass
class ReductionReport:
    fisher: PartitionPolynomial
    reduced: PartitionPolynomial
    polynomial_identity: bool
    max_discrepancy: float
    samples: int
    ok: bool


def verify_reduction_identity(csp, betas=(), tol=1e-12, budget=DEFAULT_BUDGET):
    """Fisher polynomial of ``csp`` against (1-beta)^|C| Z(reduced, beta/(1-beta)),
    as exact polynomials and at sampled complex beta."""
    fisher = fisher_partition_poly(csp, budget)
    red = fisher_reduce(csp)
    ly = factorized_partition_poly(red.csp, red.special, budget)
    m = len(csp.constraints)
    # sum_j c_j beta^j (1 - beta)^(m - j)
    acc = [0] * (m + 1)
    for j, c in enumerate(ly.coeffs):
        if c == 0:
            continue
        for i in range(m - j + 1):
            acc[j + i] += c * comb(m - j, i) * (-1) ** i
    same = PartitionPolynomial(acc, "beta").coeffs == fisher.coeffs
    worst = 0.0
    for beta in betas:
        beta = complex(beta)
        lam = beta / (1 - beta)
        lhs = complex(fisher.eval_mp(beta))
        rhs = complex((1 - beta) ** m * ly.eval_mp(lam))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return ReductionReport(fisher, ly, same, worst, len(betas), same and worst <= tol)


# --- cluster series ----------------------------------------------------------

@dataclass
class ClusterSeries:
    coeffs: list  # a_j, Taylor coefficients of Z_fisher(1 + x)
    order: int

    @property
    def a0(self):
        return self.coeffs[0]


def _truncated_mul(a, b, J):
    out = [0] * (J + 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b[:J + 1 - i]):
                out[i + j] += x * y
    return out


def _csp_components(csp):
    parent = list(range(csp.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for vs, _ in csp.constraints:
        for v in vs[1:]:
            parent[find(v)] = find(vs[0])
    groups = {}
    for i, (vs, _) in enumerate(csp.constraints):
        groups.setdefault(find(vs[0]), []).append(i)
    return list(groups.values())


def _component_series(csp, members, J):
    """sum over consistent subsets S of ``members`` with |S| <= J of
    x^|S| / prod_{v in vbl(S)} q_v, by backtracking over constraints."""
    out = [Fraction(0)] * (J + 1)
    cons = [csp.constraints[i] for i in members]

    def rec(start, size, fixed, weight):
        out[size] += weight
        if size == J:
            return
        for i in range(start, len(cons)):
            vs, fb = cons[i]
            new, ok, w = dict(fixed), True, weight
            for v, a in zip(vs, fb):
                if v in new:
                    if new[v] != a:
                        ok = False
                        break
                else:
                    new[v] = a
                    w = w / csp.domains[v]
            if ok:
                rec(i + 1, size + 1, new, w)

    rec(0, 0, {}, Fraction(1))
    return out


def cluster_series(csp, J, hypergraph=None, q=None):
    """a_j = sum over j-subsets S of constraints of #{assignments violating
    all of S}.  For a colouring-derived CSP pass ``hypergraph`` and ``q`` to
    use the component-counting form sum_{|F|=j} q^{comp(F) + n - |vbl(F)|}."""
    if J > MAX_ORDER:
        raise ValueError(f"order {J} exceeds {MAX_ORDER}")
    if hypergraph is not None:
        return ClusterSeries(_coloring_series(hypergraph, q, J), J)
    space = csp.space_size()
    total = [Fraction(1)] + [Fraction(0)] * J
    for members in _csp_components(csp):
        total = _truncated_mul(total, _component_series(csp, members, J), J)
    coeffs = [x * space for x in total]
    if any(c.denominator != 1 for c in coeffs):
        raise ArithmeticError("non-integral cluster coefficient")
    return ClusterSeries([int(c) for c in coeffs], J)


def _coloring_series(h, q, J):
    """Each edge contributes at most one (monochromatic) constraint; edges
    chosen together in one component of F share the colour."""
    parts = []
    comps = _edge_components(h)
    for edges in comps:
        vs = {v for e in edges for v in e}
        series = [0] * (J + 1)
        for j in range(min(J, len(edges)) + 1):
            for F in combinations(edges, j):
                series[j] += q ** (_component_count(F) + len(vs) - len({v for e in F for v in e}))
        parts.append(series)
    covered = {v for e in h.edges for v in e}
    total = [q ** (h.n - len(covered))] + [0] * J
    for s in parts:
        total = _truncated_mul(total, s, J)
    return total


def _edge_components(h):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            x = parent[x]
        return x

    for e in h.edges:
        for v in e[1:]:
            parent[find(v)] = find(e[0])
    groups = {}
    for e in h.edges:
        groups.setdefault(find(e[0]), []).append(e)
    return list(groups.values())


def _component_count(F):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            x = parent[x]
        return x

    for e in F:
        for v in e[1:]:
            parent[find(v)] = find(e[0])
    return len({find(e[0]) for e in F})


def binomial_transform(fisher, J):
    """a_j = sum_m C(m, j) f_m."""
    f = fisher.coeffs
    return [sum(comb(m, j) * c for m, c in enumerate(f)) for j in range(J + 1)]


LOG_PREC = 128


@dataclass
class LogEstimate:
    estimates: list          # partial estimates of ln(#solutions), orders 0..J, as mpf
    log_coeffs: list         # Taylor coefficients of ln Z(1 + x), exact
    exact: mpmath.mpf = None

    @property
    def value(self):
        return self.estimates[-1]

    @property
    def errors(self):
        if self.exact is None:
            return None
        with mpmath.workprec(LOG_PREC):
            return [abs(e - self.exact) for e in self.estimates]


def truncated_log_count(series, J=None, exact_count=None):
    """Formal logarithm of the truncated series, evaluated at x = -1."""
    a = series.coeffs if isinstance(series, ClusterSeries) else list(series)
    J = len(a) - 1 if J is None else J
    if a[0] <= 0:
        raise ValueError("a_0 must be positive")
    g = [Fraction(x, a[0]) for x in a[:J + 1]] + [Fraction(0)] * max(0, J + 1 - len(a))
    ell = [Fraction(0)] * (J + 1)
    for j in range(1, J + 1):
        acc = j * g[j]
        for i in range(1, j):
            acc -= i * ell[i] * g[j - i]
        ell[j] = acc / j
    with mpmath.workprec(LOG_PREC):
        running = mpmath.log(a[0])
        est = [+running]
        for j in range(1, J + 1):
            running += (-1) ** j * mpmath.mpf(ell[j].numerator) / ell[j].denominator
            est.append(+running)
        exact = None
        if exact_count is not None:
            exact = mpmath.log(exact_count) if exact_count > 0 else mpmath.ninf
    return LogEstimate(est, ell, exact)
