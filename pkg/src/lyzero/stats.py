"""Exact-law checks of the limit theorems and concentration bounds, local
uniformity and total influence on small instances, and the randomised
marking of CNF variables."""

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, e as EULER, log, log2, sqrt

import mpmath
import numpy as np

from .conditions import ConditionError, check_chebyshev_condition, check_cnf_condition
from .exact import exact_law_of_special_count, gibbs_measure, single_edge_closed_form

NORMAL_PREC = 80


class DegenerateLawError(ValueError):
    pass


class MarkingError(RuntimeError):
    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats


def _mp(x):
    return mpmath.mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else mpmath.mpf(x)


def _moments(dist):
    mean, var = dist.mean, dist.variance
    if var == 0:
        raise DegenerateLawError("distribution is a point mass")
    return mean, var


# --- CLT / LCLT --------------------------------------------------------------

@dataclass
class CltReport:
    n: int
    mean: Fraction
    std: mpmath.mpf
    kolmogorov: mpmath.mpf
    envelope: float

    @property
    def scaled(self):
        return self.kolmogorov / self.envelope

    def row(self):
        return (self.n, mpmath.nstr(self.kolmogorov, 17), self.envelope)


@dataclass
class LcltReport:
    n: int
    sup_error: mpmath.mpf
    envelope: float

    @property
    def scaled(self):
        return self.sup_error / self.envelope

    def row(self):
        return (self.n, mpmath.nstr(self.sup_error, 17), self.envelope)


def clt_report(dist, n):
    """Kolmogorov distance between the standardised exact law and N(0,1),
    evaluated on both sides of every jump of the CDF."""
    mean, var = _moments(dist)
    with mpmath.workprec(NORMAL_PREC):
        mu, sd = _mp(mean), mpmath.sqrt(_mp(var))
        cdf, worst = mpmath.mpf(0), mpmath.mpf(0)
        for m, p in enumerate(dist.mp_probabilities()):
            if p == 0:
                continue
            phi = mpmath.erfc(-(m - mu) / (sd * mpmath.sqrt(2))) / 2
            worst = max(worst, abs(cdf - phi))
            cdf += p
            worst = max(worst, abs(cdf - phi))
    return CltReport(n, mean, sd, worst, log(n) / sqrt(n) if n > 1 else 1.0)


def lclt_report(dist, n):
    """sup over integers t of |P(X = t) - density((t - mean)/std)/std|,
    including six standard deviations beyond the support."""
    mean, var = _moments(dist)
    with mpmath.workprec(NORMAL_PREC):
        probs = dist.mp_probabilities()
        mu, sd = _mp(mean), mpmath.sqrt(_mp(var))
        lo = min(0, int(mpmath.floor(mu - 6 * sd)))
        hi = max(len(probs) - 1, int(mpmath.ceil(mu + 6 * sd)))
        norm = 1 / (sd * mpmath.sqrt(2 * mpmath.pi))
        worst = mpmath.mpf(0)
        for t in range(lo, hi + 1):
            p = probs[t] if 0 <= t < len(probs) else mpmath.mpf(0)
            dens = norm * mpmath.exp(-((t - mu) / sd) ** 2 / 2)
            worst = max(worst, abs(p - dens))
    return LcltReport(n, worst, log(n) ** 3.5 / n if n > 1 else 1.0)


def disjoint_edge_law(k, q, m, lam=1):
    """Exact law of the number of special-coloured vertices on m disjoint
    k-edges (colour 0 special)."""
    return exact_law_of_special_count(single_edge_closed_form(k, q) ** m, lam)


# --- local uniformity ---------------------------------------------------------

@dataclass
class UniformityReport:
    marginals: list
    lower: Fraction
    upper: Fraction
    passed: bool
    per_variable: list = field(default_factory=list)


def marginal_bounds(q, q_star, lam, delta, k, form="chebyshev"):
    """Bounds on P(the variable is special).  ``form='chebyshev'`` is the
    symmetric single-colour version; ``form='clt'`` the q*-version whose
    upper correction uses q - q*."""
    lam = Fraction(lam)
    D = q - q_star + q_star * lam
    centre = q_star * lam / D
    dk = delta * k
    if form == "chebyshev":
        return centre - lam / (D * dk), centre + lam / (D * dk)
    if form == "clt":
        return centre - q_star * lam / (D * dk), centre + Fraction(q - q_star) / (D * dk)
    raise ValueError(form)


def local_uniformity_check(csp, special, lam, delta=None, k=None, form=None):
    """Exact special-bucket marginals of every variable against the
    local-uniformity interval.  ``special`` is a projection scheme."""
    lam = Fraction(lam)
    if lam <= 0:
        raise ValueError("lam must be positive")
    qs = set(csp.domains)
    if len(qs) != 1:
        raise ValueError("uniform domain size required")
    q = qs.pop()
    q_star = len(special.preimage(0, special.one[0]))
    form = form or ("chebyshev" if q_star == 1 else "clt")
    delta = csp.delta if delta is None else delta
    k = csp.k if k is None else k
    lo, hi = marginal_bounds(q, q_star, lam, max(delta, 1), max(k, 1), form)
    mu = gibbs_measure(csp, special, lam)
    margs, per = [], []
    for v in range(csp.n):
        row = mu.marginal(v)
        p = sum(row[a] for a in special.preimage(v, special.one[v]))
        margs.append(p)
        per.append(lo <= p <= hi)
    return UniformityReport(margs, lo, hi, all(per), per)


def coloring_local_uniformity(h, q, rho):
    """Uniform proper colourings: every colour marginal lies in
    [(1 - 1/rho)/q, (1 + 4/rho)/q] whenever q^k >= e q rho Delta and
    rho >= k >= 2.  Returns (premise holds, bounds hold, min, max)."""
    from .model import coloring_to_atomic_csp, identity_projection

    csp = coloring_to_atomic_csp(h, q)
    premise = rho >= h.k >= 2 and q ** h.k >= EULER * q * rho * h.delta
    mu = gibbs_measure(csp, identity_projection(csp), 1)
    margs = [mu.marginal(v)[c] for v in range(h.n) for c in range(q)]
    lo, hi = (1 - Fraction(1, rho)) / q, (1 + Fraction(4, rho)) / q
    return premise, all(lo <= m <= hi for m in margs), min(margs), max(margs)


# --- Chebyshev ---------------------------------------------------------------

@dataclass
class ChebyshevReport:
    m: int
    n: int
    condition_passed: bool
    mean: Fraction
    variance: Fraction
    variance_bound: int
    mean_lower: Fraction
    tails: dict
    bounds: dict
    vacuous: dict
    passed: bool


def chebyshev_verify(k, q, m, lam=1, deltas=(Fraction(1, 10), Fraction(1, 5), Fraction(1, 2))):
    """Disjoint k-edges, atomised (each vertex lies in q constraints).  The
    exact law of the special count is compared with the tail bound, the
    variance bound and the mean lower bound."""
    lam = Fraction(lam)
    delta = q
    n = k * m
    cond = check_chebyshev_condition(k, delta, q, lam).passed
    dist = disjoint_edge_law(k, q, m, lam)
    mean, var = dist.mean, dist.variance
    dk = delta * k
    var_bound = 4 * dk * (dk + 1) * n
    base = lam / (q - 1 + lam) * (1 - Fraction(1, dk))
    mean_lower = base * n
    tails, bounds, vac = {}, {}, {}
    probs = dist.probabilities
    for d in deltas:
        d = Fraction(d)
        tails[d] = sum((p for x, p in enumerate(probs) if abs(x - mean) >= d * mean), Fraction(0))
        bounds[d] = Fraction(4 * dk * (dk + 1)) / (d * d * base * base * n)
        vac[d] = bounds[d] >= 1
    ok = var <= var_bound and mean >= mean_lower and all(tails[d] <= bounds[d] for d in tails)
    return ChebyshevReport(m, n, cond, mean, var, var_bound, mean_lower, tails, bounds, vac, ok)


# --- total influence ---------------------------------------------------------

def total_influence_exact(csp, special, lam, v, value):
    """sum over u != v of |P(u special | v = value) - P(u special)|."""
    lam = Fraction(lam)
    total = Fraction(0)
    mu = gibbs_measure(csp, special, lam)
    digits = np.unravel_index(np.arange(len(mu.values)), csp.domains)
    pin = digits[v] == value
    den = mu.measure(pin)
    if den == 0:
        raise ZeroDivisionError("pinned value has measure zero")
    for u in range(csp.n):
        if u == v:
            continue
        ev = np.isin(digits[u], special.preimage(u, special.one[u]))
        total += abs(mu.measure(pin & ev) / den - mu.measure(ev))
    return total


def influence_bound(q, q_star, lam, delta, k):
    lam = Fraction(lam)
    D = q - q_star + q_star * lam
    return Fraction(1, 2 * q_star) * (q_star * lam) * (q - q_star) / D**2 \
        * Fraction(delta * k - 1, delta * k) ** 2


# --- marking -----------------------------------------------------------------

@dataclass
class MarkingResult:
    marked: frozenset
    clause_counts: list
    global_counts: tuple
    steps: int
    attempts: int
    seed: int


def _marking_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def verify_marking(formula, marked, params):
    """Independent recount of the marking requirements."""
    marked = set(marked)
    for vs, _ in formula.clauses:
        mk = len(marked.intersection(vs))
        if mk < params.k_mk or len(vs) - mk < params.k_umk:
            return False
    n = formula.n
    return len(marked) >= params.alpha * n and n - len(marked) >= params.beta * n


def moser_tardos_marking(formula, params, seed=0, failure=Fraction(1, 1024)):
    """Mark each variable independently with probability (1+alpha-beta)/2
    and resample the variables of any violated event (a clause with too
    few marked or unmarked variables, or the global count event, whose
    variables are all of V) until none is violated."""
    pre = check_cnf_condition(params)
    first = next(iter(pre.items))
    if pre.items[first] is not True:
        raise ConditionError("marking precondition fails: " + first)
    n = formula.n
    p = float((1 + params.alpha - params.beta) / 2)
    rng = _marking_rng(seed)
    attempts = max(1, ceil(log2(1 / Fraction(failure))))
    cap = 6 * n
    clauses = [np.array(vs, dtype=np.int64) for vs, _ in formula.clauses]
    need_mk, need_umk = params.alpha * n, params.beta * n
    total_steps = 0
    for attempt in range(1, attempts + 1):
        mark = rng.random(n) < p
        steps = 0
        while steps <= cap:
            bad = None
            for vs in clauses:
                mk = int(mark[vs].sum())
                if mk < params.k_mk or len(vs) - mk < params.k_umk:
                    bad = vs
                    break
            if bad is None:
                cnt = int(mark.sum())
                if cnt < need_mk or n - cnt < need_umk:
                    bad = np.arange(n)
            if bad is None:
                marked = frozenset(int(v) for v in np.flatnonzero(mark))
                counts = [(len(marked.intersection(vs.tolist())),
                           len(vs) - len(marked.intersection(vs.tolist()))) for vs in clauses]
                return MarkingResult(marked, counts, (len(marked), n - len(marked)),
                                     total_steps + steps, attempt, seed)
            mark[bad] = rng.random(len(bad)) < p
            steps += 1
        total_steps += steps
    raise MarkingError("all marking attempts exhausted",
                       {"attempts": attempts, "steps": total_steps, "cap": cap})
