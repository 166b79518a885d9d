"""Numeric checkers for the sufficient conditions, the decomposition
schemes and the induction quantities N-hat / M-hat.

Every inequality is decided with outward-rounded interval arithmetic in the
log domain.  An item passes only when the interval is strictly on the
passing side; if it straddles, the precision is doubled up to a cap and the
item is finally reported as ``None`` (indeterminate, treated as a failure).
"""

import contextlib
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil

import mpmath
import numpy as np
from mpmath import iv

from .exact import is_exact, projected_measure, projected_weight_counts
from .model import make_coloring_projection

START_PREC = 128
MAX_PREC = 4096


class ConditionError(ValueError):
    pass


@contextlib.contextmanager
def _ivprec(p):
    old = iv.prec
    iv.prec = p
    try:
        yield
    finally:
        iv.prec = old


def _I(x):
    if isinstance(x, Fraction):
        return iv.mpf(x.numerator) / x.denominator
    return iv.mpf(x)


def decide(build):
    """``build()`` returns (lhs, rhs) intervals for the claim lhs <= rhs.
    Returns (verdict, lhs_mid, rhs_mid)."""
    prec = START_PREC
    while True:
        with _ivprec(prec):
            lhs, rhs = build()
            verdict = lhs < rhs
            if verdict is None and lhs > rhs:
                verdict = False
            mids = (mpmath.mpf(lhs.mid), mpmath.mpf(rhs.mid))
        if verdict is not None or prec >= MAX_PREC:
            return verdict, mids[0], mids[1]
        prec *= 2


@dataclass
class ConditionReport:
    condition: str
    items: dict
    quantities: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v is True for v in self.items.values())

    @property
    def indeterminate(self):
        return [k for k, v in self.items.items() if v is None]

    def to_json(self):
        return {"condition": self.condition, "pass": self.passed,
                "items": self.items, "extra": self.extra,
                "quantities": {k: mpmath.nstr(v, 20) if isinstance(v, mpmath.mpf) else str(v)
                               for k, v in self.quantities.items()}}


def _add(report, name, build):
    verdict, lhs, rhs = decide(build)
    report.items[name] = verdict
    report.quantities[name + ".lhs"] = lhs
    report.quantities[name + ".rhs"] = rhs


def _in_disk(lam, centre, radius):
    """|lam - centre| <= radius decided exactly (floats are dyadic)."""
    if lam is None:
        return True
    z = complex(lam) if not is_exact(lam) else lam
    re = Fraction(z.real) if not is_exact(z) else Fraction(z)
    im = Fraction(z.imag) if not is_exact(z) else Fraction(0)
    d2 = (re - Fraction(centre)) ** 2 + im ** 2
    r2 = Fraction(radius) ** 2
    if d2 == r2:
        return None
    return d2 < r2


def _iroot_floor(x, num, den):
    """Largest integer b with b**den <= x**num."""
    target = x ** num
    b = int(round(float(x) ** (num / den)))
    while b ** den > target:
        b -= 1
    while (b + 1) ** den <= target:
        b += 1
    return b


# --- colouring ---------------------------------------------------------------

@dataclass(frozen=True)
class ColoringParams:
    k: int
    delta: int
    q: int
    B: int
    s: int
    lambda_c: Fraction
    gamma: Fraction
    rho: int


def coloring_params(k, delta, q, B=None, lambda_c=1):
    if min(k, delta, q) < 1:
        raise ConditionError("parameters must be positive")
    if B is None:
        B = _iroot_floor(q, 2, 5)
    if B < 1 or q <= B:
        raise ConditionError("need 1 <= B < q")
    return ColoringParams(k, delta, q, B, (q - 1) // B, Fraction(lambda_c),
                          Fraction(1, 16 * delta**2 * k**5), 608 * q * delta**2 * k**5)


def derive_coloring_params(k, delta, lambda_c=1):
    """q = ceil(700 * delta^(5/(k-10))), B = floor(q^(2/5)), s = floor((q-1)/B)."""
    if k < 50:
        raise ConditionError("the derivation needs k >= 50")
    if delta < 1:
        raise ConditionError("delta must be positive")
    e = k - 10
    target = 700**e * delta**5
    q = int(700 * delta ** (5 / e))
    while q**e < target:
        q += 1
    while q > 1 and (q - 1) ** e >= target:
        q -= 1
    return coloring_params(k, delta, q, lambda_c=lambda_c)


def check_coloring_condition(p, lam=None):
    k, D, q, s = p.k, p.delta, p.q, p.s
    rep = ConditionReport("coloring", {})
    if s < 1:
        rep.items["s^k >= 608e q^2 D^3 k^5"] = False
        rep.items["16e^2 D^2 k^4 q (4s/q)^k <= 1"] = False
    else:
        _add(rep, "s^k >= 608e q^2 D^3 k^5", lambda: (
            iv.log(608) + 1 + 2 * iv.log(q) + 3 * iv.log(D) + 5 * iv.log(k), k * iv.log(s)))
        _add(rep, "16e^2 D^2 k^4 q (4s/q)^k <= 1", lambda: (
            iv.log(16) + 2 + 2 * iv.log(D) + 4 * iv.log(k) + iv.log(q)
            + k * (iv.log(4 * s) - iv.log(q)), iv.mpf(0)))
    in_range = Fraction(0) <= p.lambda_c <= 1
    rep.items["lambda_c in [0,1] and |lambda - lambda_c| <= gamma"] = \
        (in_range and _in_disk(lam, p.lambda_c, p.gamma)) if in_range else False
    rep.quantities.update(q=q, B=p.B, s=s, gamma=p.gamma, rho=p.rho)
    return rep


# --- CNF ---------------------------------------------------------------------

@dataclass(frozen=True)
class CnfParams:
    k: int
    delta: int
    k_mk: int
    k_umk: int
    lambda_c: Fraction = Fraction(1)

    def __post_init__(self):
        if self.k_mk < 1 or self.k_umk < 1 or self.k_mk + self.k_umk > self.k:
            raise ConditionError("need k_mk, k_umk >= 1 and k_mk + k_umk <= k")
        if self.lambda_c < 0:
            raise ConditionError("lambda_c must be non-negative")

    @property
    def alpha(self):
        return Fraction(self.k_mk, self.k)

    @property
    def beta(self):
        return Fraction(self.k_umk, self.k)

    @property
    def gamma(self):
        return Fraction(1, 2000 * self.delta**2 * self.k**5)

    @property
    def s_cnf(self):
        return 2000 * self.delta**2 * self.k**5


def cnf_params_from_fractions(k, delta, alpha, beta, lambda_c=1):
    """Round the target fractions up to whole per-clause counts."""
    a, b = Fraction(str(alpha)), Fraction(str(beta))
    return CnfParams(k, delta, ceil(a * k), ceil(b * k), Fraction(lambda_c))


def check_cnf_condition(p, lam=None, formula=None, marked=None):
    k, D = p.k, p.delta
    a, b = p.alpha, p.beta
    g = p.gamma
    rep = ConditionReport("cnf", {})
    if formula is not None and marked is not None:
        rep.items["marked/unmarked counts"] = marking_counts_ok(formula, marked, p)
    _add(rep, "2^k >= (4eDk)^(6ln2(1+a-b)/(1-a-b)^2)", lambda: (
        6 * iv.log(2) * _I(1 + a - b) / _I((1 - a - b) ** 2) * (iv.log(4 * D * k) + 1),
        k * iv.log(2)))
    top = max(Fraction(1), p.lambda_c + g)
    bottom = 1 + p.lambda_c - g
    if bottom <= 0:
        rep.items["(max{1,lc+g}/(1+lc-g))^k_mk <= 1/(16e^3 D^2 k^4)"] = False
    else:
        _add(rep, "(max{1,lc+g}/(1+lc-g))^k_mk <= 1/(16e^3 D^2 k^4)", lambda: (
            p.k_mk * (iv.log(_I(top)) - iv.log(_I(bottom))),
            -(iv.log(16) + 3 + 2 * iv.log(D) + 4 * iv.log(k))))
    _add(rep, "2^k_umk >= 4000e D^3 k^5", lambda: (
        iv.log(4000) + 1 + 3 * iv.log(D) + 5 * iv.log(k), p.k_umk * iv.log(2)))
    if lam is not None:
        rep.items["|lambda - lambda_c| <= gamma"] = _in_disk(lam, p.lambda_c, g)
    closed, lhs, rhs = decide(lambda: (
        12 * iv.log(D) / iv.log(2) + 24 * iv.log(k) / iv.log(2) + 57, iv.mpf(k)))
    rep.extra["k >= 12log2(D) + 24log2(k) + 57"] = closed
    rep.quantities.update(alpha=a, beta=b, gamma=g, s=p.s_cnf, closed_form_rhs=lhs)
    return rep


def marking_counts_ok(formula, marked, p):
    marked = set(marked)
    for vs, _ in formula.clauses:
        mk = sum(v in marked for v in vs)
        if mk < p.k_mk or len(vs) - mk < p.k_umk:
            return False
    n = formula.n
    return len(marked) >= p.alpha * n and n - len(marked) >= p.beta * n


# --- concentration conditions ----------------------------------------------

def _zeta_iv(r):
    return 2 * iv.log(2 - r) / (iv.log(1 / r) - iv.log(2 - r))


def zeta(r_max, prec=128):
    """2 ln(2 - r) / (ln(1/r) - ln(2 - r))."""
    r = Fraction(r_max) if isinstance(r_max, (int, Fraction)) else r_max
    if not 0 < r < 1:
        raise ConditionError("r_max must lie in (0, 1)")
    with mpmath.workprec(prec):
        r = mpmath.mpf(r.numerator) / r.denominator if isinstance(r, Fraction) else mpmath.mpf(r)
        return 2 * mpmath.log(2 - r) / (mpmath.log(1 / r) - mpmath.log(2 - r))


def _positive_lambda(lam):
    lam = Fraction(lam) if isinstance(lam, (int, float, Fraction)) else None
    if lam is None or lam <= 0:
        raise ConditionError("lambda must be a positive real")
    return lam


def check_chebyshev_condition(k, delta, q, lam=1):
    lam = _positive_lambda(lam)
    r = max(Fraction(1), lam) / (q - 1 + lam)
    rep = ConditionReport("chebyshev", {})
    _add(rep, "(8e)^3 max{1,1/l} r^(k-1) (Dk+1)^(2+zeta) <= 1", lambda: (
        3 * (iv.log(8) + 1) + iv.log(_I(max(Fraction(1), 1 / lam)))
        + (k - 1) * iv.log(_I(r)) + (2 + _zeta_iv(_I(r))) * iv.log(delta * k + 1), iv.mpf(0)))
    rep.quantities.update(r_max=r, zeta=zeta(r))
    return rep


def check_clt_condition(k, delta, q, q_star, lam=1):
    lam = _positive_lambda(lam)
    if not 0 < q_star < q:
        raise ConditionError("need 0 < q* < q")
    D = q - q_star + q_star * lam
    r = max(Fraction(1), lam) / D
    rep = ConditionReport("clt", {})
    _add(rep, "16e^2 D^2/(l(q-q*)) r^(2(k-1)/(2+zeta)) (Dk+1)^4 <= 1", lambda: (
        iv.log(16) + 2 + 2 * iv.log(_I(D)) - iv.log(_I(lam)) - iv.log(q - q_star)
        + 2 * (k - 1) / (2 + _zeta_iv(_I(r))) * iv.log(_I(r)) + 4 * iv.log(delta * k + 1),
        iv.mpf(0)))
    rep.quantities.update(r_max=r, zeta=zeta(r))
    return rep


def lclt_probability_bounds(k, q, B1, B2):
    """Upper bounds on p_proj and p_cond from the bucket-size extremes of
    the round-robin two-step projection (uniform colourings)."""
    proj = Fraction((-(-B1 // B2) + 1) * (-(-(q - 1) // B1)), q) ** k
    low = (B1 // B2 - 1) * ((q - 1) // B1)
    cond = Fraction(1, low) ** k if low > 0 else Fraction(1)
    return proj, cond


def check_lclt_condition(k, delta, q, q_star, lam, B1, B2):
    lam = _positive_lambda(lam)
    if not 1 <= B2 <= B1 <= q:
        raise ConditionError("need 1 <= B2 <= B1 <= q")
    if not 0 < q_star < q:
        raise ConditionError("need 0 < q* < q")
    p_proj, p_cond = lclt_probability_bounds(k, q, B1, B2)
    D = q - q_star + q_star * lam
    r = max(Fraction(1), lam) / D
    small = min(Fraction(q - q_star), q_star * lam)
    rep = ConditionReport("lclt", {})
    _add(rep, "2e^2 p_proj (Dk)^2 <= 1", lambda: (
        iv.log(2) + 2 + iv.log(_I(p_proj)) + 2 * iv.log(delta * k), iv.mpf(0)))
    _add(rep, "2e p_cond q D k <= 1", lambda: (
        iv.log(2) + 1 + iv.log(_I(p_cond)) + iv.log(q * delta * k), iv.mpf(0)))
    _add(rep, "(8e)^3 D/min r^(k-1) (Dk+1)^(2+zeta) <= 1", lambda: (
        3 * (iv.log(8) + 1) + iv.log(_I(D / small)) + (k - 1) * iv.log(_I(r))
        + (2 + _zeta_iv(_I(r))) * iv.log(delta * k + 1), iv.mpf(0)))
    rep.quantities.update(p_proj=p_proj, p_cond=p_cond, r_max=r, zeta=zeta(r))
    return rep


# --- decomposition schemes --------------------------------------------------

@dataclass
class DecompositionScheme:
    """``values[v][x]`` is b_v of bucket x; ``bottom[v]`` is b_v(bottom)."""
    values: list
    bottom: list
    tag: str

    def normalisation_error(self):
        return max(abs(complex(sum(row) + b) - 1) for row, b in zip(self.values, self.bottom))

    def is_exactly_normalised(self):
        return all(sum(row) + b == 1 for row, b in zip(self.values, self.bottom))

    def as_complex(self):
        return DecompositionScheme([[complex(x) for x in row] for row in self.values],
                                   [complex(b) for b in self.bottom], self.tag)


def _scalar(lam):
    return Fraction(lam) if is_exact(lam) else complex(lam)


def build_coloring_decomposition(p, lam, n=1):
    lam = _scalar(lam)
    den = p.q - 1 + lam
    if den == 0:
        raise ConditionError("q - 1 + lambda vanishes")
    proj = make_coloring_projection(p.q, p.B)
    sizes = proj.preimage_sizes(0)
    shrink = 1 - Fraction(1, p.rho)
    row = [0 * lam] + [Fraction(sz) / den * shrink if is_exact(lam) else sz / den * float(shrink)
                       for sz in sizes[1:]]
    bottom = lam / den + (p.q - 1) / (p.rho * den) if not is_exact(lam) else \
        lam / den + Fraction(p.q - 1) / (p.rho * den)
    return DecompositionScheme([list(row) for _ in range(n)], [bottom] * n, "coloring")


def build_cnf_decomposition(p, lam, proj, prec=64):
    lam_c = _scalar(lam)
    values, bottom = [], []
    with mpmath.workprec(prec):
        E = mpmath.exp(mpmath.mpf(1) / p.s_cnf)
        lam_m = mpmath.mpc(lam_c.real, lam_c.imag) if not is_exact(lam_c) else \
            mpmath.mpf(lam_c.numerator) / lam_c.denominator
        D = 1 + E * (lam_m - 1) / 2
        if D == 0:
            raise ConditionError("degenerate CNF scheme denominator")
        for v in range(proj.n):
            if proj.one[v] is None:
                values.append([1])
                bottom.append(0)
            else:
                zero = (1 - E / 2) / D
                values.append([complex(zero), complex(lam_m * zero)])
                bottom.append(complex(lam_m * (E - 1) / D))
    return DecompositionScheme(values, bottom, "cnf")


# --- induction quantities ---------------------------------------------------

@dataclass
class InductionBounds:
    n_hat: object
    m_hat: object
    mode: str
    log_product: mpmath.mpf
    product_ok: object
    details: dict = field(default_factory=dict)

    @property
    def product(self):
        return mpmath.exp(self.log_product)


class WellDefinednessError(ZeroDivisionError):
    def __init__(self, u, tau):
        super().__init__(f"conditional marginal at variable {u} undefined under pinning {tau}")
        self.u, self.tau = u, tau


def _product_check(n_hat, m_hat, delta, k):
    def build():
        if n_hat == 0:
            return iv.mpf(-mpmath.inf), iv.log(iv.mpf(1) / 4)
        nh = _I(n_hat) if isinstance(n_hat, Fraction) else iv.mpf(n_hat)
        mh = _I(m_hat) if isinstance(m_hat, Fraction) else iv.mpf(m_hat)
        return (iv.log(4 * delta**2 * k**4) + 1 + iv.log(nh) + 4 * delta**2 * k**5 * iv.log(mh),
                iv.log(iv.mpf(1) / 4))
    verdict, lhs, _ = decide(build)
    return lhs, verdict


def adaptive_norms(psi, counts, scheme, tol=1e-13):
    """For every variable u: max over extendable pinnings of V - u of
    sum_x |psi_u^{tau,bottom}(x)|.  ``counts`` marks which projected
    configurations are reachable by satisfying assignments."""
    arr = psi.array()
    cnt = np.asarray(counts).reshape(psi.dims)
    exact = arr.dtype == object
    out = []
    for u in range(len(psi.dims)):
        rows = np.moveaxis(arr, u, -1).reshape(-1, psi.dims[u])
        ext = np.moveaxis(cnt, u, -1).reshape(-1, psi.dims[u]).sum(axis=1) > 0
        b = scheme.values[u]
        bot = scheme.bottom[u]
        best = 0
        for idx in np.flatnonzero(ext):
            row = rows[idx]
            den = row.sum()
            if (den == 0) if exact else abs(den) <= tol * sum(abs(x) for x in row):
                tau = np.unravel_index(idx, tuple(d for i, d in enumerate(psi.dims) if i != u))
                raise WellDefinednessError(u, tuple(int(t) for t in tau))
            if bot == 0:
                continue
            total = sum(abs((row[x] / den - b[x]) / bot) for x in range(len(row)))
            best = max(best, total)
        out.append(best)
    return out


def compute_nhat_mhat_exact(csp, proj, lam, scheme, psi=None, counts=None, delta=None, k=None):
    """Exact N-hat and M-hat.  The projected measure is that of ``csp``
    without its last constraint; the maximum for N-hat runs over all of
    ``csp``'s constraints.  ``psi``/``counts`` may be supplied when they
    were computed by other means (e.g. inclusion-exclusion)."""
    if psi is None:
        reduced = csp.subset(range(len(csp.constraints) - 1)) if csp.constraints else csp
        psi = projected_measure(reduced, proj, lam)
        counts = projected_weight_counts(reduced, proj)
    A = adaptive_norms(psi, counts, scheme)
    terms = [sum(abs(x) for x in scheme.values[u]) + abs(scheme.bottom[u]) * A[u]
             for u in range(len(A))]
    m_hat = max(terms)
    n_hat = 0
    for vs, fb in csp.constraints:
        prod = 1
        for u, a in zip(vs, fb):
            x = proj.bucket_of[u][a]
            prod *= abs(scheme.values[u][x]) + abs(scheme.bottom[u]) * A[u]
        n_hat = max(n_hat, prod)
    delta = csp.delta if delta is None else delta
    k = csp.k if k is None else k
    log_product, ok = _product_check(n_hat, m_hat, max(delta, 1), max(k, 1))
    return InductionBounds(n_hat, m_hat, "exact-on-instance", log_product, ok,
                           {"adaptive_norms": A})


def coloring_bound_values(p):
    """The closed-form N-hat and M-hat bounds as exact/mp numbers."""
    n_hat = mpmath.e * p.q * (mpmath.mpf(4 * p.s) / p.q) ** p.k
    m_hat = 1 + Fraction(1, 4 * p.delta**2 * p.k**5)
    return n_hat, m_hat


def closed_form_bounds(p):
    if isinstance(p, ColoringParams):
        rep = check_coloring_condition(p)
        if not rep.passed:
            raise ConditionError(f"coloring condition fails: {rep.items}")
        k, D = p.k, p.delta

        def n_log():
            return 1 + iv.log(p.q) + k * (iv.log(4 * p.s) - iv.log(p.q))
    elif isinstance(p, CnfParams):
        rep = check_cnf_condition(p)
        if not rep.passed:
            raise ConditionError(f"cnf condition fails: {rep.items}")
        k, D = p.k, p.delta
        top = max(Fraction(1), p.lambda_c + p.gamma)
        bottom = 1 + p.lambda_c - p.gamma

        def n_log():
            return 1 + p.k_mk * (iv.log(_I(top)) - iv.log(_I(bottom)))
    else:
        raise TypeError(type(p))
    m_hat = 1 + Fraction(1, 4 * D**2 * k**5)

    def build():
        return (iv.log(4 * D**2 * k**4) + 1 + n_log() + 4 * D**2 * k**5 * iv.log(_I(m_hat)),
                iv.log(iv.mpf(1) / 4))
    ok, lhs, _ = decide(build)
    with _ivprec(START_PREC):
        n_hat = mpmath.exp(mpmath.mpf(n_log().mid))
    return InductionBounds(n_hat, m_hat, "closed-form-bound", lhs, ok)
