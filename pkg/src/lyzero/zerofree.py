"""Root finding for partition polynomials and certified distance checks
against the segment [0, 1].

Roots are located by Aberth-Ehrlich iteration on each square-free factor,
polished by Newton steps and then enclosed in discs of radius
``d * |W_i|`` (the Weierstrass correction), inflated by a rigorous bound on
the Horner rounding error.  A union of m such discs disjoint from the rest
contains exactly m roots, so every root of the polynomial lies in one of the
reported discs.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
import sympy
from mpmath import iv

from .exact import base_partition_poly, factorized_partition_poly, gibbs_measure, is_exact


class RootFindingError(ValueError):
    pass


class ZeroFreenessError(ZeroDivisionError):
    def __init__(self, index, chain):
        super().__init__(f"partition function vanishes after constraint {index}")
        self.index = index
        self.chain = chain


@dataclass
class Root:
    value: mpmath.mpc
    radius: mpmath.mpf
    multiplicity: int = 1


@dataclass
class RootSet:
    roots: list
    precision_bits: int
    residual: mpmath.mpf
    converged: bool
    iterations: int = 0

    @property
    def count(self):
        return sum(r.multiplicity for r in self.roots)

    def max_radius(self):
        return max((r.radius for r in self.roots), default=mpmath.mpf(0))


def _squarefree_parts(coeffs):
    """[(integer coefficients low->high, multiplicity)] with zero roots split
    off as the factor x."""
    x = sympy.Symbol("x")
    poly = sympy.Poly(list(reversed(coeffs)), x, domain="ZZ")
    _, factors = poly.sqf_list()
    out = []
    for f, mult in factors:
        c = [int(a) for a in reversed(f.all_coeffs())]
        out.append((c, mult))
    return out


def _aberth(coeffs, prec, max_iter):
    """Simultaneous iteration on a square-free polynomial (low->high)."""
    d = len(coeffs) - 1
    with mpmath.workprec(prec):
        c = [mpmath.mpf(a) for a in coeffs]
        rev = c[::-1]
        drev = [rev[i] * (d - i) for i in range(d)]
        lead = abs(c[-1])
        bound = 1 + max(abs(a) / lead for a in c[:-1])
        # geometric-mean modulus is a better starting radius than the Cauchy bound
        rad = (abs(c[0]) / lead) ** (mpmath.mpf(1) / d)
        rad = min(bound, max(rad, mpmath.mpf(2) ** (-prec // 4)))
        z = [rad * mpmath.expj(2 * mpmath.pi * j / d + mpmath.mpf("0.4")) for j in range(d)]
        tol = mpmath.mpf(2) ** (-prec + 8)
        # past this point a correction that fails to halve is rounding noise
        noise = mpmath.mpf(2) ** (-prec // 2)
        it, prev = 0, mpmath.inf
        for it in range(1, max_iter + 1):
            biggest = 0
            for i in range(d):
                p = mpmath.polyval(rev, z[i])
                dp = mpmath.polyval(drev, z[i])
                if p == 0:
                    continue
                ratio = p / dp
                s = mpmath.fsum(1 / (z[i] - z[j]) for j in range(d) if j != i)
                w = ratio / (1 - ratio * s)
                z[i] -= w
                biggest = max(biggest, abs(w) / max(1, abs(z[i])))
            if biggest < tol or (biggest < noise and biggest > prev / 2):
                break
            prev = biggest
        for _ in range(2):
            for i in range(d):
                dp = mpmath.polyval(drev, z[i])
                if dp != 0:
                    z[i] -= mpmath.polyval(rev, z[i]) / dp
    return z, it


def _inclusion_radii(coeffs, z, prec):
    """Radii d*|W_i| plus a rigorous Horner error term, computed at a higher
    working precision and inflated slightly to absorb the remaining
    rounding."""
    d = len(coeffs) - 1
    wp = prec + 64
    with mpmath.workprec(wp):
        c = [mpmath.mpf(a) for a in coeffs]
        rev = c[::-1]
        unit = mpmath.mpf(2) ** (-wp + 1)
        radii = []
        for i in range(d):
            zi = z[i]
            p = abs(mpmath.polyval(rev, zi))
            scale = mpmath.fsum(abs(a) * abs(zi) ** m for m, a in enumerate(c))
            err = 2 * (d + 2) * unit * scale
            den = abs(c[-1])
            for j in range(d):
                if j != i:
                    den *= abs(zi - z[j])
            if den == 0:
                radii.append(mpmath.inf)
                continue
            radii.append(d * (p + err) / den * (1 + mpmath.mpf(2) ** -30))
    return radii


def _merge_overlaps(z, radii):
    """Where discs overlap, widen each member so that it covers the whole
    cluster (a cluster of m discs holds m roots, but not one per disc)."""
    d = len(z)
    cluster = list(range(d))

    def find(a):
        while cluster[a] != a:
            a = cluster[a]
        return a

    overlapping = False
    for i in range(d):
        for j in range(i + 1, d):
            if abs(z[i] - z[j]) <= radii[i] + radii[j]:
                cluster[find(i)] = find(j)
                overlapping = True
    if not overlapping:
        return radii, True
    groups = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    out = list(radii)
    for members in groups.values():
        if len(members) > 1:
            for i in members:
                out[i] = max(abs(z[i] - z[j]) + radii[j] for j in members)
    return out, False


def find_roots(poly, precision_bits=256, max_iter=400):
    if poly.degree < 1:
        raise RootFindingError("constant polynomial has no roots")
    roots, converged, iters = [], True, 0
    target = mpmath.mpf(2) ** (-precision_bits // 2)
    for coeffs, mult in _squarefree_parts(poly.coeffs):
        d = len(coeffs) - 1
        if d == 0:
            continue
        if d == 1:
            with mpmath.workprec(precision_bits + 64):
                z = [mpmath.mpc(mpmath.mpf(-coeffs[0]) / coeffs[1])]
            radii = _inclusion_radii(coeffs, z, precision_bits)
            ok = True
        else:
            z, it = _aberth(coeffs, precision_bits + 32, max_iter)
            iters = max(iters, it)
            radii = _inclusion_radii(coeffs, z, precision_bits)
            radii, ok = _merge_overlaps(z, radii)
        converged &= ok and all(r < target * max(1, abs(zi)) for zi, r in zip(z, radii))
        roots.extend(Root(mpmath.mpc(zi), mpmath.mpf(r), mult) for zi, r in zip(z, radii))
    with mpmath.workprec(precision_bits):
        residual = max(abs(poly.eval_mp(r.value, precision_bits)) for r in roots)
    return RootSet(roots, precision_bits, residual, bool(converged), iters)


# --- strip verdicts ---------------------------------------------------------

def _distance_interval(z):
    re, im = mpmath.mpf(z.real), mpmath.mpf(z.imag)
    if 0 <= re <= 1:
        a = abs(im)
        return iv.mpf([a, a])
    x, y = iv.mpf(re), iv.mpf(im)
    near = iv.mpf(0) if re < 0 else iv.mpf(1)
    return iv.sqrt((x - near) ** 2 + y ** 2)


def distance_to_unit_segment(z, prec=256):
    """Distance from ``z`` to [0, 1], rounded downward."""
    with mpmath.workprec(prec):
        old = iv.prec
        iv.prec = prec
        try:
            return mpmath.mpf(_distance_interval(mpmath.mpc(z)).a)
        finally:
            iv.prec = old


def _to_fraction(x):
    man, exp = mpmath.mpf(x).man_exp
    return Fraction(man) * Fraction(2) ** exp if exp >= 0 else Fraction(man, 2 ** -exp)


@dataclass
class StripVerdict:
    gamma: Fraction
    min_distance: mpmath.mpf
    max_radius: mpmath.mpf
    lower_bound: mpmath.mpf
    passed: bool
    status: str
    roots: RootSet = field(repr=False, default=None)

    def to_json(self):
        return {
            "gamma": str(self.gamma),
            "roots": [{"re": mpmath.nstr(r.value.real, 30), "im": mpmath.nstr(r.value.imag, 30),
                       "radius": mpmath.nstr(r.radius, 5), "multiplicity": r.multiplicity}
                      for r in self.roots.roots],
            "min_distance": mpmath.nstr(self.min_distance, 30),
            "lower_bound": mpmath.nstr(self.lower_bound, 30),
            "pass": self.passed,
            "status": self.status,
        }


def verify_strip(poly, gamma, precision_bits=256):
    """Pass iff every root disc stays at distance strictly more than
    ``gamma`` from [0, 1].  An enclosure straddling ``gamma`` is a
    fail-closed "boundary" verdict."""
    gamma = Fraction(gamma)
    rs = find_roots(poly, precision_bits)
    old = iv.prec
    iv.prec = precision_bits
    try:
        lo_best = hi_best = None
        centre = mpmath.inf
        for r in rs.roots:
            dist = _distance_interval(r.value)
            lo = mpmath.mpf(dist.a) - r.radius
            hi = mpmath.mpf(dist.b) + r.radius
            centre = min(centre, mpmath.mpf(dist.a))
            if lo_best is None or lo < lo_best:
                lo_best, hi_best = lo, hi
    finally:
        iv.prec = old
    lo_f = _to_fraction(lo_best)
    if lo_f > gamma:
        status = "pass"
    elif _to_fraction(hi_best) < gamma:
        status = "fail"
    else:
        status = "boundary"
    return StripVerdict(gamma, centre, rs.max_radius(), lo_best, status == "pass", status, rs)


# --- self-reduction ---------------------------------------------------------

@dataclass
class ReductionChain:
    ratios: list
    marginal_ratios: list
    violated: list
    flagged: list
    max_discrepancy: float
    base: object
    total: object

    def telescoped(self):
        acc = self.base
        for r in self.ratios:
            acc = acc * r
        return acc


def _evaluate(poly, lam):
    if is_exact(lam):
        return poly(Fraction(lam))
    return complex(poly.eval_mp(complex(lam)))


def _is_zero(poly, lam, value):
    if is_exact(lam):
        return value == 0
    return abs(value) <= 1e-12 * float(poly.abs_scale(complex(lam)))


def self_reduction_chain(csp, special, lam, constraint_order=None, tol=1e-12):
    """Ratios Z_i/Z_{i-1} computed from exact polynomials and, independently,
    as 1 - mu_{i-1}(c_i violated) from the exact Gibbs measure."""
    from .model import AtomicCsp

    order = list(range(len(csp.constraints))) if constraint_order is None else list(constraint_order)
    prev_poly = base_partition_poly(csp, special)
    prev = _evaluate(prev_poly, lam)
    if _is_zero(prev_poly, lam, prev):
        raise ZeroFreenessError(0, [])
    base = prev
    ratios, marg, viol, flagged = [], [], [], []
    worst = 0.0
    for i in range(1, len(order) + 1):
        prefix = AtomicCsp(csp.domains, [csp.constraints[j] for j in order[:i - 1]])
        cur_poly = factorized_partition_poly(
            AtomicCsp(csp.domains, [csp.constraints[j] for j in order[:i]]), special)
        cur = _evaluate(cur_poly, lam)
        if _is_zero(cur_poly, lam, cur):
            raise ZeroFreenessError(i, ratios)
        mu = gibbs_measure(prefix, special, lam)
        vs, fb = csp.constraints[order[i - 1]]
        digits = np.unravel_index(np.arange(len(mu.values)), csp.domains)
        mask = np.ones(len(mu.values), dtype=bool)
        for v, a in zip(vs, fb):
            mask &= digits[v] == a
        p_viol = mu.measure(mask)
        ratio = cur / prev
        ratios.append(ratio)
        marg.append(1 - p_viol)
        viol.append(p_viol)
        if abs(p_viol) >= 1:
            flagged.append(i)
        gap = abs(complex(ratio) - complex(1 - p_viol))
        # float measures lose digits in proportion to the cancellation in Z_{i-1}
        cond = 1.0 if is_exact(lam) else max(1.0, float(prev_poly.abs_scale(complex(lam))) / abs(prev))
        worst = max(worst, gap / max(1.0, abs(complex(ratio))) / cond)
        prev, prev_poly = cur, cur_poly
    if worst > tol:
        raise ArithmeticError(f"ratio routes disagree by {worst:.3e}")
    return ReductionChain(ratios, marg, viol, flagged, worst, base, prev)
