"""Exact partition polynomials, complex Gibbs / projected measures and exact
laws.  This is the oracle layer: everything here is either brute force or an
exact algebraic identity, and the rest of the package is tested against it.

Configurations are indexed in mixed radix with variable 0 most significant,
which matches ``numpy.reshape(values, dims)``.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb

import mpmath
import numpy as np

try:  # GMP multiplication for the packed products; plain ints otherwise
    from gmpy2 import mpz as _mpz
except ImportError:  # pragma: no cover
    _mpz = int

from .model import AtomicCsp, InstanceError

DEFAULT_BUDGET = 10**8
CHUNK = 1 << 20


class BudgetError(RuntimeError):
    pass


class ZeroMeasureError(ZeroDivisionError):
    pass


# --- polynomials ------------------------------------------------------------

def _trim(coeffs):
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs or [0]


def poly_mul(a, b):
    """Product of two integer coefficient lists.  Non-negative inputs go
    through Kronecker substitution so the work lands in CPython's big-int
    multiply."""
    if not a or not b:
        return [0]
    if min(a) >= 0 and min(b) >= 0 and len(a) * len(b) > 64:
        bound = max(a) * max(b) * min(len(a), len(b))
        bits = bound.bit_length() + 1
        pack = lambda cs: int.from_bytes(b"".join(
            c.to_bytes((bits + 7) // 8, "little") for c in cs), "little")
        width = (bits + 7) // 8
        prod = int(_mpz(pack(a)) * _mpz(pack(b)))
        raw = prod.to_bytes(width * (len(a) + len(b) - 1) + 1, "little")
        return [int.from_bytes(raw[i * width:(i + 1) * width], "little")
                for i in range(len(a) + len(b) - 1)]
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


class PartitionPolynomial:
    """Integer-coefficient polynomial; ``coeffs[m]`` multiplies ``x**m``."""

    def __init__(self, coeffs, var="lambda"):
        self.coeffs = _trim(int(c) for c in coeffs)
        self.var = var

    @property
    def degree(self):
        return len(self.coeffs) - 1 if any(self.coeffs) else -1

    def __call__(self, x):
        acc = 0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def eval_mp(self, x, prec=256):
        with mpmath.workprec(prec):
            return mpmath.polyval(self.coeffs[::-1], mpmath.mpmathify(x))

    def abs_scale(self, x):
        """sum |c_m| |x|^m, the natural scale for relative zero tests."""
        r = abs(x)
        return sum(abs(c) * r**m for m, c in enumerate(self.coeffs))

    def __mul__(self, other):
        return PartitionPolynomial(poly_mul(self.coeffs, other.coeffs), self.var)

    def __pow__(self, e):
        result = PartitionPolynomial([1], self.var)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, PartitionPolynomial):
            return self.coeffs == other.coeffs and self.var == other.var
        return NotImplemented

    def __hash__(self):
        return hash((tuple(self.coeffs), self.var))

    def __repr__(self):
        return f"PartitionPolynomial({self.coeffs}, var={self.var!r})"

    def to_json(self):
        return [str(c) for c in self.coeffs]

    @classmethod
    def from_json(cls, data, var="lambda"):
        return cls([int(c) for c in data], var)


def single_edge_closed_form(k, q, q_star=1):
    """Colourings of one k-edge with no monochromatic colour, weighted by
    lam per vertex in the special class of size ``q_star``:
    (q*lam + q - q*)^k - q*lam^k - (q - q*)."""
    if k < 2 or q < 2:
        raise InstanceError("need k >= 2 and q >= 2")
    rest = q - q_star
    coeffs = [comb(k, m) * q_star**m * rest**(k - m) for m in range(k + 1)]
    coeffs[k] -= q_star
    coeffs[0] -= rest
    return PartitionPolynomial(coeffs)


# --- enumeration ------------------------------------------------------------

def _space(dims):
    size = 1
    for d in dims:
        size *= d
    return size


def _chunks(dims, chunk=CHUNK):
    size = _space(dims)
    for start in range(0, size, chunk):
        idx = np.arange(start, min(size, start + chunk), dtype=np.int64)
        yield idx, np.unravel_index(idx, dims) if dims else ()


def _violation_counts(csp, digits, length):
    counts = np.zeros(length, dtype=np.int64)
    for vs, fb in csp.constraints:
        mask = np.ones(length, dtype=bool)
        for v, a in zip(vs, fb):
            mask &= digits[v] == a
        counts += mask
    return counts


def _special_counts(proj, digits, length):
    counts = np.zeros(length, dtype=np.int64)
    for v in range(proj.n):
        if proj.one[v] is None:
            continue
        hit = np.array([b == proj.one[v] for b in proj.bucket_of[v]])
        counts += hit[digits[v]]
    return counts


def _check_budget(csp, budget):
    size = csp.space_size()
    if size > budget:
        raise BudgetError(f"state space {size} exceeds enumeration budget {budget}")
    return size


def brute_force_partition_poly(csp, special, budget=DEFAULT_BUDGET):
    _check_budget(csp, budget)
    coeffs = np.zeros(csp.n + 1, dtype=np.int64)
    for idx, digits in _chunks(csp.domains):
        sat = _violation_counts(csp, digits, len(idx)) == 0
        m = _special_counts(special, digits, len(idx))[sat]
        coeffs += np.bincount(m, minlength=csp.n + 1)
    return PartitionPolynomial([int(c) for c in coeffs])


def components(csp):
    """Variable sets of the connected components of the constraint
    hypergraph (isolated variables are singleton components)."""
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
    for v in range(csp.n):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def restrict(csp, proj, variables):
    """Sub-instance on ``variables`` (re-indexed 0..), keeping constraints
    fully inside it."""
    index = {v: i for i, v in enumerate(variables)}
    cons = [([index[v] for v in vs], fb) for vs, fb in csp.constraints
            if all(v in index for v in vs)]
    sub = AtomicCsp([csp.domains[v] for v in variables], cons)
    from .model import ProjectionScheme
    sp = ProjectionScheme([proj.bucket_of[v] for v in variables],
                          [proj.one[v] for v in variables])
    return sub, sp


def _edge_pattern(csp, proj):
    """If ``csp`` is the atomisation of one hyperedge over all of its
    variables with identical special sets, return (k, q, q_star)."""
    if not csp.constraints or len(csp.constraints) != csp.domains[0]:
        return None
    q, k = csp.domains[0], csp.n
    if k < 2 or any(d != q for d in csp.domains):
        return None
    if any(sorted(vs) != list(range(k)) or len(set(fb)) != 1 for vs, fb in csp.constraints):
        return None
    if sorted(fb[0] for _, fb in csp.constraints) != list(range(q)):
        return None
    specials = {tuple(proj.is_special(v, a) for a in range(q)) for v in range(k)}
    if len(specials) != 1:
        return None
    return k, q, sum(next(iter(specials)))


def factorized_partition_poly(csp, special, budget=DEFAULT_BUDGET):
    """Product over connected components; single atomised hyperedges use the
    closed form, everything else is enumerated."""
    total = PartitionPolynomial([1])
    for comp in components(csp):
        sub, sp = restrict(csp, special, comp)
        if not sub.constraints:
            part = PartitionPolynomial([1])
            for v in range(sub.n):
                hits = sum(sp.is_special(v, a) for a in range(sub.domains[v]))
                part = part * PartitionPolynomial([sub.domains[v] - hits, hits])
        else:
            pattern = _edge_pattern(sub, sp)
            if pattern is not None:
                part = single_edge_closed_form(*pattern)
            else:
                if sub.space_size() > budget:
                    raise BudgetError(f"component {comp} has {sub.space_size()} states, budget {budget}")
                part = brute_force_partition_poly(sub, sp, budget)
        total = total * part
    return total


def base_partition_poly(csp, special):
    """Z with every constraint dropped (the self-reduction base case)."""
    return factorized_partition_poly(AtomicCsp(csp.domains, []), special)


# --- measures ---------------------------------------------------------------

def is_exact(x):
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass
class ComplexMeasure:
    values: np.ndarray
    dims: tuple

    def total(self):
        return self.values.sum()

    def array(self):
        return self.values.reshape(self.dims)

    def __getitem__(self, config):
        return self.values[np.ravel_multi_index(tuple(config), self.dims)]

    def measure(self, mask):
        return self.values[mask].sum()

    def l1(self, other):
        return float(np.abs((self.values - other.values).astype(complex)).sum())

    def support(self):
        return np.flatnonzero(self.values != 0)

    def marginal(self, v):
        a = self.array()
        axes = tuple(i for i in range(len(self.dims)) if i != v)
        return a.sum(axis=axes)


def _powers(lam, top):
    if is_exact(lam):
        lam = Fraction(lam)
        return np.array([lam**m for m in range(top + 1)], dtype=object)
    return np.power(complex(lam), np.arange(top + 1))


def _check_nonzero(Z, lam, scale):
    if is_exact(lam):
        if Z == 0:
            raise ZeroMeasureError("measure undefined at zero of Z")
    elif abs(Z) <= 1e-12 * scale:
        raise ZeroMeasureError(f"measure undefined at zero of Z (|Z|={abs(Z):.3e})")


def _weights(csp, proj, lam, budget):
    _check_budget(csp, budget)
    powers = _powers(lam, csp.n)
    size = csp.space_size()
    if powers.dtype == object:
        w = np.zeros(size, dtype=object)
        w[:] = Fraction(0)
    else:
        w = np.zeros(size, dtype=complex)
    for idx, digits in _chunks(csp.domains):
        sat = _violation_counts(csp, digits, len(idx)) == 0
        m = _special_counts(proj, digits, len(idx))
        chunk = powers[m]
        chunk[~sat] = 0
        w[idx] = chunk
    return w


def _normalise(w, lam, dims):
    Z = w.sum()
    scale = np.abs(w.astype(complex)).sum() if w.dtype == object else np.abs(w).sum()
    _check_nonzero(Z, lam, scale)
    return ComplexMeasure(w / Z, tuple(dims))


def gibbs_measure(csp, special, lam, budget=DEFAULT_BUDGET):
    return _normalise(_weights(csp, special, lam, budget), lam, csp.domains)


def pushforward(values, dims, proj):
    """Push a measure on the original space forward along ``proj``."""
    pdims = proj.bucket_counts
    maps = [np.array(row) for row in proj.bucket_of]
    size = _space(pdims)
    exact = values.dtype == object
    out = np.zeros(size, dtype=object if exact else complex)
    if exact:
        out[:] = Fraction(0)
    for idx, digits in _chunks(tuple(dims)):
        target = np.ravel_multi_index(tuple(maps[v][d] for v, d in enumerate(digits)), pdims) \
            if pdims else np.zeros(len(idx), dtype=np.int64)
        vals = values[idx]
        if exact:
            for t, x in zip(target, vals):
                if x:
                    out[t] += x
        else:
            out += np.bincount(target, weights=vals.real, minlength=size)
            out += 1j * np.bincount(target, weights=vals.imag, minlength=size)
    return ComplexMeasure(out, tuple(pdims))


def projected_measure(csp, proj, lam, budget=DEFAULT_BUDGET):
    """Pushforward of the Gibbs measure whose field sits on ``proj``'s
    distinguished bucket."""
    mu = gibbs_measure(csp, proj, lam, budget)
    return pushforward(mu.values, csp.domains, proj)


def projected_weight_counts(csp, proj, budget=DEFAULT_BUDGET):
    """For each projected configuration, the number of satisfying
    assignments that project onto it (exact integers)."""
    _check_budget(csp, budget)
    pdims = proj.bucket_counts
    maps = [np.array(row) for row in proj.bucket_of]
    out = np.zeros(_space(pdims), dtype=np.int64)
    for idx, digits in _chunks(csp.domains):
        sat = _violation_counts(csp, digits, len(idx)) == 0
        target = np.ravel_multi_index(tuple(maps[v][d] for v, d in enumerate(digits)), pdims)
        out += np.bincount(target[sat], minlength=len(out))
    return out


def coloring_projected_counts(h, q, proj, edge_colours=None):
    """Proper colourings of ``h`` projecting onto each bucket configuration,
    by inclusion-exclusion over sets of monochromatic edges.  Cost is
    2^|E| times the projected space, independent of q.

    ``edge_colours`` optionally restricts, per edge, which monochromatic
    colours are forbidden (an edge then stands for only some of its atomic
    constraints)."""
    pdims = proj.bucket_counts
    size = _space(pdims)
    digits = np.unravel_index(np.arange(size), pdims)
    sizes = [np.array(proj.preimage_sizes(v), dtype=object) for v in range(h.n)]
    per_vertex = [sizes[v][digits[v]] for v in range(h.n)]
    edges = list(h.edges)
    allowed = [set(range(q)) if edge_colours is None else set(edge_colours[i])
               for i in range(len(edges))]
    counts = np.zeros(size, dtype=object)
    counts[:] = 0
    for r in range(len(edges) + 1):
        for F in combinations(range(len(edges)), r):
            parent = {}

            def find(x):
                while parent.setdefault(x, x) != x:
                    x = parent[x]
                return x

            for i in F:
                e = edges[i]
                for v in e[1:]:
                    parent[find(v)] = find(e[0])
            groups, colours = {}, {}
            for v in parent:
                groups.setdefault(find(v), []).append(v)
            for i in F:
                root = find(edges[i][0])
                colours[root] = colours.get(root, allowed[i]) & allowed[i]
            term = np.ones(size, dtype=object)
            for root, g in groups.items():
                same = np.ones(size, dtype=bool)
                for v in g[1:]:
                    same &= digits[v] == digits[g[0]]
                # colours the whole group may share, per bucket of g[0]
                shared = np.zeros(pdims[g[0]], dtype=object)
                for c in colours[root]:
                    shared[proj.bucket_of[g[0]][c]] += 1
                term = term * np.where(same, shared[digits[g[0]]], 0)
            for v in range(h.n):
                if v not in parent:
                    term = term * per_vertex[v]
            counts = counts + term if r % 2 == 0 else counts - term
    return counts


def measure_from_counts(counts, dims, proj, lam):
    """Projected measure from per-configuration colouring counts."""
    size = _space(dims)
    digits = np.unravel_index(np.arange(size), dims)
    m = np.zeros(size, dtype=np.int64)
    for v in range(len(dims)):
        if proj.one[v] is not None:
            m += digits[v] == proj.one[v]
    powers = _powers(lam, len(dims))
    w = powers[m] * counts
    if w.dtype != object:
        w = w.astype(complex)
    elif not is_exact(lam):
        w = w.astype(complex)
    return _normalise(w, lam, dims)


def poly_from_counts(counts, dims, proj):
    size = _space(dims)
    digits = np.unravel_index(np.arange(size), dims)
    coeffs = [0] * (len(dims) + 1)
    for i in range(size):
        m = sum(1 for v in range(len(dims)) if digits[v][i] == proj.one[v])
        coeffs[m] += int(counts[i])
    return PartitionPolynomial(coeffs)


# --- exact laws -------------------------------------------------------------

class ExactDistribution:
    """Law on {0..len(weights)-1} with P(m) = weights[m] / total."""

    def __init__(self, weights, total=None):
        self.weights = [Fraction(w) for w in weights]
        if total is None:
            total = sum(self.weights)
        self.total = Fraction(total)
        if self.total <= 0 or any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative with positive total")
        if sum(self.weights) != self.total:
            raise ValueError("weights do not sum to total")

    @property
    def probabilities(self):
        return [w / self.total for w in self.weights]

    def mp_probabilities(self):
        """Probabilities as mpmath numbers at the current working precision."""
        tot = mpmath.mpf(self.total.numerator) / self.total.denominator
        return [mpmath.mpf(w.numerator) / w.denominator / tot for w in self.weights]

    @property
    def mean(self):
        return sum(m * w for m, w in enumerate(self.weights)) / self.total

    @property
    def variance(self):
        mu = self.mean
        second = sum(m * m * w for m, w in enumerate(self.weights)) / self.total
        return second - mu * mu

    def __len__(self):
        return len(self.weights)

    def to_csv_rows(self):
        rows = []
        for m, p in enumerate(self.probabilities):
            rows.append((m, p.numerator, p.denominator))
        return rows


def exact_law_of_special_count(poly, lam):
    if not lam > 0:
        raise ValueError("lam must be positive")
    lam = Fraction(lam)
    if lam.denominator == 1:
        w = [c * lam.numerator**m for m, c in enumerate(poly.coeffs)]
        return ExactDistribution(w)
    top = len(poly.coeffs) - 1
    w = [c * lam.numerator**m * lam.denominator**(top - m) for m, c in enumerate(poly.coeffs)]
    return ExactDistribution(w)


def conditional_marginal(csp, special, lam, pin, event=None, budget=DEFAULT_BUDGET):
    """mu(event | pin).  ``pin`` and ``event`` are dicts var -> value;
    ``event`` may also be a callable on the digit arrays, or None for the
    whole space."""
    mu = gibbs_measure(csp, special, lam, budget)
    digits = np.unravel_index(np.arange(len(mu.values)), csp.domains)
    pin_mask = np.ones(len(mu.values), dtype=bool)
    for v, a in pin.items():
        pin_mask &= digits[v] == a
    if event is None:
        ev = np.ones(len(mu.values), dtype=bool)
    elif callable(event):
        ev = np.asarray(event(digits), dtype=bool)
    else:
        ev = np.ones(len(mu.values), dtype=bool)
        for v, a in event.items():
            ev &= digits[v] == a
    den = mu.measure(pin_mask)
    if (den == 0) if is_exact(lam) else abs(den) < 1e-14:
        raise ZeroMeasureError("conditioning on an event of measure zero")
    return mu.measure(pin_mask & ev) / den
