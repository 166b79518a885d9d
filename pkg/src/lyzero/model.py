"""Instance representations: hypergraphs, atomic CSPs, CNF formulas and
projection (state-compression) schemes.

Indices are 0-based everywhere.  Colour ``0`` plays the role of the special
colour, so the distinguished bucket of a colouring projection is the bucket
holding colour 0.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path


class InstanceError(ValueError):
    pass


def _degrees(n, sets):
    deg = [0] * n
    for s in sets:
        for v in s:
            deg[v] += 1
    return deg


@dataclass(frozen=True)
class Hypergraph:
    n: int
    edges: tuple
    k: int = None

    def __post_init__(self):
        edges = tuple(tuple(sorted(int(v) for v in e)) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n < 0:
            raise InstanceError("negative vertex count")
        k = self.k
        if k is None:
            k = len(edges[0]) if edges else 0
            object.__setattr__(self, "k", k)
        seen = set()
        for e in edges:
            if len(e) != k:
                raise InstanceError(f"edge {e} does not have size {k}")
            if len(set(e)) != k:
                raise InstanceError(f"edge {e} repeats a vertex")
            if e and (e[0] < 0 or e[-1] >= self.n):
                raise InstanceError(f"edge {e} out of range")
            if e in seen:
                raise InstanceError(f"duplicate edge {e}")
            seen.add(e)

    @property
    def delta(self):
        return max(_degrees(self.n, self.edges), default=0)

    def degree(self, v):
        return sum(v in e for e in self.edges)


@dataclass(frozen=True)
class AtomicCsp:
    """Each constraint is ``(vars, forbidden)``: it is violated exactly when
    the variables take the values in ``forbidden``."""

    domains: tuple
    constraints: tuple

    def __post_init__(self):
        domains = tuple(int(q) for q in self.domains)
        cons = tuple((tuple(int(v) for v in vs), tuple(int(a) for a in fb))
                     for vs, fb in self.constraints)
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "constraints", cons)
        n = len(domains)
        if any(q < 1 for q in domains):
            raise InstanceError("empty domain")
        for vs, fb in cons:
            if len(vs) != len(fb):
                raise InstanceError("constraint arity mismatch")
            if len(set(vs)) != len(vs):
                raise InstanceError(f"constraint {vs} repeats a variable")
            for v, a in zip(vs, fb):
                if not 0 <= v < n:
                    raise InstanceError(f"variable {v} out of range")
                if not 0 <= a < domains[v]:
                    raise InstanceError(f"value {a} outside domain of {v}")

    @property
    def n(self):
        return len(self.domains)

    @property
    def k(self):
        return max((len(vs) for vs, _ in self.constraints), default=0)

    @property
    def delta(self):
        return max(_degrees(self.n, [vs for vs, _ in self.constraints]), default=0)

    def space_size(self):
        size = 1
        for q in self.domains:
            size *= q
        return size

    def violates(self, i, assignment):
        vs, fb = self.constraints[i]
        return all(assignment[v] == a for v, a in zip(vs, fb))

    def is_satisfying(self, assignment):
        return not any(self.violates(i, assignment) for i in range(len(self.constraints)))

    def subset(self, indices):
        return AtomicCsp(self.domains, [self.constraints[i] for i in indices])

    def dependency_adjacency(self):
        """Constraint-index adjacency: two constraints are adjacent when they
        share a variable."""
        occ = [[] for _ in range(self.n)]
        for i, (vs, _) in enumerate(self.constraints):
            for v in vs:
                occ[v].append(i)
        adj = [set() for _ in self.constraints]
        for lst in occ:
            for i in lst:
                adj[i].update(lst)
        for i, a in enumerate(adj):
            a.discard(i)
        return adj


@dataclass(frozen=True)
class CnfFormula:
    n: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple((tuple(int(v) for v in vs), tuple(bool(b) for b in neg))
                        for vs, neg in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        widths = {len(vs) for vs, _ in clauses}
        if len(widths) > 1:
            raise InstanceError("clauses of different widths")
        for vs, neg in clauses:
            if len(vs) != len(neg) or len(set(vs)) != len(vs):
                raise InstanceError(f"malformed clause {vs}")
            if any(not 0 <= v < self.n for v in vs):
                raise InstanceError(f"clause {vs} out of range")

    @property
    def k(self):
        return len(self.clauses[0][0]) if self.clauses else 0

    @property
    def delta(self):
        return max(_degrees(self.n, [vs for vs, _ in self.clauses]), default=0)

    def to_atomic_csp(self):
        # a positive literal is violated by 0, a negated one by 1
        return AtomicCsp([2] * self.n,
                         [(vs, [int(b) for b in neg]) for vs, neg in self.clauses])


@dataclass(frozen=True)
class ProjectionScheme:
    """Per-variable maps from domain symbols to bucket ids.

    ``bucket_of[v][a]`` is the bucket of symbol ``a`` at variable ``v``;
    buckets of ``v`` are ``0 .. bucket_counts[v]-1``.  ``one[v]`` is the id of
    the distinguished bucket at ``v``, or ``None`` when ``v`` has none.
    """

    bucket_of: tuple
    one: tuple
    labels: tuple = field(default=None, compare=False)
    s: int = field(default=None, compare=False)

    def __post_init__(self):
        bo = tuple(tuple(int(b) for b in row) for row in self.bucket_of)
        object.__setattr__(self, "bucket_of", bo)
        object.__setattr__(self, "one", tuple(self.one))
        for v, row in enumerate(bo):
            if sorted(set(row)) != list(range(max(row) + 1)):
                raise InstanceError(f"buckets of variable {v} are not dense")
            o = self.one[v]
            if o is not None and not 0 <= o <= max(row):
                raise InstanceError(f"distinguished bucket of {v} out of range")

    @property
    def n(self):
        return len(self.bucket_of)

    @property
    def bucket_counts(self):
        return tuple(max(row) + 1 for row in self.bucket_of)

    def preimage(self, v, b):
        return [a for a, x in enumerate(self.bucket_of[v]) if x == b]

    def preimage_sizes(self, v):
        sizes = [0] * self.bucket_counts[v]
        for b in self.bucket_of[v]:
            sizes[b] += 1
        return sizes

    def is_special(self, v, a):
        return self.one[v] is not None and self.bucket_of[v][a] == self.one[v]

    def project(self, assignment):
        return tuple(self.bucket_of[v][a] for v, a in enumerate(assignment))

    def space_size(self):
        size = 1
        for b in self.bucket_counts:
            size *= b
        return size

    def to_json(self):
        return {"bucket_of": [list(r) for r in self.bucket_of], "one": list(self.one)}


def is_consistent(proj, projected, original):
    """True iff ``original`` maps onto ``projected`` at every listed
    variable.  Both arguments may be dicts (partial) or sequences."""
    if not isinstance(projected, dict):
        projected = dict(enumerate(projected))
    if not isinstance(original, dict):
        original = dict(enumerate(original))
    return all(proj.bucket_of[v][a] == projected[v]
               for v, a in original.items() if v in projected)


def coloring_to_atomic_csp(h, q):
    if q < 2:
        raise InstanceError("need at least two colours")
    cons = [(e, [c] * len(e)) for e in h.edges for c in range(q)]
    return AtomicCsp([q] * h.n, cons)


def make_coloring_projection(q, B, n=1):
    """Colour 0 alone forms the distinguished bucket 0; colours 1..q-1 are
    dealt round-robin into buckets 1..B."""
    if B < 1 or q <= B:
        raise InstanceError("need B >= 1 and q >= B + 1")
    row = [0] + [((c - 1) % B) + 1 for c in range(1, q)]
    labels = ["1^"] + [f"{b + 1}^" for b in range(1, B + 1)]
    return ProjectionScheme([row] * n, [0] * n, labels=labels, s=(q - 1) // B)


def make_cnf_projection(formula, marked):
    """Marked variables keep both values (bucket 1 is the distinguished
    one); unmarked variables collapse to a single bucket."""
    marked = set(marked)
    if any(not 0 <= v < formula.n for v in marked):
        raise InstanceError("marked variable out of range")
    rows, one = [], []
    for v in range(formula.n):
        if v in marked:
            rows.append([0, 1])
            one.append(1)
        else:
            rows.append([0, 0])
            one.append(None)
    return ProjectionScheme(rows, one)


def special_value_projection(csp, value=0):
    """Identity projection whose distinguished bucket is a single value."""
    return ProjectionScheme([list(range(q)) for q in csp.domains], [value] * csp.n)


def identity_projection(csp, one=None):
    one = [None] * csp.n if one is None else one
    return ProjectionScheme([list(range(q)) for q in csp.domains], one)


def collapse_projection(csp):
    return ProjectionScheme([[0] * q for q in csp.domains], [None] * csp.n)


def extend_projection(proj, n):
    """Repeat a one-variable projection across ``n`` variables."""
    return ProjectionScheme([proj.bucket_of[0]] * n, [proj.one[0]] * n,
                            labels=proj.labels, s=proj.s)


# --- JSON -----------------------------------------------------------------

def load_instance(source):
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    kind = data.get("type")
    if kind == "hypergraph":
        h = Hypergraph(data["n"], data["edges"], data.get("k"))
        if "delta" in data and data["delta"] != h.delta:
            raise InstanceError(f"declared delta {data['delta']} != {h.delta}")
        return h, data.get("q")
    if kind == "cnf":
        f = CnfFormula(data["n"], [(c["vars"], c["neg"]) for c in data["clauses"]])
        if "k" in data and f.clauses and data["k"] != f.k:
            raise InstanceError("declared k does not match clause width")
        if "delta" in data and data["delta"] != f.delta:
            raise InstanceError(f"declared delta {data['delta']} != {f.delta}")
        return f, None
    if kind == "csp":
        return AtomicCsp(data["domains"], [(c["vars"], c["forbidden"]) for c in data["constraints"]]), None
    raise InstanceError(f"unknown instance type {kind!r}")


def instance_to_json(obj, q=None):
    if isinstance(obj, Hypergraph):
        d = {"type": "hypergraph", "n": obj.n, "k": obj.k, "edges": [list(e) for e in obj.edges]}
        if q is not None:
            d["q"] = q
        return d
    if isinstance(obj, CnfFormula):
        return {"type": "cnf", "n": obj.n, "k": obj.k,
                "clauses": [{"vars": list(vs), "neg": list(neg)} for vs, neg in obj.clauses]}
    if isinstance(obj, AtomicCsp):
        return {"type": "csp", "domains": list(obj.domains),
                "constraints": [{"vars": list(vs), "forbidden": list(fb)} for vs, fb in obj.constraints]}
    raise TypeError(type(obj))
