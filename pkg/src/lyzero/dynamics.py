"""Complex systematic-scan Glauber dynamics on a projected space, its
decomposed (oblivious / adaptive) form, and the combinatorial objects used
to analyse it: bad clusters, the witness graph, bad components and 2-trees.

Variables are scanned in the order 0, 1, ..., n-1, so the variable updated
at time t is ``t mod n`` (negative times included).
"""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import e as EULER

import numpy as np

from .exact import ComplexMeasure

STAR = -1  # id of the additional constraint c*


class KernelError(ZeroDivisionError):
    def __init__(self, v, tau):
        super().__init__(f"conditional measure at variable {v} undefined given {tau}")
        self.v, self.tau = v, tau


# --- schedule ----------------------------------------------------------------

@dataclass(frozen=True)
class ScanSchedule:
    n: int

    def variable(self, t):
        return t % self.n

    def pred(self, u, t):
        """Last time s <= t at which ``u`` is updated."""
        return t - ((t - u) % self.n)

    def timestamps(self, variables, t):
        return frozenset(self.pred(v, t) for v in variables)


# --- kernels -----------------------------------------------------------------

def _zero(x, exact, scale, tol):
    return x == 0 if exact else abs(x) <= tol * scale


@dataclass
class TransitionKernel:
    """Heat-bath update of one variable, stored row-implicitly: for every
    pinning of the other variables, the conditional law of ``v``."""
    v: int
    dims: tuple
    cond: np.ndarray      # (rows, d) conditional tables
    defined: np.ndarray   # (rows,) bool

    def _rows(self, values):
        a = np.moveaxis(values.reshape(self.dims), self.v, -1)
        return a, a.shape

    def apply(self, mu):
        a, shape = self._rows(mu.values)
        rows = a.reshape(-1, self.dims[self.v])
        mass = rows.sum(axis=1)
        bad = ~self.defined & np.any(rows != 0, axis=1)
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise KernelError(self.v, self._pin(idx))
        new = mass[:, None] * self.cond
        out = np.moveaxis(new.reshape(shape), -1, self.v).reshape(-1)
        return ComplexMeasure(out, mu.dims)

    def _pin(self, idx):
        others = tuple(d for i, d in enumerate(self.dims) if i != self.v)
        return tuple(int(x) for x in np.unravel_index(idx, others))

    def matrix(self, limit=4096):
        size = int(np.prod(self.dims))
        if size > limit:
            raise MemoryError("kernel too large to materialise")
        P = np.zeros((size, size), dtype=self.cond.dtype)
        for i in range(size):
            e = np.zeros(size, dtype=self.cond.dtype)
            e[i] = 1
            try:
                P[i] = self.apply(ComplexMeasure(e, self.dims)).values
            except KernelError:
                pass
        return P


def heat_bath_kernel(psi, t, tol=1e-13):
    dims = psi.dims
    v = t % len(dims)
    a = np.moveaxis(psi.array(), v, -1)
    rows = a.reshape(-1, dims[v])
    exact = rows.dtype == object
    mass = rows.sum(axis=1)
    scale = np.array([sum(abs(x) for x in r) for r in rows]) if exact else np.abs(rows).sum(axis=1)
    defined = np.array([not _zero(m, exact, s, tol) and s != 0 for m, s in zip(mass, scale)])
    cond = np.zeros_like(rows)
    if exact:
        cond[:] = Fraction(0)
    cond[defined] = rows[defined] / mass[defined][:, None]
    return TransitionKernel(v, dims, cond, defined)


class GlauberChain:
    """Caches one kernel per variable."""

    def __init__(self, psi, tol=1e-13):
        self.psi = psi
        self.n = len(psi.dims)
        self.kernels = [heat_bath_kernel(psi, v, tol) for v in range(self.n)]

    def step(self, mu, t):
        return self.kernels[t % self.n].apply(mu)

    def sweep(self, mu):
        for v in range(self.n):
            mu = self.kernels[v].apply(mu)
        return mu

    def stationarity_residuals(self):
        return [self.psi.l1(k.apply(self.psi)) for k in self.kernels]


def point_mass(dims, config, exact=False):
    size = int(np.prod(dims))
    vals = np.zeros(size, dtype=object if exact else complex)
    if exact:
        vals[:] = Fraction(0)
    vals[np.ravel_multi_index(tuple(config), dims)] = 1
    return ComplexMeasure(vals, tuple(dims))


def propagate(initial, psi, sweeps, chain=None, history=False):
    """mu_0 P_1 ... P_{n T}; with ``history`` also the L1 distance to psi
    after each sweep."""
    chain = chain or GlauberChain(psi)
    mu, trail = initial, []
    for _ in range(sweeps):
        mu = chain.sweep(mu)
        if history:
            trail.append(mu.l1(psi))
    return (mu, trail) if history else mu


# --- decomposition -----------------------------------------------------------

@dataclass
class StepRecord:
    v: int
    oblivious: ComplexMeasure
    adaptive: ComplexMeasure
    bottom_weight: object


def adaptive_table(kernel, scheme):
    """Rows of the adaptive law (cond - b)/b(bottom); zero where b(bottom)=0
    (the 0 * infinity = 0 convention)."""
    b = np.array(scheme.values[kernel.v], dtype=kernel.cond.dtype)
    bot = scheme.bottom[kernel.v]
    if bot == 0:
        out = np.zeros_like(kernel.cond)
        if out.dtype == object:
            out[:] = Fraction(0)
        return out
    out = (kernel.cond - b[None, :]) / bot
    out[~kernel.defined] = 0
    return out


def decomposed_step(mu, chain, scheme, t):
    """One update split into the oblivious branch (mass times b_v) and the
    adaptive branch (mass times b_v(bottom) times the adaptive law)."""
    k = chain.kernels[t % chain.n]
    a = np.moveaxis(mu.values.reshape(k.dims), k.v, -1)
    shape = a.shape
    rows = a.reshape(-1, k.dims[k.v])
    mass = rows.sum(axis=1)
    if (~k.defined & np.any(rows != 0, axis=1)).any():
        idx = int(np.flatnonzero(~k.defined & np.any(rows != 0, axis=1))[0])
        raise KernelError(k.v, k._pin(idx))
    b = np.array(scheme.values[k.v], dtype=rows.dtype)
    obl = mass[:, None] * b[None, :]
    ada = mass[:, None] * (scheme.bottom[k.v] * adaptive_table(k, scheme))

    def back(x):
        return ComplexMeasure(np.moveaxis(x.reshape(shape), -1, k.v).reshape(-1), mu.dims)

    obl_m, ada_m = back(obl), back(ada)
    new = ComplexMeasure(obl_m.values + ada_m.values, mu.dims)
    return new, StepRecord(k.v, obl_m, ada_m, scheme.bottom[k.v])


# --- bad clusters ------------------------------------------------------------

def _not_satisfied(constraint, proj, assignment):
    """The projected assignment is consistent with the forbidden tuple."""
    vs, fb = constraint
    return all(proj.bucket_of[v][a] == assignment[v] for v, a in zip(vs, fb))


@dataclass(frozen=True)
class BadCluster:
    constraints: frozenset
    assignment: tuple = ()  # sorted (var, bucket) pairs on the cluster's variables

    @property
    def empty(self):
        return not self.constraints


def _cluster_variables(members, csp, c_star):
    vs = set()
    for i in members:
        vs.update(c_star[0] if i == STAR else csp.constraints[i][0])
    return vs


def bad_cluster(projected, csp, proj, c_star):
    """Component of c* among the constraints (of ``csp`` plus c*) that the
    projected assignment does not satisfy."""
    if not _not_satisfied(c_star, proj, projected):
        return BadCluster(frozenset())
    bad = [i for i, c in enumerate(csp.constraints) if _not_satisfied(c, proj, projected)]
    occ = {}
    for i in bad:
        for v in csp.constraints[i][0]:
            occ.setdefault(v, []).append(i)
    members, frontier = {STAR}, deque([STAR])
    while frontier:
        i = frontier.popleft()
        for v in (c_star[0] if i == STAR else csp.constraints[i][0]):
            for j in occ.get(v, ()):
                if j not in members:
                    members.add(j)
                    frontier.append(j)
    vs = _cluster_variables(members, csp, c_star)
    return BadCluster(frozenset(members), tuple((v, int(projected[v])) for v in sorted(vs)))


@dataclass
class LiftingReport:
    groups: int
    max_imag: float
    min_real: float
    max_real: float
    zero_measure_violations: int
    triangle_lhs: float
    triangle_rhs: float
    ok: bool
    details: list = field(default_factory=list, repr=False)


def verify_conditional_interval(csp, proj, lam, c_star, tol=1e-12):
    """For every (S, tau): mu(c* violated | S_bad = S and tau) is real and in
    [0, 1], or the conditioning event has measure zero and so does its
    intersection with the violation.  Also checks
    |mu(c* violated)| <= sum over non-empty S of |psi(S_bad = S and tau)|."""
    from .exact import gibbs_measure

    mu = gibbs_measure(csp, proj, lam)
    size = len(mu.values)
    digits = np.unravel_index(np.arange(size), csp.domains)
    pdims = proj.bucket_counts
    maps = [np.array(row) for row in proj.bucket_of]
    pidx = np.ravel_multi_index(tuple(maps[v][digits[v]] for v in range(csp.n)), pdims)
    viol = np.ones(size, dtype=bool)
    for v, a in zip(*c_star):
        viol &= digits[v] == a
    exact = mu.values.dtype == object
    zero = Fraction(0) if exact else 0j
    psi = {}
    hit = {}
    for j, p in enumerate(pidx):
        x = mu.values[j]
        psi[p] = psi.get(p, zero) + x
        if viol[j]:
            hit[p] = hit.get(p, zero) + x
    groups = {}
    for p in range(int(np.prod(pdims))):
        sigma = np.unravel_index(p, pdims)
        key = bad_cluster(sigma, csp, proj, c_star)
        a1, a2 = groups.get(key, (zero, zero))
        groups[key] = (a1 + psi.get(p, zero), a2 + hit.get(p, zero))
    scale = float(np.abs(mu.values.astype(complex)).sum())
    max_imag, lo, hi, zviol = 0.0, 1.0, 0.0, 0
    rhs = 0.0
    details = []
    for key, (a1, a2) in groups.items():
        if not key.empty:
            rhs += abs(complex(a1))
        small = (a1 == 0) if exact else abs(a1) <= tol * scale
        if small:
            if (a2 != 0) if exact else abs(a2) > tol * scale:
                zviol += 1
            continue
        r = complex(a2 / a1)
        max_imag = max(max_imag, abs(r.imag))
        lo, hi = min(lo, r.real), max(hi, r.real)
        details.append((key, r))
    lhs = abs(complex(mu.measure(viol)))
    ok = (max_imag <= tol and lo >= -tol and hi <= 1 + tol and zviol == 0
          and lhs <= rhs * (1 + tol) + tol)
    return LiftingReport(len(groups), max_imag, lo, hi, zviol, lhs, rhs, ok, details)


# --- witness graph -----------------------------------------------------------

@dataclass(frozen=True)
class WitnessNode:
    stamps: frozenset
    constraint: int  # STAR for c*

    @property
    def latest(self):
        return max(self.stamps)


def _vars(csp, c_star, i):
    return c_star[0] if i == STAR else csp.constraints[i][0]


class WitnessGraph:
    """Finite window [-window+1, 0] of the witness graph."""

    def __init__(self, csp, c_star, schedule, window):
        self.csp, self.c_star, self.schedule = csp, c_star, schedule
        nodes = set()
        for t in range(-window + 1, 1):
            for i in range(len(csp.constraints)):
                nodes.add(WitnessNode(schedule.timestamps(csp.constraints[i][0], t), i))
        self.star = WitnessNode(schedule.timestamps(c_star[0], 0), STAR)
        nodes.add(self.star)
        self.nodes = sorted(nodes, key=lambda x: (x.latest, x.constraint, sorted(x.stamps)))
        self.by_stamp = {}
        for x in self.nodes:
            for s in x.stamps:
                self.by_stamp.setdefault(s, []).append(x)

    def neighbours(self, x):
        out = set()
        for s in x.stamps:
            out.update(self.by_stamp.get(s, ()))
        out.discard(x)
        return out

    def max_degree(self):
        return max((len(self.neighbours(x)) for x in self.nodes), default=0)

    def degree_bound(self):
        full = self.csp.constraints + (tuple(self.c_star),)
        delta = max(sum(v in vs for vs, _ in full) for v in range(self.csp.n))
        k = max(len(vs) for vs, _ in full)
        return 2 * delta * k * k - 2


def witness_graph_local(csp, c_star, schedule, window):
    g = WitnessGraph(csp, c_star, schedule, window)
    if g.max_degree() > g.degree_bound():
        raise AssertionError("witness graph degree bound violated")
    return g


@dataclass
class BadComponent:
    nodes: frozenset

    @property
    def empty(self):
        return not self.nodes

    def timestamps(self):
        out = set()
        for x in self.nodes:
            out |= x.stamps
        return out


def _node_satisfied(x, csp, c_star, proj, schedule, record, T):
    vs, fb = c_star if x.constraint == STAR else csp.constraints[x.constraint]
    for v, a in zip(vs, fb):
        r = record[schedule.pred(v, x.latest) + T - 1]
        if r is not None and r != proj.bucket_of[v][a]:
            return True
    return False


def bad_component(record, csp, c_star, proj, schedule):
    """``record[t + T - 1]`` is r_t for t in [-T+1, 0] (None for bottom)."""
    T = len(record)
    g = WitnessGraph(csp, c_star, schedule, T)

    def bad(x):
        return min(x.stamps) >= -T + 1 and not _node_satisfied(x, csp, c_star, proj, schedule, record, T)

    if not bad(g.star):
        return BadComponent(frozenset())
    seen, frontier = {g.star}, deque([g.star])
    while frontier:
        x = frontier.popleft()
        for y in g.neighbours(x):
            if y not in seen and bad(y):
                seen.add(y)
                frontier.append(y)
    return BadComponent(frozenset(seen))


def reconstruct_bad_cluster(comp, updates, csp, c_star, proj, schedule):
    """Recover the bad cluster of the final state and the final projected
    values on it from the bad component and the update values o_t on its
    timestamps.  ``updates`` maps time -> bucket."""
    if comp.empty:
        return BadCluster(frozenset())
    missing = comp.timestamps() - set(updates)
    if missing:
        raise KeyError(f"missing update values at times {sorted(missing)}")

    def value(v):
        return updates[schedule.pred(v, 0)]

    def unsatisfied(c):
        return all(value(v) == proj.bucket_of[v][a] for v, a in zip(*c))

    present = {x.constraint for x in comp.nodes if x.stamps == schedule.timestamps(_vars(csp, c_star, x.constraint), 0)}
    if STAR not in present or not unsatisfied(c_star):
        return BadCluster(frozenset())
    members, vs = {STAR}, set(c_star[0])
    grew = True
    while grew:
        grew = False
        for i, c in enumerate(csp.constraints):
            if i in members or not vs.intersection(c[0]) or i not in present:
                continue
            if unsatisfied(c):
                members.add(i)
                vs.update(c[0])
                grew = True
    return BadCluster(frozenset(members), tuple((v, int(value(v))) for v in sorted(vs)))


# --- trajectories ------------------------------------------------------------

@dataclass
class Trace:
    initial: tuple
    record: list        # r_t, None for bottom
    updates: dict       # t -> o_t
    final: tuple
    weight: complex     # product of (true weight / proposal) along the run
    left_support: bool


def sample_trace(chain, scheme, initial, T, rng):
    """Run the decomposed dynamics over times -T+1..0 from ``initial``,
    drawing r_t from |b_v| and, on bottom, o_t from |adaptive law|.  The
    phase-carrying importance weight is tracked.  If the state leaves the
    support the adaptive law is undefined; o_t is then drawn uniformly and
    the trace is flagged (the combinatorial reconstruction does not depend
    on how o_t was produced)."""
    n, dims = chain.n, chain.psi.dims
    state = list(initial)
    record, updates = [], {}
    weight, left = 1 + 0j, False
    tables = [adaptive_table(k, scheme) for k in chain.kernels]
    for t in range(-T + 1, 1):
        v = t % n
        k = chain.kernels[v]
        opts = [complex(x) for x in scheme.values[v]] + [complex(scheme.bottom[v])]
        p = np.abs(opts)
        j = rng.choice(len(opts), p=p / p.sum())
        weight *= opts[j] / (p[j] / p.sum())
        if j < len(opts) - 1:
            r = o = int(j)
        else:
            r = None
            others = tuple(state[u] for u in range(n) if u != v)
            row = np.ravel_multi_index(others, tuple(d for u, d in enumerate(dims) if u != v)) if others else 0
            if k.defined[row]:
                law = np.array([complex(x) for x in tables[v][row]])
                q = np.abs(law)
                o = int(rng.choice(len(law), p=q / q.sum()))
                weight *= law[o] / (q[o] / q.sum())
            else:
                left = True
                o = int(rng.integers(dims[v]))
        record.append(r)
        updates[t] = o
        state[v] = o
    return Trace(tuple(initial), record, updates, tuple(state), weight, left)


# --- 2-trees -----------------------------------------------------------------

def _as_adjacency(graph):
    if isinstance(graph, dict):
        return {u: set(vs) for u, vs in graph.items()}
    return {u: set(vs) for u, vs in enumerate(graph)}


def _distances_from(adj, sources, allowed):
    dist = {s: 0 for s in sources}
    frontier = deque(sources)
    while frontier:
        u = frontier.popleft()
        for w in adj[u]:
            if w in allowed and w not in dist:
                dist[w] = dist[u] + 1
                frontier.append(w)
    return dist


def construct_2tree(graph, component, root):
    """Greedy maximal 2-tree of the subgraph induced by ``component``:
    repeatedly add the remaining vertex closest to the tree (ties by
    vertex order) and discard its closed neighbourhood."""
    adj = _as_adjacency(graph)
    comp = set(component)
    if root not in comp:
        raise ValueError("root outside the component")
    sub = {u: adj[u] & comp for u in comp}
    tree = [root]
    remaining = comp - sub[root] - {root}
    while remaining:
        dist = _distances_from(sub, tree, comp)
        u = min(remaining, key=lambda w: (dist.get(w, float("inf")), w))
        tree.append(u)
        remaining -= sub[u] | {u}
    return frozenset(tree)


def is_2tree(graph, vertices):
    adj = _as_adjacency(graph)
    vs = set(vertices)
    if any(adj[u] & vs for u in vs):
        return False
    if len(vs) <= 1:
        return True
    sq = {u: {w for x in adj[u] | {u} for w in adj[x] | {x}} - {u} for u in vs}
    start = next(iter(vs))
    seen, frontier = {start}, [start]
    while frontier:
        u = frontier.pop()
        for w in sq[u] & vs:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    return seen == vs


def count_2trees(graph, root, size):
    """Number of 2-trees of ``size`` vertices containing ``root``.  Connected
    sets of the square graph are grown from the root with an exclusion list,
    so each set is produced exactly once."""
    if size < 1:
        raise ValueError("size must be positive")
    adj = _as_adjacency(graph)
    square = {u: ({w for x in adj[u] for w in adj[x]} | adj[u]) - {u} for u in adj}

    def grow(chosen, frontier, banned):
        if len(chosen) == size:
            return 1
        total = 0
        for i, u in enumerate(frontier):
            new_chosen = chosen | {u}
            new_banned = banned | set(frontier[:i + 1])
            blocked = set().union(*(adj[x] for x in new_chosen))
            rest = [w for w in frontier[i + 1:] if w not in adj[u]]
            extra = sorted(w for w in square[u]
                           if w not in new_chosen and w not in new_banned
                           and w not in blocked and w not in rest)
            total += grow(new_chosen, rest + extra, new_banned)
        return total

    start = sorted(w for w in square[root] if w not in adj[root])
    return grow({root}, start, {root})


def two_tree_count_bound(max_degree, size):
    return (EULER * max_degree**2) ** (size - 1) / 2
