"""Deterministic instance generators and the small fixed corpora used by
the acceptance runner."""

import hashlib
import json
import random
from pathlib import Path

from .model import CnfFormula, Hypergraph, InstanceError, instance_to_json

KINDS = ("disjoint-edges", "random-hypergraph", "hypertree", "random-cnf")


def disjoint_edges(k, m):
    return Hypergraph(k * m, [range(i * k, (i + 1) * k) for i in range(m)], k)


def _bounded_sets(n, k, delta, m, rng, tries=200):
    if m and delta < 1:
        raise InstanceError("delta = 0 admits no edges")
    if m * k > n * delta:
        raise InstanceError(f"{m} edges of size {k} cannot fit under degree {delta} on {n} vertices")
    if k > n:
        raise InstanceError("edge size exceeds vertex count")
    for _ in range(tries):
        deg = [0] * n
        sets, seen = [], set()
        for _ in range(m):
            free = [v for v in range(n) if deg[v] < delta]
            if len(free) < k:
                break
            e = tuple(sorted(rng.sample(free, k)))
            if e in seen:
                break
            seen.add(e)
            sets.append(e)
            for v in e:
                deg[v] += 1
        if len(sets) == m:
            return sets
    raise InstanceError(f"no ({k}, {delta}) family with {m} sets on {n} vertices found")


def random_hypergraph(n, k, delta, m, seed=0):
    """m distinct k-edges with every vertex degree at most ``delta``."""
    return Hypergraph(n, _bounded_sets(n, k, delta, m, random.Random(seed)), k)


def hypertree(k, m, seed=0):
    """Each new edge shares exactly one vertex with the edges before it."""
    rng = random.Random(seed)
    if m == 0:
        return Hypergraph(0, [], k)
    edges, n = [tuple(range(k))], k
    for _ in range(m - 1):
        anchor = rng.randrange(n)
        edges.append((anchor, *range(n, n + k - 1)))
        n += k - 1
    return Hypergraph(n, edges, k)


def random_cnf(n, k, delta, m, seed=0):
    rng = random.Random(seed)
    sets = _bounded_sets(n, k, delta, m, rng)
    return CnfFormula(n, [(vs, [rng.random() < 0.5 for _ in vs]) for vs in sets])


def random_graph(n, max_degree, seed=0, connected=True):
    """Adjacency sets of a random graph with degrees <= ``max_degree``; a
    random spanning path keeps it connected when requested."""
    rng = random.Random(seed)
    adj = [set() for _ in range(n)]
    if connected and n > 1:
        if max_degree < 2 and n > 2:
            raise InstanceError("a connected graph on more than 2 vertices needs degree >= 2")
        order = list(range(n))
        rng.shuffle(order)
        for a, b in zip(order, order[1:]):
            adj[a].add(b)
            adj[b].add(a)
    for _ in range(2 * n):
        a, b = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if a != b and len(adj[a]) < max_degree and len(adj[b]) < max_degree:
            adj[a].add(b)
            adj[b].add(a)
    return adj


def generate(kind, params, seed=0):
    if kind == "disjoint-edges":
        return disjoint_edges(params["k"], params["m"])
    if kind == "random-hypergraph":
        return random_hypergraph(params["n"], params["k"], params["delta"], params["m"], seed)
    if kind == "hypertree":
        return hypertree(params["k"], params["m"], seed)
    if kind == "random-cnf":
        return random_cnf(params["n"], params["k"], params["delta"], params["m"], seed)
    raise InstanceError(f"unknown corpus kind {kind!r}; expected one of {KINDS}")


def generate_corpus(kind, params, seed=0, count=1, out=None):
    """``count`` instances with seeds seed, seed+1, ...  With ``out`` set,
    files and a manifest of SHA-256 hashes are written there."""
    items = []
    for i in range(count):
        obj = generate(kind, params, seed + i)
        data = instance_to_json(obj, params.get("q"))
        text = json.dumps(data, sort_keys=True)
        items.append((f"{kind}-{seed + i:05d}.json", text, obj))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = {"kind": kind, "params": params, "seed": seed, "files": {}}
        for name, text, _ in items:
            (out / name).write_text(text + "\n")
            manifest["files"][name] = hashlib.sha256((text + "\n").encode()).hexdigest()
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return [obj for _, _, obj in items]


# --- fixed corpora -----------------------------------------------------------

def tiny_coloring_corpus():
    """(hypergraph, q, B) triples whose projected space is at most a few
    hundred states."""
    return [
        (Hypergraph(3, [[0, 1, 2]]), 4, 2),
        (Hypergraph(4, [[0, 1, 2], [1, 2, 3]]), 6, 2),
        (Hypergraph(5, [[0, 1, 2], [2, 3, 4]]), 5, 2),
        (Hypergraph(4, [[0, 1], [1, 2], [2, 3]]), 4, 3),
        (Hypergraph(4, [[0, 1, 2], [0, 1, 3], [1, 2, 3]]), 7, 2),
    ]


def oracle_corpus(count=200, seed=0, max_space=10**6):
    """Mixed colouring instances with q^n <= max_space for the
    factorised-versus-enumerated comparison."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        i = len(out)
        shape = i % 4
        q = rng.choice([2, 3, 4, 5])
        if shape == 0:
            k = rng.choice([2, 3])
            m = rng.randint(1, 3)
            h = disjoint_edges(k, m)
        elif shape == 1:
            k = rng.choice([2, 3])
            h = hypertree(k, rng.randint(1, 3), rng.randrange(10**6))
        else:
            k = rng.choice([2, 3, 4])
            n = rng.randint(k, 8)
            m = rng.randint(1, max(1, min(5, n * 2 // k)))
            try:
                h = random_hypergraph(n, k, rng.randint(1, 3), m, rng.randrange(10**6))
            except InstanceError:
                continue
        if q**h.n <= max_space:
            out.append((h, q))
    return out
