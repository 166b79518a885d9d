import itertools

import pytest
from hypothesis import settings

from lyzero.model import Hypergraph

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def proper_colourings(h, q):
    """Independent oracle: every colouring with no monochromatic edge."""
    for sigma in itertools.product(range(q), repeat=h.n):
        if all(len({sigma[v] for v in e}) > 1 for e in h.edges):
            yield sigma


def colour_count_poly(h, q, special=0):
    """Coefficients of sum over proper colourings of lam^(# vertices coloured special)."""
    out = [0] * (h.n + 1)
    for sigma in proper_colourings(h, q):
        out[sum(c == special for c in sigma)] += 1
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


@pytest.fixture
def edge3():
    return Hypergraph(3, [[0, 1, 2]])


@pytest.fixture
def two_edges():
    return Hypergraph(4, [[0, 1, 2], [1, 2, 3]])
