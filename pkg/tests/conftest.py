import numpy as np
import pytest

from signedvoter.graph import SignedGraph, from_arrays, undirected


def random_signed_graph(rng, n, density=0.3, neg_frac=0.3, directed=True, max_w=3.0):
    """Random signed graph; every node gets at least one incoming edge."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    for i in range(n):
        if not mask[:, i].any():
            j = (i + 1 + rng.integers(n - 1)) % n
            mask[j, i] = True
    if not directed:
        mask = np.triu(mask | mask.T, 1)
    src, dst = np.nonzero(mask)
    w = rng.uniform(0.5, max_w, len(src)) * np.where(rng.random(len(src)) < neg_frac, -1.0, 1.0)
    if directed:
        return from_arrays(n, src, dst, w)
    return undirected(n, np.column_stack([src, dst]), w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pair_graph():
    return undirected(2, [(0, 1)], 1.0)


@pytest.fixture
def signed_star():
    # centre 0, leaves 1 and 2; leaf 2 attached by a negative tie
    return undirected(3, [(0, 1), (0, 2)], [1.0, -1.0])


def fixture_graphs():
    """Small hand-made graphs (N <= 4) used by brute-force and Monte Carlo checks."""
    return {
        "pair": undirected(2, [(0, 1)], 1.0),
        "neg_pair": undirected(2, [(0, 1)], -1.0),
        "signed_star": undirected(3, [(0, 1), (0, 2)], [1.0, -1.0]),
        "neg_star": undirected(4, [(0, 1), (0, 2), (0, 3)], [-1.0, -1.0, 1.0]),
        "triangle_mixed": undirected(3, [(0, 1), (1, 2), (0, 2)], [1.0, -1.0, 2.0]),
        "path4": undirected(4, [(0, 1), (1, 2), (2, 3)], [1.0, -2.0, 1.0]),
        "directed_cycle": from_arrays(3, [0, 1, 2], [1, 2, 0], [1.0, -1.0, 1.0]),
        "directed_mixed4": from_arrays(4, [0, 1, 2, 3, 0], [1, 2, 3, 0, 2], [2.0, -1.0, 1.0, -0.5, 1.0]),
    }


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
