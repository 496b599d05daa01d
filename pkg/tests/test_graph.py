import numpy as np
import pytest

from oracles import connected_components, laplacian_loops
from resilient_cl.graph import (
    LAMBDA2_EPS,
    CommGraph,
    build_graph,
    clamped_lambda2,
    lambda2,
    laplacian,
    local_lambda2,
)


def complete(n):
    return CommGraph(np.ones((n, n)) - np.eye(n))


def path3():
    return CommGraph(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))


def test_single_edge():
    g = build_graph([(0, 0), (0.5, 0)], 1.0)
    np.testing.assert_array_equal(g.adjacency, [[0, 1], [1, 0]])


def test_empty_and_single():
    assert build_graph([], 1.0).n == 0
    g = build_graph([(0, 0)], 1.0)
    assert g.n == 1 and not g.adjacency.any()
    np.testing.assert_array_equal(laplacian(g), [[0.0]])


def test_unit_square_is_four_cycle():
    g = build_graph([(0, 0), (1, 0), (1, 1), (0, 1)], 1.0)
    expected = [[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]]
    np.testing.assert_array_equal(g.adjacency, expected)


def test_laplacian_path_and_complete():
    np.testing.assert_array_equal(laplacian(path3()), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    L = laplacian(complete(4))
    np.testing.assert_array_equal(np.diag(L), [3, 3, 3, 3])
    np.testing.assert_array_equal(L[~np.eye(4, dtype=bool)], -1)


def test_lambda2_known_spectra():
    assert np.linalg.eigvalsh(laplacian(complete(4))) == pytest.approx([0, 4, 4, 4], abs=1e-12)
    assert np.linalg.eigvalsh(laplacian(path3())) == pytest.approx([0, 1, 3], abs=1e-12)
    assert lambda2(complete(4)) == pytest.approx(4.0, abs=1e-12)
    assert lambda2(path3()) == pytest.approx(1.0, abs=1e-12)


def test_disconnected_pair():
    g = build_graph([(0, 0), (5, 0)], 1.0)
    assert lambda2(g) == 0.0
    assert clamped_lambda2(g) == LAMBDA2_EPS


def test_lambda2_needs_two_nodes():
    with pytest.raises(ValueError):
        lambda2(build_graph([(0, 0)], 1.0))


def test_validation():
    with pytest.raises(ValueError):
        CommGraph(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        CommGraph(np.array([[1, 0], [0, 0]]))


def test_random_graphs_against_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        pts = rng.uniform(0, 3, (n, 2))
        radius = float(rng.uniform(0.5, 2.0))
        g = build_graph(pts, radius)
        adj = [[i != j and np.hypot(*(pts[i] - pts[j])) <= radius for j in range(n)] for i in range(n)]
        np.testing.assert_array_equal(g.adjacency.astype(bool), adj)
        L = laplacian(g)
        np.testing.assert_allclose(L, laplacian_loops(adj), atol=1e-8)
        w = np.linalg.eigvalsh(L)
        assert w.min() >= -1e-8
        np.testing.assert_allclose(L @ np.ones(n), 0.0, atol=1e-8)
        zeros = int(np.sum(np.abs(w) < 1e-8))
        assert zeros == connected_components(adj)
        assert lambda2(g) == pytest.approx(max(np.sort(w)[1], 0.0), abs=1e-8)
        assert (lambda2(g) > 1e-8) == (connected_components(adj) == 1)


def test_local_lambda2_uses_closed_neighborhood():
    # star centered on 0 plus a pendant edge 3-4
    adj = np.zeros((5, 5))
    for a, b in ((0, 1), (0, 2), (0, 3), (3, 4)):
        adj[a, b] = adj[b, a] = 1
    g = CommGraph(adj)
    # neighborhood of 0 is the star K1,3: spectrum {0, 1, 1, 4}
    assert local_lambda2(g, 0) == pytest.approx(1.0)
    # neighborhood of 4 is a single edge: spectrum {0, 2}
    assert local_lambda2(g, 4) == pytest.approx(2.0)
