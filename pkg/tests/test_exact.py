import numpy as np
import pytest

from srvdist.curves import Curve, Reparam, SrvFunction, apply_reparam, dq_distance, refinement_reparam, srv
from srvdist.exact import (
    MatchingPath,
    edge_weight,
    evaluate_path,
    exact_distance_open,
    inner_products,
    path_distance,
    path_to_reparams,
    precise_match,
)

from conftest import random_curve
from oracles import brute_force_energy, edge_weight_ref, exact_steps, random_breakpoints


def const(value, d=1):
    return SrvFunction([0.0, 1.0], np.full((1, d), value, dtype=float))


def test_edge_weight_examples():
    assert edge_weight(const(1.0), const(1.0), (0, 0), (1, 1)) == pytest.approx(1.0)
    assert edge_weight(const(1.0), const(-1.0), (0, 0), (1, 1)) == 0.0
    q1 = SrvFunction([0, 0.5, 1], [[1.0], [1.0]])
    assert edge_weight(q1, const(1.0), (0, 0), (1, 1)) == pytest.approx(np.sqrt(0.5), abs=1e-15)


def test_edge_weight_horizontal_is_zero():
    q1 = SrvFunction([0, 0.5, 1], [[1.0], [1.0]])
    assert edge_weight(q1, const(1.0), (0, 0), (2, 0)) == 0.0


def test_edge_weight_rejects_non_monotone():
    q1 = SrvFunction([0, 0.5, 1], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        edge_weight(q1, const(1.0), (1, 0), (0, 1))
    with pytest.raises(ValueError):
        edge_weight(q1, const(1.0), (1, 1), (1, 1))


def test_edge_weight_matches_oracle(rng):
    for _ in range(200):
        m, n = rng.integers(1, 7, 2)
        x = random_breakpoints(rng, m, rng.random() < 0.5)
        y = random_breakpoints(rng, n, rng.random() < 0.5)
        q1 = SrvFunction(x, rng.standard_normal((m, 2)))
        q2 = SrvFunction(y, rng.standard_normal((n, 2)))
        ip = inner_products(q1, q2)
        i, k = sorted(rng.choice(m + 1, 2, replace=False))
        j, l = sorted(rng.choice(n + 1, 2, replace=False))
        assert abs(edge_weight(q1, q2, (i, j), (k, l)) - edge_weight_ref(x, y, ip, (i, j), (k, l))) < 1e-13


@pytest.mark.parametrize("uniform", [True, False])
def test_precise_match_equals_enumeration(rng, uniform):
    for _ in range(40):
        m, n = rng.integers(1, 6, 2)
        x, y = random_breakpoints(rng, m, uniform), random_breakpoints(rng, n, uniform)
        q1 = SrvFunction(x, rng.standard_normal((m, 2)))
        q2 = SrvFunction(y, rng.standard_normal((n, 2)))
        ref = brute_force_energy(x, y, inner_products(q1, q2), exact_steps(m, n))
        assert abs(precise_match(q1, q2).energy - ref) < 1e-12


def test_pruning_preserves_optimum(rng):
    for _ in range(20):
        q1 = srv(random_curve(rng, 9, 2))
        q2 = srv(random_curve(rng, 7, 2))
        assert abs(precise_match(q1, q2, prune=True).energy - precise_match(q1, q2, prune=False).energy) < 1e-12


def test_identical_curves(rng):
    c = random_curve(rng, 12, 2)
    q = srv(c)
    p = precise_match(q, q)
    assert p.energy == pytest.approx(q.norm2(), rel=1e-12)
    assert path_distance(p, q, q) < 1e-10
    np.testing.assert_array_equal(p.nodes, np.stack([np.arange(12), np.arange(12)], 1))


def test_opposite_direction():
    q1, q2 = srv(Curve([0.0, 1.0])), srv(Curve([0.0, -1.0]))
    p = precise_match(q1, q2)
    assert p.energy == 0.0
    assert path_distance(p, q1, q2) == pytest.approx(np.sqrt(2))


def test_path_distance_matches_energy_form(rng):
    for _ in range(20):
        q1, q2 = srv(random_curve(rng, 10, 2)), srv(random_curve(rng, 14, 2))
        p = precise_match(q1, q2)
        d2 = q1.norm2() + q2.norm2() - 2 * p.energy
        assert abs(path_distance(p, q1, q2) ** 2 - d2) < 1e-9
        assert abs(evaluate_path(p, q1, q2).energy() - p.energy) < 1e-12


def test_matching_path_validation():
    with pytest.raises(ValueError):
        MatchingPath([[0, 0], [1, 0], [0, 1]], 0.0)
    with pytest.raises(ValueError):
        MatchingPath([[0, 0], [0, 0], [1, 1]], 0.0)


def test_empty_srv_rejected():
    q = SrvFunction([0.0, 1.0], [[1.0]])
    empty = SrvFunction.__new__(SrvFunction)
    object.__setattr__(empty, "breakpoints", np.array([1.0]))
    object.__setattr__(empty, "values", np.zeros((0, 1)))
    with pytest.raises(ValueError):
        precise_match(q, empty)


def random_refinement(rng, c, max_pieces=3):
    counts = rng.integers(1, max_pieces + 1, c.n - 1 + int(c.closed))
    return refinement_reparam(c, counts)[0]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_refinement_reparam_invariance(rng, d):
    for _ in range(5):
        c = random_curve(rng, 8, d)
        assert exact_distance_open(c, random_refinement(rng, c), with_rotation=False).distance < 1e-8


def test_refinement_reparam_maps_vertices(rng):
    c = random_curve(rng, 6, 2)
    fine, g = refinement_reparam(c, [1, 2, 3, 1, 2])
    np.testing.assert_allclose(apply_reparam(c, g, at=fine.params()).points, fine.points, atol=1e-14)


def test_rotation_recovery(rng):
    from srvdist.quotient import random_rotation

    c = random_curve(rng, 10, 2)
    O = random_rotation(2, rng)
    res = exact_distance_open(c, Curve(c.points @ O.T))
    assert res.distance < 1e-8
    np.testing.assert_allclose(res.rotation, O.T, atol=1e-6)


def test_symmetry(rng):
    for _ in range(10):
        a, b = random_curve(rng, 9, 2), random_curve(rng, 12, 2)
        assert abs(exact_distance_open(a, b).distance - exact_distance_open(b, a).distance) < 1e-10


def test_bounded_by_dq(rng):
    for _ in range(10):
        a, b = random_curve(rng, 11, 2), random_curve(rng, 11, 2)
        assert exact_distance_open(a, b).distance <= dq_distance(a, b) + 1e-12


def test_diagonal_path_reparams_identity():
    q = SrvFunction(np.linspace(0, 1, 4), np.ones((3, 1)))
    g1, g2 = path_to_reparams(MatchingPath(np.stack([np.arange(4)] * 2, 1), 3.0), q, q)
    t = np.linspace(0, 1, 17)
    np.testing.assert_allclose(g1(t), t, atol=1e-15)
    np.testing.assert_allclose(g2(t), t, atol=1e-15)


def test_boundary_path_reparams():
    q1 = SrvFunction(np.linspace(0, 1, 3), np.ones((2, 1)))
    q2 = SrvFunction(np.linspace(0, 1, 4), np.ones((3, 1)))
    nodes = [[0, 0], [0, 1], [0, 2], [0, 3], [1, 3], [2, 3]]
    g1, g2 = path_to_reparams(MatchingPath(nodes, 0.0), q1, q2)
    half = np.linspace(0, 0.6, 7)
    np.testing.assert_allclose(g1(half), 0.0)
    assert g2(0.6) == pytest.approx(1.0)
    np.testing.assert_allclose(g2(np.linspace(0.6, 1, 5)), 1.0)
    assert g1(1.0) == 1.0


@pytest.mark.parametrize("d", [1, 2])
def test_reparams_realize_distance(rng, d):
    for _ in range(5):
        c1, c2 = random_curve(rng, 9, d), random_curve(rng, 7, d)
        q1, q2 = srv(c1), srv(c2)
        p = precise_match(q1, q2)
        g1, g2 = path_to_reparams(p, q1, q2)
        # sample on the common parameter grid of the reparams; PL reparams map it
        # onto path vertices, so the composed curves are exact polylines
        u = g1.knots_in
        realized = dq_distance(apply_reparam(c1, g1, at=u), apply_reparam(c2, g2, at=u))
        assert abs(realized - path_distance(p, q1, q2)) < 1e-6


def test_uniform_kernel_matches_general_kernel(rng):
    from srvdist import _kernels
    from srvdist.exact import _backtrack

    cases = [(SrvFunction(np.linspace(0, 1, 5), np.ones((4, 1))),
              SrvFunction(np.linspace(0, 1, 7), np.ones((6, 1))))]
    cases += [(srv(random_curve(rng, 9, 2)), srv(random_curve(rng, 12, 2))) for _ in range(10)]
    for q1, q2 in cases:
        best, pred = _kernels.longest_path(q1.breakpoints, q2.breakpoints, inner_products(q1, q2),
                                           0, True, True)
        p = precise_match(q1, q2)
        assert abs(best[-1, -1] - p.energy) < 1e-12
        np.testing.assert_array_equal(_backtrack(pred, q1.m, q2.m), p.nodes)
