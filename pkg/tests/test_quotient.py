import numpy as np
import pytest

from srvdist.curves import (
    Curve,
    SrvFunction,
    apply_rotation,
    apply_shift,
    dq_distance,
    refinement_reparam,
    resample_uniform,
    srv,
)
from srvdist.dp import dp_match
from srvdist.exact import MatchingPath, evaluate_path, precise_match
from srvdist.quotient import (
    _planar,
    alternate_rotation_match,
    closed_distance,
    optimal_rotation,
    random_rotation,
    rotation_seeds,
    shape_distance,
)

from conftest import random_curve


def bilinear_energy(q1, q2, path, O):
    ev = evaluate_path(path, q1, q2)
    return float(np.sum(ev.weights * np.einsum("ij,ij->i", q1.values[ev.r], q2.values[ev.s] @ O.T)))


def diagonal(m):
    return MatchingPath(np.stack([np.arange(m + 1)] * 2, 1), 0.0)


def test_procrustes_recovery(rng):
    for d in (2, 3):
        q1 = srv(random_curve(rng, 15, d))
        R = random_rotation(d, rng)
        q2 = SrvFunction(q1.breakpoints, q1.values @ R)  # q2 = R^T q1 pointwise
        O = optimal_rotation(q1, q2, diagonal(q1.m))
        np.testing.assert_allclose(O, R, atol=1e-8)
        assert np.sqrt(np.sum((q1.values - q2.rotated(O).values) ** 2) / q1.m) < 1e-8


def test_rotation_one_dimensional(rng):
    q1, q2 = srv(random_curve(rng, 6, 1)), srv(random_curve(rng, 6, 1))
    assert optimal_rotation(q1, q2, precise_match(q1, q2)).tolist() == [[1.0]]


def test_rotation_beats_angle_sweep(rng):
    c = random_curve(rng, 14, 2)
    mirrored = Curve(c.points * [1.0, -1.0])
    q1, q2 = srv(c), srv(mirrored)
    path = precise_match(q1, q2)
    O = optimal_rotation(q1, q2, path)
    best = bilinear_energy(q1, q2, path, O)
    sweep = [bilinear_energy(q1, q2, path, _planar(a)) for a in np.linspace(0, 2 * np.pi, 720, endpoint=False)]
    assert best >= max(sweep) - 1e-9
    assert abs(np.linalg.det(O) - 1) < 1e-12


def test_rotation_beats_haar_samples(rng):
    q1, q2 = srv(random_curve(rng, 12, 3)), srv(random_curve(rng, 12, 3))
    path = precise_match(q1, q2)
    best = bilinear_energy(q1, q2, path, optimal_rotation(q1, q2, path))
    for _ in range(1000):
        assert best >= bilinear_energy(q1, q2, path, random_rotation(3, rng)) - 1e-9


def test_random_rotation_is_proper(rng):
    assert random_rotation(1, rng).tolist() == [[1.0]]
    for d in (2, 3, 4):
        O = random_rotation(d, rng)
        assert np.max(np.abs(O.T @ O - np.eye(d))) < 1e-12
        assert abs(np.linalg.det(O) - 1) < 1e-12


def test_seeds():
    assert len(rotation_seeds(2)) == 8
    s3 = rotation_seeds(3)
    np.testing.assert_array_equal(s3[0], np.eye(3))
    np.testing.assert_array_equal(s3[1], rotation_seeds(3)[1])


def test_alternation_recovers_warped_rotated_copy(rng):
    for _ in range(5):
        c = random_curve(rng, 10, 2)
        fine, _ = refinement_reparam(c, rng.integers(1, 4, c.n - 1))
        moved = apply_rotation(fine, random_rotation(2, rng))
        res = alternate_rotation_match(c, moved, seeds=8)
        assert res.distance < 1e-6


def test_alternation_aligned_pair_stops_early(rng):
    c = random_curve(rng, 10, 2)
    res = alternate_rotation_match(c, c, seeds=1, kabsch=False)
    assert res.iterations <= 2
    assert res.distance < 1e-10


def test_alternation_energy_nondecreasing_and_bounded(rng):
    for d in (2, 3):
        for _ in range(5):
            a, b = random_curve(rng, 10, d), random_curve(rng, 13, d)
            res = alternate_rotation_match(a, b)
            assert np.all(np.diff(res.energies) >= 0)
            assert res.iterations <= 50
            assert res.distance <= dq_distance(a, b) + 1e-12
            q1, q2 = srv(a), srv(b)
            d2 = q1.norm2() + q2.norm2() - 2 * res.energy
            assert abs(res.distance**2 - d2) < 1e-9


def test_closed_shift_recovery(rng):
    for d in (2, 3):
        c = random_curve(rng, 9, d, closed=True)
        res = closed_distance(c, apply_shift(c, 3))
        assert res.distance < 1e-8
        assert (res.shift + 3) % c.n == 0


def test_square_rotated_quarter_turn():
    sq = Curve([[0, 0], [1, 0], [1, 1], [0, 1]], closed=True)
    turned = apply_rotation(sq, _planar(np.pi / 2))
    assert shape_distance(sq, turned).distance < 1e-6
    assert shape_distance(sq, turned, rotation=False).distance < 1e-6


@pytest.mark.slow
def test_square_vs_circle_matches_brute_force():
    t = 2 * np.pi * np.arange(64) / 64
    circle = Curve(np.stack([np.cos(t), np.sin(t)], 1), closed=True)
    square = resample_uniform(Curve([[-1, -1], [1, -1], [1, 1], [-1, 1]], closed=True), 64)
    res = closed_distance(square, circle, matcher=lambda a, b: dp_match(a, b, 6), method="dp")
    # shifting the equally spaced circle by one vertex equals rotating it by
    # 2 pi / 64, so sweeping dense angles at seam 0 covers every (shift, angle)
    q1, q2 = srv(square), srv(circle)
    sweep = []
    for a in np.linspace(0, 2 * np.pi, 720, endpoint=False):
        q2a = q2.rotated(_planar(a))
        p = dp_match(q1, q2a, 6)
        sweep.append(np.sqrt(max(q1.norm2() + q2a.norm2() - 2 * p.energy, 0.0)))
    assert abs(res.distance - min(sweep)) <= 0.01 * min(sweep)


def test_closed_rejects_open(rng):
    with pytest.raises(ValueError):
        closed_distance(random_curve(rng, 5, 2), random_curve(rng, 5, 2))


def test_shape_distance_errors(rng):
    a = random_curve(rng, 5, 2)
    with pytest.raises(ValueError, match="topology"):
        shape_distance(a, random_curve(rng, 5, 2, closed=True))
    with pytest.raises(ValueError, match="dimension"):
        shape_distance(a, random_curve(rng, 5, 3))
    with pytest.raises(ValueError):
        shape_distance(a, a, method="fast")


def test_one_dimensional_reparam(rng):
    c = random_curve(rng, 12, 1)
    fine, _ = refinement_reparam(c, rng.integers(1, 4, c.n - 1))
    assert shape_distance(c, fine).distance < 1e-8


def test_symmetry_and_triangle(rng):
    worst = 0.0
    for _ in range(15):
        a, b, c = (random_curve(rng, 9, 2) for _ in range(3))
        ab, ba = shape_distance(a, b).distance, shape_distance(b, a).distance
        assert abs(ab - ba) < 1e-8
        bc, ac = shape_distance(b, c).distance, shape_distance(a, c).distance
        worst = max(worst, ac - ab - bc)
    assert worst <= 1e-6


@pytest.mark.parametrize("closed", [False, True])
def test_rotation_and_shift_invariance(rng, closed):
    for _ in range(4):
        a, b = random_curve(rng, 8, 2, closed=closed), random_curve(rng, 8, 2, closed=closed)
        moved = apply_rotation(b, random_rotation(2, rng))
        if closed:
            moved = apply_shift(moved, int(rng.integers(b.n)))
        assert abs(shape_distance(a, moved).distance - shape_distance(a, b).distance) < 1e-6


def test_scale_flag():
    a = Curve([[0, 0], [1, 0], [1, 1]])
    b = Curve([[0, 0], [3, 0], [3, 3]])
    assert shape_distance(a, b, scale=True).distance < 1e-10
    assert shape_distance(a, b).distance > 0.1
