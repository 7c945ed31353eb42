import numpy as np
import pytest

from srvdist.curves import Curve, SrvFunction, srv
from srvdist.dp import dp_distance, dp_match
from srvdist.exact import inner_products, path_distance, precise_match
from srvdist.quotient import shape_distance

from conftest import random_curve
from oracles import brute_force_energy, random_breakpoints, window_steps


def test_window_must_be_positive():
    q = srv(Curve([0.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        dp_match(q, q, window=0)


@pytest.mark.parametrize("window", [1, 2, 3, 5])
def test_dp_equals_enumeration(rng, window):
    for _ in range(25):
        m, n = rng.integers(1, 6, 2)
        x, y = random_breakpoints(rng, m, True), random_breakpoints(rng, n, True)
        q1 = SrvFunction(x, rng.standard_normal((m, 1)))
        q2 = SrvFunction(y, rng.standard_normal((n, 1)))
        ref = brute_force_energy(x, y, inner_products(q1, q2), window_steps(m, n, window))
        assert abs(dp_match(q1, q2, window).energy - ref) < 1e-12


def test_identical_gives_diagonal(rng):
    q = srv(random_curve(rng, 15, 2))
    for window in (1, 6):
        p = dp_match(q, q, window)
        assert p.energy == pytest.approx(q.norm2(), rel=1e-12)
        assert path_distance(p, q, q) < 1e-10


def test_monotone_in_window(rng):
    for _ in range(10):
        q1, q2 = srv(random_curve(rng, 20, 1)), srv(random_curve(rng, 20, 1))
        energies = [dp_match(q1, q2, k).energy for k in (1, 2, 4, 6, 10, 19)]
        assert all(b >= a - 1e-12 for a, b in zip(energies, energies[1:]))
        assert energies[-1] <= precise_match(q1, q2).energy + 1e-12


@pytest.mark.parametrize("d", [1, 2])
def test_dp_dominates_exact(rng, d):
    for _ in range(15):
        a, b = random_curve(rng, 16, d), random_curve(rng, 16, d)
        exact = shape_distance(a, b, method="exact").distance
        approx = dp_distance(a, b).distance
        assert approx >= exact - 1e-10


def test_dp_identical_and_symmetric(rng):
    a, b = random_curve(rng, 25, 2), random_curve(rng, 25, 2)
    assert dp_distance(a, a).distance < 1e-10
    assert abs(dp_distance(a, b).distance - dp_distance(b, a).distance) < 1e-10


def test_dp_resample():
    t = np.linspace(0, 1, 7)
    c = Curve(np.stack([t, t**2], 1))
    r = dp_distance(c, c, n_resample=30)
    assert r.distance < 1e-10 and r.method == "dp"
