import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srvdist.analysis import (
    bench,
    cluster_separation,
    cmds,
    evaluate,
    mre,
    pairwise_matrix,
    pearson,
    relative_errors,
)
from srvdist.nn import init_params, make_arch

from conftest import random_curve


def test_mre_examples():
    assert mre([1, 2], [1.1, 1.8]) == pytest.approx(0.1, abs=1e-15)
    assert mre([1, 2, 3], [1, 2, 3]) == 0.0


def test_mre_floor_reports_tiny_labels():
    rel, below = relative_errors([0.0, 1.0], [0.5, 1.0])
    assert below.tolist() == [True, False]
    assert rel[0] == pytest.approx(0.5 / 1e-6)
    rep = evaluate([0.0, 1.0, 2.0], [0.0, 1.0, 2.5])
    assert rep.below_floor.tolist() == [0]
    assert "below the MRE floor" in rep.summary()


def test_mre_scale_invariant():
    rng = np.random.default_rng(0)
    y, p = rng.uniform(0.5, 2, 50), rng.uniform(0.5, 2, 50)
    assert mre(3.7 * y, 3.7 * p) == pytest.approx(mre(y, p), rel=1e-14)


def test_metric_errors():
    with pytest.raises(ValueError, match="empty"):
        mre([], [])
    with pytest.raises(ValueError, match="length mismatch"):
        mre([1.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="undefined correlation"):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="undefined correlation"):
        pearson([1.0], [2.0])


def test_pearson_examples():
    y = np.array([1.0, 2.0, 3.0])
    assert pearson(y, y) == pytest.approx(1.0, abs=1e-15)
    assert pearson(y, y[::-1]) == pytest.approx(-1.0, abs=1e-15)
    assert pearson(y, 2 * y + 5) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.01, 100))
def test_pearson_affine_invariance(seed, a, b, c):
    rng = np.random.default_rng(seed)
    y, p = rng.standard_normal(20), rng.standard_normal(20)
    assert abs(pearson(a * y + b, c * p - b) - pearson(y, p)) < 1e-12


def test_pearson_matches_numpy():
    rng = np.random.default_rng(1)
    y, p = rng.standard_normal(100), rng.standard_normal(100)
    assert pearson(y, p) == pytest.approx(np.corrcoef(y, p)[0, 1], abs=1e-14)


def distances(X):
    return np.linalg.norm(X[:, None] - X[None], axis=-1)


def test_cmds_equilateral():
    X = cmds(1.0 - np.eye(3), 2)
    D = distances(X)
    assert np.allclose(D[np.triu_indices(3, 1)], 1.0, atol=1e-9)


def test_cmds_reconstructs_planar_points():
    rng = np.random.default_rng(2)
    P = rng.standard_normal((20, 2))
    X = cmds(distances(P), 2)
    assert np.max(np.abs(distances(X) - distances(P))) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 25), st.integers(1, 4))
def test_cmds_euclidean_reconstruction(seed, N, dim):
    P = np.random.default_rng(seed).standard_normal((N, dim))
    k = min(dim, N)
    X = cmds(distances(P), k)
    assert np.max(np.abs(distances(X) - distances(P))) < 1e-8


def test_cmds_sign_convention_and_determinism():
    rng = np.random.default_rng(3)
    D = distances(rng.standard_normal((10, 3)))
    X = cmds(D, 3)
    for j in range(3):
        first = X[np.flatnonzero(np.abs(X[:, j]) > 1e-12)[0], j]
        assert first > 0
    assert np.array_equal(X, cmds(D.copy(), 3))


def test_cmds_errors():
    with pytest.raises(ValueError, match="k=4"):
        cmds(1.0 - np.eye(3), 4)
    with pytest.raises(ValueError, match="symmetric"):
        cmds(np.array([[0, 1.0], [2.0, 0]]), 1)
    with pytest.raises(ValueError, match="zero diagonal"):
        cmds(np.array([[1.0, 1.0], [1.0, 0]]), 1)
    with pytest.raises(ValueError, match="non-embeddable"):
        cmds(np.zeros((3, 3)), 2)


def test_cmds_non_euclidean_axes_clamped():
    # a 4-cycle metric with long diagonals is not Euclidean
    D = np.array([[0, 1, 3, 1], [1, 0, 1, 3], [3, 1, 0, 1], [1, 3, 1, 0]], dtype=float)
    X = cmds(D, 4)
    assert np.all(np.isfinite(X))


def test_pairwise_and_separation():
    D = pairwise_matrix([1.0, 2.0, 3.0], [(0, 1), (0, 2), (1, 2)], 3)
    assert np.array_equal(D, D.T) and D[1, 2] == 3.0
    X = np.array([[0, 0], [0, 0.1], [5, 0], [5, 0.1]])
    intra, inter = cluster_separation(X, [0, 0, 1, 1])
    assert intra == pytest.approx(0.1) and inter > 4.9
    with pytest.raises(ValueError):
        cluster_separation(X, [0, 0, 0, 0])


def test_bench_report_and_ordering():
    rng = np.random.default_rng(4)
    pairs = [(random_curve(rng, 24, 2), random_curve(rng, 24, 2)) for _ in range(3)]
    params = init_params(make_arch(24, 2), rng)
    rep = bench(["exact", "dp", "nn"], pairs, reps={"exact": 2, "dp": 3, "nn": 10}, params=params)
    assert [r["reps"] for r in rep.rows] == [2, 3, 10]
    assert rep.median("exact") > rep.median("dp") > rep.median("nn")
    table = rep.table()
    assert "speedup nn vs dp" in table and "window=" in table
    assert rep.tsv().splitlines()[0] == "method\td\tn\tmedian_ms\treps"


def test_bench_errors():
    rng = np.random.default_rng(5)
    pairs = [(random_curve(rng, 8, 2), random_curve(rng, 8, 2))]
    with pytest.raises(ValueError, match="checkpoint"):
        bench(["nn"], pairs)
    with pytest.raises(ValueError, match="subset"):
        bench(["fast"], pairs)


def test_bench_stability():
    rng = np.random.default_rng(6)
    pairs = [(random_curve(rng, 40, 2), random_curve(rng, 40, 2))]
    one = bench(["dp"], pairs, reps=1).median("dp")
    many = bench(["dp"], pairs, reps=20).median("dp")
    assert abs(one - many) < 0.5 * many
