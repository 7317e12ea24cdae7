import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invopt.errors import InputError, NumericError
from invopt.region import (
    BallRegion,
    BoxRegion,
    box_kkt_residual,
    project_euclidean,
    project_generalized,
    region_from_record,
    region_to_record,
)


def random_spd(rng, n, cond=50.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = np.exp(rng.uniform(0, math.log(cond), n))
    return Q @ np.diag(lam) @ Q.T


def test_euclidean_examples():
    assert np.allclose(project_euclidean(BallRegion([0, 0], 1.0), [2, 0]), [1, 0])
    assert np.allclose(project_euclidean(BoxRegion([0, 0], [1, 1]), [-1, 0.5]), [0, 0.5])
    y = np.array([0.2, 0.3])
    assert np.array_equal(project_euclidean(BallRegion([0, 0], 1.0), y), y)


@pytest.mark.parametrize("region", [BallRegion([0.5, -1, 0], 2.0), BoxRegion([-1, 0, 2], [1, 3, 4])])
def test_identity_matrix_matches_euclidean(region):
    rng = np.random.default_rng(1)
    for _ in range(20):
        y = rng.normal(scale=5, size=3)
        assert np.allclose(project_generalized(region, np.eye(3), y), project_euclidean(region, y), atol=1e-9)


def test_feasible_point_is_fixed():
    rng = np.random.default_rng(2)
    A = random_spd(rng, 4)
    for region in (BallRegion(np.zeros(4), 1.0), BoxRegion(-np.ones(4), np.ones(4))):
        y = 0.3 * np.ones(4)
        assert np.array_equal(project_generalized(region, A, y), y)


def _grid_min(A, y, res=2e-3):
    g = np.arange(-1, 1 + res / 2, res)
    X, Y = np.meshgrid(g, g)
    P = np.column_stack([X.ravel(), Y.ravel()])
    P = P[np.einsum("ij,ij->i", P, P) <= 1.0]
    D = P - y
    vals = np.einsum("ij,jk,ik->i", D, A, D)
    return float(vals.min())


def test_ball_example_against_grid():
    A = np.diag([4.0, 1.0])
    y = np.array([2.0, 2.0])
    w = project_generalized(BallRegion([0, 0], 1.0), A, y)
    assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
    mine = float((w - y) @ A @ (w - y))
    assert mine <= _grid_min(A, y) + 1e-9
    # KKT: A(w - y) = -mu w with mu >= 0
    r = A @ (w - y)
    mu = -float(r @ w)
    assert mu > 0 and np.allclose(r, -mu * w, atol=1e-9)


def variational_ok(region, A, y, w, samples):
    # <A(w - y), z - w> >= 0 for every feasible z
    g = A @ (w - y)
    return np.min((samples - w) @ g) >= -1e-8


@pytest.mark.parametrize("n", [2, 5, 10])
def test_variational_inequality(n):
    rng = np.random.default_rng(n)
    for region in (BallRegion(np.zeros(n), 1.0), BoxRegion(-np.ones(n), np.ones(n))):
        for _ in range(5):
            A = random_spd(rng, n, cond=1e3)
            y = rng.normal(scale=3, size=n)
            w = project_generalized(region, A, y)
            assert region.contains(w, tol=1e-10)
            assert variational_ok(region, A, y, w, region.sample(rng, 500))


def test_box_methods_agree():
    rng = np.random.default_rng(7)
    box = BoxRegion(-np.ones(6), np.ones(6))
    for _ in range(10):
        A = random_spd(rng, 6, cond=1e2)
        y = rng.normal(scale=4, size=6)
        w1 = project_generalized(box, A, y, method="newton")
        w2 = project_generalized(box, A, y, method="pgd")
        assert box_kkt_residual(box, A, y, w1) <= 1e-9
        assert np.allclose(w1, w2, atol=1e-7)


def test_box_matches_vertex_enumeration_of_active_sets():
    # brute force over every choice of (free, lower, upper) per coordinate
    rng = np.random.default_rng(11)
    n = 3
    lo, hi = -np.ones(n), np.ones(n)
    for _ in range(10):
        A = random_spd(rng, n)
        y = rng.normal(scale=3, size=n)
        best = math.inf
        for pattern in itertools.product((0, 1, 2), repeat=n):
            fixed = {i: (lo[i] if p == 1 else hi[i]) for i, p in enumerate(pattern) if p}
            free = [i for i in range(n) if i not in fixed]
            w = np.array([fixed.get(i, 0.0) for i in range(n)])
            if free:
                # minimize over free coordinates with the fixed ones pinned
                Aff = A[np.ix_(free, free)]
                rhs = A[free] @ y - A[np.ix_(free, list(fixed))] @ w[list(fixed)] if fixed else A[free] @ y
                w[free] = np.linalg.solve(Aff, rhs)
            if np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12):
                best = min(best, float((w - y) @ A @ (w - y)))
        w = project_generalized(BoxRegion(lo, hi), A, y)
        assert float((w - y) @ A @ (w - y)) == pytest.approx(best, rel=1e-9, abs=1e-12)


def test_non_pd_matrix_rejected():
    A = np.diag([1.0, -1.0])
    with pytest.raises(NumericError):
        project_generalized(BallRegion([0, 0], 1.0), A, [3.0, 0.0])
    with pytest.raises(NumericError):
        project_generalized(BoxRegion([0, 0], [1, 1]), A, [3.0, 0.0])


def test_shape_mismatch_rejected():
    with pytest.raises(InputError):
        project_generalized(BallRegion([0, 0], 1.0), np.eye(3), [3.0, 0.0])
    with pytest.raises(InputError):
        project_euclidean(BallRegion([0, 0], 1.0), [1.0])


@given(st.integers(0, 10_000))
def test_projection_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, 3, cond=100)
    y = rng.normal(scale=3, size=3)
    for region in (BallRegion(np.zeros(3), 1.0), BoxRegion(-np.ones(3), np.ones(3))):
        w = project_generalized(region, A, y)
        w2 = project_generalized(region, A, w)
        assert np.allclose(w, w2, atol=1e-9)


def test_region_record_round_trip():
    for r in (BallRegion([0, 1], 2.5), BoxRegion([0, -1], [1, 1])):
        assert region_to_record(region_from_record(region_to_record(r))) == region_to_record(r)
