"""Prediction regions and the projections used by the learners.

``project_generalized`` solves ``min_w (w - y)^T A (w - y)`` over the region.
For a ball this is a one-dimensional root find on the Lagrange multiplier of
the norm constraint; for a box it is a bound-constrained QP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

from invopt.errors import InputError, NumericError
from invopt.geometry import Vector, _fmt, _parse_floats, _expect, as_vector, parse_fields

KKT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BallRegion:
    center: Vector
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, "center"))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InputError(f"region radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def diameter(self) -> float:
        return 2.0 * self.radius

    def midpoint(self) -> Vector:
        return self.center.copy()

    def contains(self, w, tol: float = 1e-8) -> bool:
        return float(np.linalg.norm(np.asarray(w) - self.center)) <= self.radius + tol

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        """Uniform samples from the ball."""
        d = rng.standard_normal((size, self.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = self.radius * rng.random(size) ** (1.0 / self.dim)
        return self.center + d * r[:, None]


@dataclass(frozen=True, eq=False)
class BoxRegion:
    lower: Vector
    upper: Vector

    def __post_init__(self):
        lo = as_vector(self.lower, "lower")
        hi = as_vector(self.upper, "upper", dim=lo.shape[0])
        if np.any(lo > hi):
            raise InputError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def midpoint(self) -> Vector:
        return 0.5 * (self.lower + self.upper)

    def contains(self, w, tol: float = 1e-8) -> bool:
        w = np.asarray(w)
        return bool(np.all(w >= self.lower - tol) and np.all(w <= self.upper + tol))

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return self.lower + (self.upper - self.lower) * rng.random((size, self.dim))


FeasibleRegion = Union[BallRegion, BoxRegion]


def region_to_record(region: FeasibleRegion) -> str:
    if isinstance(region, BallRegion):
        return f"ball center={_fmt(region.center)} radius={region.radius!r}"
    return f"box lower={_fmt(region.lower)} upper={_fmt(region.upper)}"


def region_from_record(text: str) -> FeasibleRegion:
    kind, f = parse_fields(text)
    if kind == "ball":
        _expect(f, {"center", "radius"}, kind)
        return BallRegion(_parse_floats(f["center"]), float(f["radius"]))
    if kind == "box":
        _expect(f, {"lower", "upper"}, kind)
        return BoxRegion(_parse_floats(f["lower"]), _parse_floats(f["upper"]))
    raise InputError(f"unknown region kind {kind!r} (ball or box)")


def _check(region: FeasibleRegion, y) -> Vector:
    y = np.asarray(y, dtype=float)
    if y.shape != (region.dim,):
        raise InputError(f"point has shape {y.shape}, region dimension is {region.dim}")
    return y


def project_euclidean(region: FeasibleRegion, y) -> Vector:
    y = _check(region, y)
    if isinstance(region, BoxRegion):
        return np.clip(y, region.lower, region.upper)
    d = y - region.center
    norm = float(np.linalg.norm(d))
    if norm <= region.radius:
        return y.copy()
    return region.center + (region.radius / norm) * d


def _ball_generalized(region: BallRegion, A: NDArray, y: Vector, max_iter: int) -> Vector:
    z = y - region.center
    r = region.radius
    if float(z @ z) <= r * r:
        return y.copy()
    lam, Q = np.linalg.eigh(A)
    if lam[0] <= 0:
        raise NumericError(f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})")
    b = lam * (Q.T @ z)

    # phi(mu) = ||(A + mu I)^{-1} A z|| is decreasing; find phi(mu) = r on a bracket,
    # Newton on the secular form 1/r - 1/phi (nearly linear in mu), safeguarded by bisection.
    lo, hi = 0.0, float(np.linalg.norm(b)) / r
    mu = 0.5 * (lo + hi)
    for _ in range(max_iter):
        u = b / (lam + mu)
        phi = float(np.linalg.norm(u))
        if phi > r:
            lo = mu
        else:
            hi = mu
        if abs(phi - r) <= 1e-14 * r or hi - lo <= 1e-15 * max(1.0, hi):
            break
        dphi = -float(u @ (u / (lam + mu))) / phi
        nxt = mu - (1.0 / r - 1.0 / phi) * phi * phi / dphi
        mu = nxt if lo < nxt < hi else 0.5 * (lo + hi)
    else:
        raise NumericError("ball projection did not converge")
    w = Q @ (b / (lam + mu))
    # tiny rescale so the result is feasible to rounding
    nw = float(np.linalg.norm(w))
    if nw > r:
        w *= r / nw
    return region.center + w


def box_kkt_residual(region: BoxRegion, A: NDArray, y: Vector, w: Vector) -> float:
    """Natural residual ``||w - clip(w - grad / L)||_inf`` in units of w."""
    L = float(np.linalg.eigvalsh(A)[-1])
    grad = A @ (w - y)
    return float(np.max(np.abs(w - np.clip(w - grad / L, region.lower, region.upper))))


def _power_lmax(A: NDArray, iters: int = 50) -> float:
    v = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    est = 0.0
    for _ in range(iters):
        u = A @ v
        est = float(np.linalg.norm(u))
        if est == 0.0:
            return 0.0
        v = u / est
    # power iteration underestimates; pad so 1/L stays a safe step
    return 1.01 * est


def _box_pgd(region: BoxRegion, A: NDArray, y: Vector, w: Vector, tol: float, max_iter: int):
    L = _power_lmax(A)
    lo, hi = region.lower, region.upper
    for _ in range(max_iter):
        nxt = np.clip(w - (A @ (w - y)) / L, lo, hi)
        if float(np.max(np.abs(nxt - w))) <= tol:
            return nxt, True
        w = nxt
    return w, False


def _box_projected_newton(region: BoxRegion, A: NDArray, y: Vector, w: Vector, tol: float,
                          max_iter: int = 200):
    """Projected Newton with an epsilon-active set and Armijo search along the projection arc."""
    lo, hi = region.lower, region.upper
    L = float(np.linalg.eigvalsh(A)[-1])

    def q(v):
        d = v - y
        return 0.5 * float(d @ (A @ d))

    for _ in range(max_iter):
        grad = A @ (w - y)
        if float(np.max(np.abs(w - np.clip(w - grad / L, lo, hi)))) <= tol:
            return w, True
        eps = min(1e-3, float(np.max(np.abs(w - np.clip(w - grad, lo, hi)))))
        active = ((w <= lo + eps) & (grad > 0)) | ((w >= hi - eps) & (grad < 0))
        free = ~active
        d = np.zeros_like(w)
        if np.any(free):
            d[free] = -np.linalg.solve(A[np.ix_(free, free)], grad[free])
        d[active] = -grad[active] / L
        qw, s = q(w), 1.0
        for _ in range(60):
            cand = np.clip(w + s * d, lo, hi)
            dec = -float(grad[free] @ (cand[free] - w[free])) - float(grad[active] @ (cand[active] - w[active]))
            if qw - q(cand) >= 1e-4 * max(dec, 0.0) and np.any(cand != w):
                break
            s *= 0.5
        else:
            return w, False
        w = cand
    return w, False


def project_generalized(region: FeasibleRegion, A, y, *, method: str = "newton",
                        max_iter: int | None = None) -> Vector:
    """Minimizer of ``(w - y)^T A (w - y)`` over the region.

    ``method`` only matters for boxes: ``"newton"`` (projected Newton, falling
    back to gradient steps) or ``"pgd"`` (projected gradient with step
    ``1/lambda_max``).
    """
    y = _check(region, y)
    A = np.asarray(A, dtype=float)
    n = region.dim
    if A.shape != (n, n):
        raise InputError(f"matrix has shape {A.shape}, expected ({n}, {n})")
    if isinstance(region, BallRegion):
        return _ball_generalized(region, A, y, max_iter or 200)

    if region.contains(y, tol=0.0):
        return y.copy()
    if float(np.linalg.eigvalsh(A)[0]) <= 0:
        raise NumericError("matrix is not positive definite")
    w = np.clip(y, region.lower, region.upper)
    if method == "newton":
        w, ok = _box_projected_newton(region, A, y, w, KKT_TOL)
        if ok:
            return w
    elif method != "pgd":
        raise InputError(f"unknown projection method {method!r}")
    w, ok = _box_pgd(region, A, y, w, KKT_TOL, max_iter or 100_000)
    if not ok:
        raise NumericError("box projection did not reach the KKT tolerance")
    return w
