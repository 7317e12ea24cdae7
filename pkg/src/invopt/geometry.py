"""Action sets, their linear-maximization oracles, and 2D normal cones.

Every action set exposes ``argmax(c)`` in closed form.  Ties are broken
deterministically so that traces are reproducible:

* ``Ball`` with ``c = 0`` returns the center,
* ``Box`` takes the lower bound on coordinates where ``c_i = 0``,
* ``Segment`` returns ``endpoint_a`` when both endpoints score equally,
* ``VertexSet`` returns the lowest-index maximizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import NDArray

from invopt.errors import InputError

Vector = NDArray[np.float64]

TWO_PI = 2.0 * math.pi
BOUNDARY_TOL = 1e-9


def as_vector(x, name: str = "vector", dim: int | None = None) -> Vector:
    arr = x if type(x) is np.ndarray and x.dtype == np.float64 else np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InputError(f"{name} has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise InputError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    return arr


def _check_dim(c, dim: int) -> Vector:
    c = np.asarray(c, dtype=float)
    if c.shape != (dim,):
        raise InputError(f"objective has shape {c.shape}, expected ({dim},)")
    return c


@dataclass(frozen=True, eq=False)
class Ball:
    center: Vector
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, "center"))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise InputError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def argmax(self, c) -> Vector:
        c = _check_dim(c, self.dim)
        norm = float(np.linalg.norm(c))
        if norm == 0.0:
            return self.center.copy()
        return self.center + (self.radius / norm) * c

    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x, tol: float = BOUNDARY_TOL) -> bool:
        return float(np.linalg.norm(np.asarray(x) - self.center)) <= self.radius + tol

    def extreme_point(self, rng: np.random.Generator) -> Vector:
        d = rng.standard_normal(self.dim)
        return self.center + self.radius * d / np.linalg.norm(d)


@dataclass(frozen=True, eq=False)
class Box:
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

    def argmax(self, c) -> Vector:
        c = _check_dim(c, self.dim)
        return np.where(c > 0, self.upper, self.lower)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol: float = BOUNDARY_TOL) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def corners(self) -> NDArray[np.float64]:
        n = self.dim
        bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def extreme_point(self, rng: np.random.Generator) -> Vector:
        pick = rng.integers(0, 2, size=self.dim)
        return np.where(pick == 1, self.upper, self.lower)


@dataclass(frozen=True, eq=False)
class Segment:
    endpoint_a: Vector
    endpoint_b: Vector

    def __post_init__(self):
        a = as_vector(self.endpoint_a, "endpoint_a")
        b = as_vector(self.endpoint_b, "endpoint_b", dim=a.shape[0])
        object.__setattr__(self, "endpoint_a", a)
        object.__setattr__(self, "endpoint_b", b)

    @property
    def dim(self) -> int:
        return self.endpoint_a.shape[0]

    def argmax(self, c) -> Vector:
        c = _check_dim(c, self.dim)
        if float(c @ self.endpoint_a) >= float(c @ self.endpoint_b):
            return self.endpoint_a.copy()
        return self.endpoint_b.copy()

    def diameter(self) -> float:
        return float(np.linalg.norm(self.endpoint_a - self.endpoint_b))

    def contains(self, x, tol: float = BOUNDARY_TOL) -> bool:
        a, b = self.endpoint_a, self.endpoint_b
        x = np.asarray(x, dtype=float)
        ab = b - a
        denom = float(ab @ ab)
        s = 0.0 if denom == 0.0 else min(1.0, max(0.0, float((x - a) @ ab) / denom))
        r = a + s * ab - x
        return math.sqrt(float(r @ r)) <= tol

    def extreme_point(self, rng: np.random.Generator) -> Vector:
        return (self.endpoint_a if rng.integers(0, 2) == 0 else self.endpoint_b).copy()


@dataclass(frozen=True, eq=False)
class VertexSet:
    points: NDArray[np.float64]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("vertex set needs a non-empty (m, n) array of points")
        if not np.all(np.isfinite(pts)):
            raise InputError("vertex set has non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def argmax(self, c) -> Vector:
        c = _check_dim(c, self.dim)
        return self.points[int(np.argmax(self.points @ c))].copy()

    def diameter(self) -> float:
        p = self.points
        sq = np.sum(p * p, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (p @ p.T)
        i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
        return float(np.linalg.norm(p[i] - p[j]))

    def contains(self, x, tol: float = BOUNDARY_TOL) -> bool:
        d = self.points - np.asarray(x, dtype=float)
        return bool(np.einsum("ij,ij->i", d, d).min() <= tol * tol)

    def extreme_point(self, rng: np.random.Generator) -> Vector:
        return self.points[int(rng.integers(0, self.points.shape[0]))].copy()


ActionSet = Union[Ball, Box, Segment, VertexSet]


def argmax_linear(action_set: ActionSet, c) -> Vector:
    """Return a maximizer of ``<c, x>`` over the set (deterministic ties)."""
    return action_set.argmax(c)


def diameter_l2(action_set: ActionSet) -> float:
    return action_set.diameter()


# ---------------------------------------------------------------------------
# angular intervals on the unit circle


def wrap_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    return 0.0 if t >= TWO_PI else t


@dataclass(frozen=True)
class AngularInterval:
    """Closed arc ``{start + s : 0 <= s <= width}`` on S^1; width 2*pi is the full circle."""

    start: float
    width: float

    def __post_init__(self):
        w = float(self.width)
        if not (w >= 0.0) or w > TWO_PI + 1e-12:
            raise InputError(f"arc width must lie in [0, 2*pi], got {w}")
        object.__setattr__(self, "width", min(w, TWO_PI))
        object.__setattr__(self, "start", 0.0 if w >= TWO_PI else wrap_angle(float(self.start)))

    @classmethod
    def full(cls) -> "AngularInterval":
        return cls(0.0, TWO_PI)

    @classmethod
    def point(cls, theta: float) -> "AngularInterval":
        return cls(theta, 0.0)

    @property
    def is_full(self) -> bool:
        return self.width >= TWO_PI

    @property
    def end(self) -> float:
        return self.start + self.width

    @property
    def midpoint(self) -> float:
        return wrap_angle(self.start + 0.5 * self.width)

    def offset(self, theta: float) -> float:
        """Counter-clockwise distance from ``start`` to ``theta``, in [0, 2*pi)."""
        return wrap_angle(theta - self.start)

    def contains(self, theta: float, tol: float = 0.0) -> bool:
        if self.is_full:
            return True
        off = self.offset(theta)
        return off <= self.width + tol or off >= TWO_PI - tol

    def contains_vector(self, c, tol: float = 0.0) -> bool:
        return self.contains(math.atan2(float(c[1]), float(c[0])), tol)


def _cone_of_differences(diffs, tol: float) -> AngularInterval:
    """Directions c with <c, d> >= 0 for every d in ``diffs`` (pairs of floats)."""
    # plain floats: the sets are small and numpy call overhead dominates here
    tol2 = tol * tol
    phis = sorted(math.atan2(dy, dx) % TWO_PI for dx, dy in diffs if dx * dx + dy * dy > tol2)
    if not phis:
        return AngularInterval.full()
    gaps = [b - a for a, b in zip(phis, phis[1:])] + [phis[0] + TWO_PI - phis[-1]]
    k = max(range(len(gaps)), key=gaps.__getitem__)
    gap = gaps[k]
    if gap < math.pi - tol:
        raise InputError("point is interior to the set; its normal cone is trivial")
    if sum(1 for g in gaps if g >= math.pi - tol) > 1:
        raise InputError("normal cone is a line, not representable as a single arc")
    # the differences occupy the arc [phi_lo, phi_hi] of span 2*pi - gap (<= pi)
    return AngularInterval(phis[k] - 0.5 * math.pi, max(0.0, gap - math.pi))


def normal_cone_2d(action_set: ActionSet, x, tol: float = BOUNDARY_TOL, check: bool = True) -> AngularInterval:
    """Unit directions c for which ``x`` maximizes ``<c, .>`` over the set, as an arc.

    ``check=False`` skips the membership test for callers that already did it.
    """
    if action_set.dim != 2:
        raise InputError("normal_cone_2d requires a planar set")
    x = as_vector(x, "x", dim=2)
    if check and not action_set.contains(x, tol):
        raise InputError("x is not a member of the action set")
    if isinstance(action_set, Ball):
        d = x - action_set.center
        if abs(float(np.linalg.norm(d)) - action_set.radius) > tol:
            raise InputError("point is interior to the ball; its normal cone is trivial")
        return AngularInterval.point(math.atan2(d[1], d[0]))
    if isinstance(action_set, Segment):
        x0, x1 = x.tolist()
        diffs = [(x0 - p0, x1 - p1) for p0, p1 in (action_set.endpoint_a.tolist(), action_set.endpoint_b.tolist())]
        return _cone_of_differences(diffs, tol)
    pts = action_set.corners() if isinstance(action_set, Box) else action_set.points
    return _cone_of_differences((x - pts).tolist(), tol)


# ---------------------------------------------------------------------------
# tagged-record text form, e.g. "ball center=0,0 radius=0.5"


def _fmt(v) -> str:
    return ",".join(repr(float(t)) for t in np.atleast_1d(v))


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad numeric list {text!r}") from exc


def parse_fields(text: str) -> tuple[str, dict[str, str]]:
    parts = text.split()
    if not parts:
        raise InputError("empty record")
    kind, out = parts[0].lower(), {}
    for part in parts[1:]:
        if "=" not in part:
            raise InputError(f"record field {part!r} is not key=value")
        k, v = part.split("=", 1)
        if k in out:
            raise InputError(f"duplicate field {k!r}")
        out[k] = v
    return kind, out


def _expect(fields: dict[str, str], keys: set[str], kind: str) -> None:
    if set(fields) != keys:
        raise InputError(f"{kind} record needs fields {sorted(keys)}, got {sorted(fields)}")


def action_set_to_record(s: ActionSet) -> str:
    if isinstance(s, Ball):
        return f"ball center={_fmt(s.center)} radius={s.radius!r}"
    if isinstance(s, Box):
        return f"box lower={_fmt(s.lower)} upper={_fmt(s.upper)}"
    if isinstance(s, Segment):
        return f"segment a={_fmt(s.endpoint_a)} b={_fmt(s.endpoint_b)}"
    return "vertices points=" + ";".join(_fmt(p) for p in s.points)


def action_set_from_record(text: str) -> ActionSet:
    kind, f = parse_fields(text)
    if kind == "ball":
        _expect(f, {"center", "radius"}, kind)
        return Ball(_parse_floats(f["center"]), float(f["radius"]))
    if kind == "box":
        _expect(f, {"lower", "upper"}, kind)
        return Box(_parse_floats(f["lower"]), _parse_floats(f["upper"]))
    if kind == "segment":
        _expect(f, {"a", "b"}, kind)
        return Segment(_parse_floats(f["a"]), _parse_floats(f["b"]))
    if kind == "vertices":
        _expect(f, {"points"}, kind)
        rows = [_parse_floats(r) for r in f["points"].split(";") if r.strip()]
        if len({len(r) for r in rows}) != 1:
            raise InputError("vertex rows have inconsistent dimensions")
        return VertexSet(np.array(rows))
    raise InputError(f"unknown action set kind {kind!r}")
