"""Randomized arc-shrinking learner for planar objectives.

The learner keeps an arc of candidate directions that contains the agent's
unit objective, plays a uniform sample from it, and after each round keeps
only the part of the arc that lies in the normal cone of the observed action.
"""

from __future__ import annotations

import math

import numpy as np

from invopt.errors import ConfigError, ProtocolError
from invopt.geometry import TWO_PI, AngularInterval, Vector, normal_cone_2d, wrap_angle
from invopt.learners import Learner
from invopt.losses import Observation

ANGLE_TOL = 1e-9


def direction(theta: float) -> Vector:
    return np.array([math.cos(theta), math.sin(theta)])


def arc_sample_uniform(arc: AngularInterval, rng: np.random.Generator) -> Vector:
    """Unit vector at an angle drawn uniformly from the arc (inverse transform)."""
    if arc.width == 0.0:
        return direction(arc.start)
    return direction(arc.start + arc.width * float(rng.random()))


def _pieces(arc: AngularInterval, cone: AngularInterval) -> list[tuple[float, float]]:
    """Components of the intersection as offsets [lo, hi] relative to ``arc.start``."""
    d = wrap_angle(cone.start - arc.start)
    out = []
    for shift in (d, d - TWO_PI):
        lo, hi = max(0.0, shift), min(arc.width, shift + cone.width)
        if lo <= hi:
            out.append((lo, hi))
    # merge touching pieces (possible when arc is nearly the full circle)
    out.sort()
    merged: list[tuple[float, float]] = []
    for lo, hi in out:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
        else:
            merged.append((lo, hi))
    return merged


def intersection_measure(arc: AngularInterval, cone: AngularInterval) -> float:
    if arc.is_full:
        return cone.width
    if cone.is_full:
        return arc.width
    return sum(hi - lo for lo, hi in _pieces(arc, cone))


def arc_intersect(arc: AngularInterval, cone: AngularInterval, tol: float = ANGLE_TOL,
                  pieces: list[tuple[float, float]] | None = None) -> AngularInterval:
    """Connected intersection of two arcs.

    If rounding makes the exact intersection empty, the cone is widened by
    ``tol`` on both sides before giving up.  If it splits in two (impossible
    for cones of width at most pi), the larger component is kept.  ``pieces``
    may pass in an already computed ``_pieces(arc, cone)``.
    """
    if arc.is_full:
        return cone
    if cone.is_full:
        return arc
    if pieces is None:
        pieces = _pieces(arc, cone)
    if not pieces:
        wide = AngularInterval(cone.start - tol, min(TWO_PI, cone.width + 2 * tol))
        pieces = _pieces(arc, wide)
        if not pieces:
            raise ProtocolError("arc and normal cone do not intersect; feedback is not optimal")
    lo, hi = max(pieces, key=lambda p: p[1] - p[0])
    return AngularInterval(arc.start + lo, hi - lo)


class Arc2DLearner(Learner):
    """Plays uniform draws from the surviving arc; requires optimal feedback in the plane."""

    name = "arc2d"

    def __init__(self, rng: np.random.Generator, n: int = 2):
        super().__init__()
        if n != 2:
            raise ConfigError("arc2d learner only works in dimension 2")
        self.rng = rng
        self.arc = AngularInterval.full()
        self.removed_total = 0.0
        self.history: list[tuple[AngularInterval, AngularInterval]] = []
        self.keep_history = False

    def _predict(self) -> Vector:
        return arc_sample_uniform(self.arc, self.rng)

    def _update(self, chat: Vector, obs: Observation) -> None:
        # membership was validated when the observation was built
        cone = normal_cone_2d(obs.action_set, obs.chosen_action, check=False)
        if self.arc.is_full or cone.is_full:
            pieces = None
            kept = intersection_measure(self.arc, cone)
        else:
            pieces = _pieces(self.arc, cone)
            kept = sum(hi - lo for lo, hi in pieces)
        self.removed_total += max(0.0, self.arc.width - kept)
        if self.keep_history:
            self.history.append((self.arc, cone))
        self.arc = arc_intersect(self.arc, cone, pieces=pieces)
