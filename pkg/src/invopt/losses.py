"""Suboptimality loss and the quadratic surrogate losses fed to ONS experts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from invopt.errors import InputError
from invopt.geometry import ActionSet, Vector, argmax_linear, as_vector

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Observation:
    """Feedback of one round: the action set and the agent's chosen action."""

    action_set: ActionSet
    chosen_action: Vector

    def __post_init__(self):
        x = as_vector(self.chosen_action, "chosen_action", dim=self.action_set.dim)
        if not self.action_set.contains(x, MEMBERSHIP_TOL):
            raise InputError("chosen action is not a member of the action set")
        object.__setattr__(self, "chosen_action", x)

    @classmethod
    def from_oracle(cls, action_set: ActionSet, chosen_action: Vector) -> "Observation":
        """Skip the membership test for actions produced by the set's own oracle."""
        obs = object.__new__(cls)
        object.__setattr__(obs, "action_set", action_set)
        object.__setattr__(obs, "chosen_action", chosen_action)
        return obs


@dataclass(frozen=True, eq=False)
class SurrogateParams:
    """``f(w) = -eta <anchor - w, g> + eta^2 <anchor - w, g>^2``.

    When ``bound`` (the constant H) is given, ``eta * H <= 1/5`` is enforced.
    """

    eta: float
    anchor: Vector
    gradient: Vector
    bound: float | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise InputError(f"eta must be positive, got {self.eta}")
        if self.bound is not None and self.eta * self.bound > 0.2 * (1 + 1e-12):
            raise InputError(f"eta*H = {self.eta * self.bound:.6g} exceeds 1/5")
        a = as_vector(self.anchor, "anchor")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "gradient", as_vector(self.gradient, "gradient", dim=a.shape[0]))


def suboptimality_loss(obs: Observation, c) -> float:
    c = as_vector(c, "c", dim=obs.action_set.dim)
    best = argmax_linear(obs.action_set, c)
    return float(c @ best) - float(c @ obs.chosen_action)


def suboptimality_subgradient(obs: Observation, c) -> Vector:
    """``xhat - x_t`` with ``xhat`` the oracle's maximizer for ``c``."""
    return argmax_linear(obs.action_set, c) - obs.chosen_action


def _inner(p: SurrogateParams, w) -> float:
    w = np.asarray(w, dtype=float)
    if w.shape != p.anchor.shape:
        raise InputError(f"point has shape {w.shape}, expected {p.anchor.shape}")
    return float((p.anchor - w) @ p.gradient)


def surrogate_eval(p: SurrogateParams, w) -> float:
    s = _inner(p, w)
    return -p.eta * s + p.eta * p.eta * s * s


def surrogate_gradient(p: SurrogateParams, w) -> Vector:
    s = _inner(p, w)
    return p.eta * (1.0 - 2.0 * p.eta * s) * p.gradient
