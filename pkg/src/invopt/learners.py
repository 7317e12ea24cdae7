"""Sequential learners for online inverse linear optimization.

All learners alternate ``predict()`` (returns the current estimate of the
agent's objective) and ``update(obs)``.  The inverse-ONS learner and MetaGrad
both run Online Newton Step on the quadratic surrogates

    f(w) = -eta <w_t - w, g_t> + eta^2 <w_t - w, g_t>^2,   g_t = xhat_t - x_t,

MetaGrad over a geometric grid of ``eta`` values mixed by tilted exponential
weights, inverse-ONS with the single rate ``eta = 1/(5B)``.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from invopt.errors import ConfigError, ProtocolError
from invopt.geometry import Vector, argmax_linear, as_vector
from invopt.losses import (
    Observation,
    SurrogateParams,
    suboptimality_subgradient,
    surrogate_eval,
    surrogate_gradient,
)
from invopt.region import FeasibleRegion, project_euclidean, project_generalized


class OnsState:
    """One Online Newton Step instance run on eta-surrogates with range bound H.

    With ``alpha = 2/(1+2 eta H)^2`` and ``beta = eta H + 2 eta^2 H^2`` the step
    parameter is ``gamma = min(1/beta, alpha)/2`` and ``A_0 = eps I`` with
    ``eps = n / (W^2 gamma^2)``.
    """

    def __init__(self, region: FeasibleRegion, eta: float, H: float, W: float | None = None,
                 w1=None):
        if not H > 0:
            raise ConfigError(f"H must be positive, got {H}")
        if not (0 < eta <= 1.0 / (5.0 * H) * (1 + 1e-12)):
            raise ConfigError(f"eta={eta} outside (0, 1/(5H)] with H={H}")
        n = region.dim
        self.region = region
        self.eta = float(eta)
        self.H = float(H)
        self.W = float(W) if W is not None else region.diameter()
        alpha = 2.0 / (1.0 + 2.0 * eta * H) ** 2
        beta = eta * H + 2.0 * eta * eta * H * H
        self.gamma = 0.5 * min(1.0 / beta, alpha)
        self.epsilon = n / (self.W**2 * self.gamma**2)
        self.matrix = self.epsilon * np.eye(n)
        w1 = region.midpoint() if w1 is None else as_vector(w1, "w1", dim=n)
        if not region.contains(w1):
            raise ConfigError("initial iterate must lie in the region")
        self.iterate = np.array(w1, dtype=float)

    def step(self, grad) -> "OnsState":
        grad = np.asarray(grad, dtype=float)
        if not np.any(grad):
            return self
        self.matrix = self.matrix + np.outer(grad, grad)
        newton = self.iterate - cho_solve(cho_factor(self.matrix), grad) / self.gamma
        self.iterate = project_generalized(self.region, self.matrix, newton)
        return self


def ons_init(region: FeasibleRegion, n: int, W: float, H: float, eta: float, w1=None) -> OnsState:
    if region.dim != n:
        raise ConfigError(f"region dimension {region.dim} != n={n}")
    return OnsState(region, eta, H, W=W, w1=w1)


def ons_step(state: OnsState, grad) -> OnsState:
    return state.step(grad)


def metagrad_grid(H: float, T: int) -> list[float]:
    """Learning rates ``2^-i / (5H)`` for ``i = 0..ceil(log2(T)/2)``, descending."""
    if not H > 0 or T < 1:
        raise ConfigError("grid needs H > 0 and T >= 1")
    top = 0
    while 4**top < T:  # ceil(log2(T)/2) without floating point
        top += 1
    return [2.0**-i / (5.0 * H) for i in range(top + 1)]


def prior_weights(k: int) -> list[float]:
    c = 1.0 + 1.0 / k
    return [c / ((i + 1) * (i + 2)) for i in range(k)]


def metagrad_prior(T: int) -> list[float]:
    return prior_weights(len(metagrad_grid(1.0, T)))


def exp_weights_update(log_weights: np.ndarray, losses: np.ndarray) -> np.ndarray:
    """Normalized log of ``w_i * exp(-loss_i)``."""
    logw = np.asarray(log_weights, dtype=float) - np.asarray(losses, dtype=float)
    return logw - logsumexp(logw)


class Learner:
    """Enforces the predict/update alternation."""

    name = "learner"

    def __init__(self):
        self._pending: Vector | None = None

    def predict(self) -> Vector:
        if self._pending is not None:
            raise ProtocolError("predict() called twice without update()")
        self._pending = self._predict()
        return self._pending.copy()

    def update(self, obs: Observation) -> None:
        if self._pending is None:
            raise ProtocolError("update() called before predict()")
        chat, self._pending = self._pending, None
        self._update(chat, obs)

    def _predict(self) -> Vector:
        raise NotImplementedError

    def _update(self, chat: Vector, obs: Observation) -> None:
        raise NotImplementedError


class OnsInverseLearner(Learner):
    """ONS on surrogates anchored at the current prediction, ``eta = 1/(5B)`` by default."""

    name = "ons"

    def __init__(self, region: FeasibleRegion, B: float, eta: float | None = None, w1=None,
                 W: float | None = None):
        super().__init__()
        self.B = float(B)
        self.eta = 1.0 / (5.0 * B) if eta is None else float(eta)
        self.state = OnsState(region, self.eta, B, W=W, w1=w1)

    def _predict(self) -> Vector:
        return self.state.iterate.copy()

    def _update(self, chat: Vector, obs: Observation) -> None:
        g = suboptimality_subgradient(obs, chat)
        params = SurrogateParams(self.eta, chat, g)
        self.state.step(surrogate_gradient(params, chat))


class MetaGradInverseLearner(Learner):
    """MetaGrad on suboptimality losses: ONS eta-experts mixed by tilted EWA."""

    name = "metagrad"

    def __init__(self, region: FeasibleRegion, B: float, T: int, grid: Sequence[float] | None = None,
                 w1=None, W: float | None = None):
        super().__init__()
        self.B = float(B)
        self.grid = np.array(metagrad_grid(B, T) if grid is None else sorted(grid, reverse=True))
        if self.grid.size == 0:
            raise ConfigError("MetaGrad needs at least one grid point")
        self.experts = [OnsState(region, eta, B, W=W, w1=w1) for eta in self.grid]
        self.log_weights = np.log(prior_weights(len(self.experts)))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def _predict(self) -> Vector:
        tilt = self.grid * self.weights
        coef = tilt / tilt.sum()
        return coef @ np.stack([e.iterate for e in self.experts])

    def _update(self, chat: Vector, obs: Observation) -> None:
        g = suboptimality_subgradient(obs, chat)
        if not np.any(g):
            return
        losses = np.empty(len(self.experts))
        for k, expert in enumerate(self.experts):
            params = SurrogateParams(expert.eta, chat, g)
            losses[k] = surrogate_eval(params, expert.iterate)
            expert.step(surrogate_gradient(params, expert.iterate))
        self.log_weights = exp_weights_update(self.log_weights, losses)


class OgdLearner(Learner):
    """Projected online gradient descent on ``c -> <c, xhat_t - x_t>``."""

    name = "ogd"

    def __init__(self, region: FeasibleRegion, D: float, K: float, step_scale: float | None = None,
                 w1=None, schedule: Callable[[int], float] | None = None):
        super().__init__()
        self.region = region
        scale = D / K if step_scale is None else float(step_scale)
        self.step_schedule = schedule or (lambda t: scale / math.sqrt(t))
        self.iterate = region.midpoint() if w1 is None else as_vector(w1, "w1", dim=region.dim)
        self.t = 0

    def _predict(self) -> Vector:
        return self.iterate.copy()

    def _update(self, chat: Vector, obs: Observation) -> None:
        self.t += 1
        g = argmax_linear(obs.action_set, chat) - obs.chosen_action
        if np.any(g):
            self.iterate = project_euclidean(self.region, chat - self.step_schedule(self.t) * g)
