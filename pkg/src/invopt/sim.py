"""Agents, instance generators, the round loop and per-round traces."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from invopt.arc2d import Arc2DLearner
from invopt.errors import ConfigError, ExperimentError, InputError
from invopt.geometry import (
    ActionSet,
    Ball,
    Box,
    TWO_PI,
    Segment,
    Vector,
    VertexSet,
    argmax_linear,
    as_vector,
)
from invopt.learners import Learner, MetaGradInverseLearner, OgdLearner, OnsInverseLearner
from invopt.losses import Observation
from invopt.region import BallRegion, BoxRegion, FeasibleRegion


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent counter-based (Philox) streams for instance, agent and learner randomness."""
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return {name: np.random.Generator(np.random.Philox(ss))
            for name, ss in zip(("instance", "agent", "learner"), children)}


def _unit(rng: np.random.Generator, n: int) -> Vector:
    d = rng.standard_normal(n)
    return d / np.linalg.norm(d)


def _in_ball(rng: np.random.Generator, n: int, radius: float) -> Vector:
    return _unit(rng, n) * radius * rng.random() ** (1.0 / n)


# ---------------------------------------------------------------------------
# action-set generators.  Each knows its dimension and the diameter bound K.


@dataclass
class RandomBalls:
    n: int
    r_min: float = 0.1
    r_max: float = 0.5
    spread: float = 1.0
    kind = "random_balls"

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise ConfigError("random_balls needs 0 < r_min <= r_max")

    @property
    def K(self) -> float:
        return 2.0 * self.r_max

    def draw(self, t: int, rng: np.random.Generator) -> ActionSet:
        return Ball(_in_ball(rng, self.n, self.spread), rng.uniform(self.r_min, self.r_max))


@dataclass
class RandomBoxes:
    n: int
    diameter: float = 1.0
    spread: float = 1.0
    kind = "random_boxes"

    @property
    def K(self) -> float:
        return self.diameter

    def draw(self, t: int, rng: np.random.Generator) -> ActionSet:
        sides = rng.random(self.n) + 1e-3
        sides *= self.diameter / np.linalg.norm(sides)
        lower = _in_ball(rng, self.n, self.spread) - 0.5 * sides
        return Box(lower, lower + sides)


@dataclass
class RandomVertexSets:
    """``m`` points on a sphere of radius K/2 around a random center."""

    n: int
    m: int = 8
    diameter: float = 1.0
    spread: float = 1.0
    kind = "random_vertex_sets"

    @property
    def K(self) -> float:
        return self.diameter

    def draw(self, t: int, rng: np.random.Generator) -> ActionSet:
        center = _in_ball(rng, self.n, self.spread)
        d = rng.standard_normal((self.m, self.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return VertexSet(center + 0.5 * self.diameter * d)


@dataclass
class LowerBoundSegments:
    """Axis-aligned segments of half-length ``(B/4) sqrt(n)``; rounds past n reuse axis n."""

    n: int
    B: float = 1.0
    kind = "lower_bound_segments"

    @property
    def K(self) -> float:
        return 0.5 * self.B * math.sqrt(self.n)

    def draw(self, t: int, rng: np.random.Generator) -> ActionSet:
        axis = min(t, self.n) - 1
        half = 0.25 * self.B * math.sqrt(self.n)
        a = np.zeros(self.n)
        a[axis] = -half
        return Segment(a, -a)


@dataclass
class Segments2D:
    """Planar sets inside the disk of radius 1/2: random segments, or with
    probability ``polygon_fraction`` the vertices of a random ``m``-gon."""

    n: int = 2
    polygon_fraction: float = 0.0
    m: int = 5
    kind = "segments_2d"

    def __post_init__(self):
        if self.n != 2:
            raise ConfigError("segments_2d is planar (n = 2)")

    @property
    def K(self) -> float:
        return 1.0

    def draw(self, t: int, rng: np.random.Generator) -> ActionSet:
        # one block of uniforms per round: a selector, then angles and radii
        u = rng.random(1 + 2 * max(self.m, 2)).tolist()
        if u[0] < self.polygon_fraction:
            m = self.m
            angles = sorted(TWO_PI * v for v in u[1: 1 + m])
            radii = [0.5 * math.sqrt(0.25 + 0.75 * v) for v in u[1 + m: 1 + 2 * m]]
            return VertexSet(np.array([[r * math.cos(a), r * math.sin(a)] for a, r in zip(angles, radii)]))
        # two points uniform in the disk of radius 1/2
        pts = [(0.5 * math.sqrt(r) * math.cos(TWO_PI * a), 0.5 * math.sqrt(r) * math.sin(TWO_PI * a))
               for a, r in ((u[1], u[3]), (u[2], u[4]))]
        return Segment(np.array(pts[0]), np.array(pts[1]))


@dataclass
class AdaptiveSegments:
    """Segments of length ``diameter`` through the origin, chosen after seeing
    the learner's prediction so that (when possible) the prediction and the
    true objective pick opposite endpoints.

    The direction is drawn uniformly from the arc of the plane spanned by the
    prediction and c* on which the two objectives disagree.  When they agree
    in direction (or the prediction is zero) a uniformly random segment is
    played instead.
    """

    n: int
    diameter: float = 1.0
    kind = "adaptive_segments"
    adaptive = True

    @property
    def K(self) -> float:
        return self.diameter

    def draw(self, t: int, rng: np.random.Generator, prediction=None, target=None) -> ActionSet:
        h = 0.5 * self.diameter
        u = self._direction(rng, prediction, target)
        return Segment(h * u, -h * u)

    def _direction(self, rng, chat, cstar) -> Vector:
        if chat is None or cstar is None:
            return _unit(rng, self.n)
        nc = float(np.linalg.norm(chat))
        if nc == 0.0:
            return _unit(rng, self.n)
        e1 = chat / nc
        v = cstar - float(cstar @ e1) * e1
        nv = float(np.linalg.norm(v))
        theta = math.atan2(nv, float(cstar @ e1))
        if nv <= 1e-15 * max(1.0, float(np.linalg.norm(cstar))):
            return _unit(rng, self.n)
        # angles in (pi/2, pi/2 + theta) are positive for c* and negative for the prediction
        phi = 0.5 * math.pi + theta * rng.random()
        return math.cos(phi) * e1 + math.sin(phi) * (v / nv)


@dataclass
class FixedSets:
    """Cycles through an explicit list of action sets."""

    sets: Sequence[ActionSet]
    kind = "fixed"

    def __post_init__(self):
        if not self.sets:
            raise ConfigError("fixed generator needs at least one set")
        if len({s.dim for s in self.sets}) != 1:
            raise ConfigError("fixed sets have inconsistent dimensions")

    @property
    def n(self) -> int:
        return self.sets[0].dim

    @property
    def K(self) -> float:
        return max(s.diameter() for s in self.sets)

    def draw(self, t: int, rng: np.random.Generator) -> ActionSet:
        return self.sets[(t - 1) % len(self.sets)]


Generator = Any  # any of the generator dataclasses above

GENERATORS = {cls.kind: cls for cls in
              (RandomBalls, RandomBoxes, RandomVertexSets, LowerBoundSegments, Segments2D, AdaptiveSegments)}


def generator_params(kind: str) -> dict[str, type]:
    """Tunable parameters (besides ``n``) of a generator kind and their types."""
    if kind not in GENERATORS:
        raise ConfigError(f"unknown generator {kind!r} (one of {', '.join(sorted(GENERATORS))})")
    return {f.name: (int if f.type in ("int", int) else float)
            for f in fields(GENERATORS[kind]) if f.name != "n"}


def make_generator(kind: str, n: int, params: dict[str, float] | None = None) -> Generator:
    allowed = generator_params(kind)
    params = dict(params or {})
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigError(f"generator {kind!r} has no parameter(s) {sorted(unknown)}")
    return GENERATORS[kind](n, **{k: allowed[k](v) for k, v in params.items()})


@dataclass
class InstanceSpec:
    n: int
    T: int
    region: FeasibleRegion
    true_objective: Vector
    generator: Generator
    seed: int = 0
    B_override: float | None = None

    def __post_init__(self):
        self.true_objective = as_vector(self.true_objective, "true_objective", dim=self.n)
        if self.region.dim != self.n or self.generator.n != self.n:
            raise ConfigError("region, generator and n disagree on the dimension")
        if not self.region.contains(self.true_objective):
            raise ConfigError("true objective lies outside the prediction region")
        if self.T < 0:
            raise ConfigError("horizon must be non-negative")

    @property
    def D(self) -> float:
        return self.region.diameter()

    @property
    def K(self) -> float:
        return self.generator.K

    @property
    def B(self) -> float:
        return self.D * self.K if self.B_override is None else self.B_override


def sample_true_objective(region: FeasibleRegion, rng: np.random.Generator) -> Vector:
    """A unit-norm direction scaled to the ball's boundary, or a uniform point of a box."""
    if isinstance(region, BallRegion):
        return region.center + region.radius * _unit(rng, region.dim)
    return region.sample(rng, 1)[0]


def make_instance(generator: Generator, T: int, seed: int, region: FeasibleRegion | None = None,
                  true_objective=None, B: float | None = None) -> InstanceSpec:
    n = generator.n
    rng = rng_streams(seed)["instance"]
    if isinstance(generator, LowerBoundSegments):
        if T < n:
            raise ConfigError(f"lower-bound instance needs T >= n (T={T}, n={n})")
        s = 1.0 / math.sqrt(n)
        region = region or BoxRegion(-s * np.ones(n), s * np.ones(n))
        if true_objective is None:
            # a separate child stream so c* is independent of everything the learner sees
            signs = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 7919])))
            true_objective = s * np.where(signs.random(n) < 0.5, -1.0, 1.0)
        B = generator.B if B is None else B
    region = region or BallRegion(np.zeros(n), 1.0)
    if true_objective is None:
        cs = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 7919])))
        true_objective = sample_true_objective(region, cs)
    return InstanceSpec(n, T, region, true_objective, generator, seed, B)


# ---------------------------------------------------------------------------
# agents


@dataclass(frozen=True)
class AgentPolicy:
    """``optimal``, ``perturbed`` (argmax for c* + sigma * N(0, I)) or
    ``suboptimal_mix`` (with probability rho, an extreme point picked by ``rule``)."""

    kind: str = "optimal"
    sigma: float = 0.0
    rho: float = 0.0
    rule: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("optimal", "perturbed", "suboptimal_mix"):
            raise ConfigError(f"unknown agent kind {self.kind!r}")
        if self.sigma < 0 or not 0 <= self.rho <= 1:
            raise ConfigError("agent needs sigma >= 0 and rho in [0, 1]")
        if self.rule not in ("uniform", "worst"):
            raise ConfigError(f"unknown corruption rule {self.rule!r}")

    def label(self) -> str:
        if self.kind == "perturbed":
            return f"perturbed(sigma={self.sigma:g})"
        if self.kind == "suboptimal_mix":
            return f"suboptimal_mix(rho={self.rho:g},{self.rule})"
        return "optimal"


def agent_act(policy: AgentPolicy, action_set: ActionSet, c_star, rng: np.random.Generator) -> Vector:
    c_star = np.asarray(c_star, dtype=float)
    if policy.kind == "perturbed" and policy.sigma > 0:
        return argmax_linear(action_set, c_star + policy.sigma * rng.standard_normal(c_star.shape[0]))
    if policy.kind == "suboptimal_mix" and rng.random() < policy.rho:
        if policy.rule == "worst":
            return argmax_linear(action_set, -c_star)
        return action_set.extreme_point(rng)
    return argmax_linear(action_set, c_star)


# ---------------------------------------------------------------------------
# traces

TRACE_STATS = ("inst_regret", "inst_tilde", "inst_V", "inst_delta")
RUNNING = ("R", "Rtilde", "V", "Delta")


@dataclass(frozen=True)
class RoundTrace:
    t: int
    prediction: Vector
    learner_action: Vector
    agent_action: Vector
    inst_regret: float
    inst_tilde: float
    inst_V: float
    inst_delta: float


@dataclass
class ExperimentTrace:
    header: dict[str, str]
    chat: np.ndarray
    xhat: np.ndarray
    x: np.ndarray
    inst: dict[str, np.ndarray]
    running: dict[str, np.ndarray]
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.chat.shape[0]

    @property
    def n(self) -> int:
        return self.chat.shape[1]

    @property
    def seed(self) -> int:
        return int(self.header.get("seed", 0))

    def __len__(self) -> int:
        return self.T

    def round(self, t: int) -> RoundTrace:
        i = t - 1
        return RoundTrace(t, self.chat[i], self.xhat[i], self.x[i],
                          *(float(self.inst[k][i]) for k in TRACE_STATS))

    def final(self, name: str) -> float:
        arr = self.running[name]
        return float(arr[-1]) if arr.size else 0.0

    def prefix(self, name: str, T: int) -> float:
        return float(self.running[name][T - 1]) if T > 0 else 0.0


def make_learner(kind: str, spec: InstanceSpec, rng: np.random.Generator,
                 options: dict[str, Any] | None = None) -> Learner:
    opts = dict(options or {})
    if kind == "ons":
        return OnsInverseLearner(spec.region, spec.B, eta=opts.pop("eta", None), W=spec.D)
    if kind == "metagrad":
        return MetaGradInverseLearner(spec.region, spec.B, max(spec.T, 1), grid=opts.pop("grid", None),
                                      W=spec.D)
    if kind == "ogd":
        return OgdLearner(spec.region, spec.D, spec.K, step_scale=opts.pop("step_scale", None))
    if kind == "arc2d":
        return Arc2DLearner(rng, n=spec.n)
    raise ConfigError(f"unknown learner kind {kind!r}")


def run_experiment(spec: InstanceSpec, learner: str | Learner, policy: AgentPolicy | None = None,
                   learner_options: dict[str, Any] | None = None, fingerprint: str = "") -> ExperimentTrace:
    """Play ``spec.T`` rounds of the predict / observe / update protocol."""
    policy = policy or AgentPolicy()
    streams = rng_streams(spec.seed)
    if isinstance(learner, str):
        learner = make_learner(learner, spec, streams["learner"], learner_options)
    T, n = spec.T, spec.n
    c_star = spec.true_objective
    vecs: tuple[list, list, list] = ([], [], [])
    rows: list[tuple[float, ...]] = []  # regret, tilde, V, delta, then their running sums
    is_arc = isinstance(learner, Arc2DLearner)
    adaptive = getattr(spec.generator, "adaptive", False)
    arc_rows: list[tuple[float, float, float]] = []
    sR = sRt = sV = sD = 0.0
    for t in range(1, T + 1):
        try:
            if is_arc:
                before = learner.removed_total
                width = learner.arc.width
                inside = float(learner.arc.contains_vector(c_star, 1e-9))
            c_hat = learner.predict()
            if adaptive:
                action_set = spec.generator.draw(t, streams["instance"], c_hat, c_star)
            else:
                action_set = spec.generator.draw(t, streams["instance"])
            best = argmax_linear(action_set, c_star)
            x_t = best if policy.kind == "optimal" else agent_act(policy, action_set, c_star, streams["agent"])
            x_hat = argmax_linear(action_set, c_hat)
            obs = Observation.from_oracle(action_set, x_t) if x_t is best else Observation(action_set, x_t)
            regret = float(c_star @ (x_t - x_hat))
            tilde = float((c_hat - c_star) @ (x_hat - x_t))
            delta = float(c_star @ best) - float(c_star @ x_t)
            learner.update(obs)
            if is_arc:
                arc_rows.append((width, learner.removed_total - before, inside))
        except ExperimentError:
            raise
        except Exception as exc:  # noqa: BLE001 - reraised with the round index
            raise ExperimentError(t, exc) from exc
        vecs[0].append(c_hat)
        vecs[1].append(x_hat)
        vecs[2].append(x_t)
        V = tilde * tilde
        sR += regret
        sRt += tilde
        sV += V
        sD += delta
        rows.append((regret, tilde, V, delta, sR, sRt, sV, sD))
    chat, xhat, xs = (np.array(v, dtype=float).reshape(T, n) for v in vecs)
    table = np.array(rows, dtype=float).reshape(T, 8)
    inst = {k: table[:, j].copy() for j, k in enumerate(TRACE_STATS)}
    running = {k: table[:, 4 + j].copy() for j, k in enumerate(RUNNING)}
    extras = {}
    if is_arc:
        arcs = np.array(arc_rows, dtype=float).reshape(T, 3)
        extras = {"arc_width": arcs[:, 0].copy(), "arc_removed": arcs[:, 1].copy(),
                  "cstar_in_arc": arcs[:, 2].copy()}
    header = {
        "fingerprint": fingerprint or instance_fingerprint(spec, learner.name, policy),
        "seed": str(spec.seed), "n": str(n), "T": str(T),
        "D": repr(spec.D), "K": repr(spec.K), "B": repr(spec.B),
        "learner": learner.name, "policy": policy.label(), "generator": spec.generator.kind,
    }
    return ExperimentTrace(header, chat, xhat, xs, inst, running, extras)


def instance_fingerprint(spec: InstanceSpec, learner: str, policy: AgentPolicy) -> str:
    text = f"{spec.generator!r}|{spec.T}|{spec.region!r}|{spec.true_objective.tobytes().hex()}|{learner}|{policy!r}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def online_to_batch_average(trace: ExperimentTrace, upto: int | None = None) -> Vector:
    """Coordinate mean of the first ``upto`` (default all) predictions."""
    T = trace.T if upto is None else upto
    if T <= 0 or T > trace.T:
        raise InputError("online-to-batch average needs a non-empty prefix of the trace")
    return trace.chat[:T].mean(axis=0)


# ---------------------------------------------------------------------------
# CSV form: one '#' header line, a column row, then rows at 17 significant digits


def _g(v: float) -> str:
    return format(float(v), ".17g")


def trace_columns(n: int) -> list[str]:
    cols = ["t"]
    for prefix in ("chat", "xhat", "x"):
        cols += [f"{prefix}{j}" for j in range(n)]
    return cols + list(TRACE_STATS) + list(RUNNING)


def trace_to_csv(trace: ExperimentTrace) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in trace.header.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_columns(trace.n))
    for i in range(trace.T):
        row = [str(i + 1)]
        row += [_g(v) for v in trace.chat[i]] + [_g(v) for v in trace.xhat[i]] + [_g(v) for v in trace.x[i]]
        row += [_g(trace.inst[k][i]) for k in TRACE_STATS] + [_g(trace.running[k][i]) for k in RUNNING]
        w.writerow(row)
    return buf.getvalue()


def write_trace(trace: ExperimentTrace, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trace_to_csv(trace))
    return path


def read_trace(path: str | Path) -> ExperimentTrace:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise InputError(f"{path}: missing '#' header line")
    header = dict(part.split("=", 1) for part in lines[0][1:].split() if "=" in part)
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise InputError(f"{path}: missing column row")
    cols = rows[0]
    n = sum(1 for c in cols if c.startswith("chat"))
    if cols != trace_columns(n):
        raise InputError(f"{path}: unexpected columns")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(cols))
    chat, xhat, x = (data[:, 1 + k * n: 1 + (k + 1) * n] for k in range(3))
    base = 1 + 3 * n
    inst = {k: data[:, base + j] for j, k in enumerate(TRACE_STATS)}
    running = {k: data[:, base + 4 + j] for j, k in enumerate(RUNNING)}
    return ExperimentTrace(header, chat, xhat, x, inst, running)
