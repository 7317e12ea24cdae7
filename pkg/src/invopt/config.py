"""Experiment configuration: a sectioned ``key = value`` text file.

Example::

    [instance]
    n = 5
    T = 1000
    generator = random_vertex_sets
    m = 8

    [learner]
    kind = ons

    [agent]
    kind = optimal

    [run]
    seeds = 0..9
    checkpoints = 128, 1024
    output = out

Every key not listed in the schema below is rejected, and everything is
validated before any experiment runs.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from invopt.errors import ConfigError, InputError
from invopt.region import FeasibleRegion, region_from_record, region_to_record
from invopt.sim import AgentPolicy, InstanceSpec, generator_params, make_generator, make_instance

OUTPUT_ENV = "INVOPT_OUTPUT_DIR"
LEARNERS = ("ons", "metagrad", "ogd", "arc2d")
LEARNER_KEYS = {"eta": float, "step_scale": float}
AGENT_KEYS = {"kind": str, "sigma": float, "rho": float, "rule": str}
RUN_KEYS = ("seeds", "checkpoints", "output")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    T: int
    generator: str
    generator_params: dict = field(default_factory=dict)
    region: str | None = None  # region record; None means the unit ball (or the lower-bound box)
    B: float | None = None
    learner: str = "ons"
    learner_params: dict = field(default_factory=dict)
    agent: AgentPolicy = AgentPolicy()
    seeds: tuple[int, ...] = (0,)
    checkpoints: tuple[int, ...] = ()
    output: str = "out"

    def region_obj(self) -> FeasibleRegion | None:
        return region_from_record(self.region) if self.region else None

    def instance(self, seed: int) -> InstanceSpec:
        gen = make_generator(self.generator, self.n, self.generator_params)
        return make_instance(gen, self.T, seed, region=self.region_obj(), B=self.B)

    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output)

    def fingerprint(self) -> str:
        return hashlib.sha256(config_to_text(self).encode()).hexdigest()[:16]


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"3"``, ``"0..9"`` (inclusive) or a comma list ``"1, 4, 7"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split(".."))
            if hi < lo:
                raise ConfigError(f"empty seed range {text!r}")
            return tuple(range(lo, hi + 1))
        seeds = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad seed specification {text!r}") from exc
    if not seeds:
        raise ConfigError("no seeds given")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("duplicate seeds")
    return seeds


def _int(section: str, key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be an integer, got {text!r}") from exc


def _float(section: str, key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} must be a number, got {text!r}") from exc


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="\0none", inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case sensitive (T vs t)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    unknown = set(cp.sections()) - {"instance", "learner", "agent", "run"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")
    if "instance" not in cp:
        raise ConfigError("missing [instance] section")

    inst = dict(cp["instance"])
    for key in ("n", "T", "generator"):
        if key not in inst:
            raise ConfigError(f"[instance] missing required key {key!r}")
    n = _int("instance", "n", inst.pop("n"))
    T = _int("instance", "T", inst.pop("T"))
    if n < 1 or T < 0:
        raise ConfigError("[instance] needs n >= 1 and T >= 0")
    gen = inst.pop("generator").strip()
    region = inst.pop("region", None)
    B = _float("instance", "B", inst.pop("B")) if "B" in inst else None
    allowed = generator_params(gen)
    gparams = {}
    for key, val in inst.items():
        if key not in allowed:
            raise ConfigError(f"[instance] unknown key {key!r} for generator {gen!r}")
        gparams[key] = _int("instance", key, val) if allowed[key] is int else _float("instance", key, val)
    if region is not None:
        try:
            reg = region_from_record(region)
        except InputError as exc:
            raise ConfigError(f"[instance] bad region: {exc}") from exc
        if reg.dim != n:
            raise ConfigError("[instance] region dimension does not match n")
        region = region_to_record(reg)

    lsec = dict(cp["learner"]) if "learner" in cp else {}
    learner = lsec.pop("kind", "ons").strip()
    if learner not in LEARNERS:
        raise ConfigError(f"unknown learner {learner!r} (one of {', '.join(LEARNERS)})")
    lparams = {}
    for key, val in lsec.items():
        if key not in LEARNER_KEYS:
            raise ConfigError(f"[learner] unknown key {key!r}")
        lparams[key] = _float("learner", key, val)

    asec = dict(cp["agent"]) if "agent" in cp else {}
    for key in asec:
        if key not in AGENT_KEYS:
            raise ConfigError(f"[agent] unknown key {key!r}")
    agent = AgentPolicy(
        kind=asec.get("kind", "optimal").strip(),
        sigma=_float("agent", "sigma", asec.get("sigma", "0")),
        rho=_float("agent", "rho", asec.get("rho", "0")),
        rule=asec.get("rule", "uniform").strip(),
    )

    rsec = dict(cp["run"]) if "run" in cp else {}
    for key in rsec:
        if key not in RUN_KEYS:
            raise ConfigError(f"[run] unknown key {key!r}")
    seeds = parse_seeds(rsec.get("seeds", "0"))
    cps = tuple(_int("run", "checkpoints", c) for c in rsec.get("checkpoints", "").split(",") if c.strip())
    if any(c < 1 or c > T for c in cps):
        raise ConfigError("[run] checkpoints must lie in 1..T")
    output = rsec.get("output", "out").strip()

    cfg = ExperimentConfig(n, T, gen, gparams, region, B, learner, lparams, agent, seeds, cps, output)
    # build one instance so generator/region/learner mismatches surface before any run
    try:
        cfg.instance(seeds[0])
    except InputError as exc:
        raise ConfigError(str(exc)) from exc
    if learner == "arc2d" and n != 2:
        raise ConfigError("arc2d learner needs n = 2")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _seeds_text(seeds: tuple[int, ...]) -> str:
    if len(seeds) > 1 and seeds == tuple(range(seeds[0], seeds[-1] + 1)):
        return f"{seeds[0]}..{seeds[-1]}"
    return ", ".join(str(s) for s in seeds)


def config_to_text(cfg: ExperimentConfig) -> str:
    lines = ["[instance]", f"n = {cfg.n}", f"T = {cfg.T}", f"generator = {cfg.generator}"]
    lines += [f"{k} = {v!r}" for k, v in sorted(cfg.generator_params.items())]
    if cfg.region:
        lines.append(f"region = {cfg.region}")
    if cfg.B is not None:
        lines.append(f"B = {cfg.B!r}")
    lines += ["", "[learner]", f"kind = {cfg.learner}"]
    lines += [f"{k} = {v!r}" for k, v in sorted(cfg.learner_params.items())]
    a = cfg.agent
    lines += ["", "[agent]", f"kind = {a.kind}", f"sigma = {a.sigma!r}", f"rho = {a.rho!r}", f"rule = {a.rule}"]
    lines += ["", "[run]", f"seeds = {_seeds_text(cfg.seeds)}"]
    if cfg.checkpoints:
        lines.append("checkpoints = " + ", ".join(str(c) for c in cfg.checkpoints))
    lines.append(f"output = {cfg.output}")
    return "\n".join(lines) + "\n"
