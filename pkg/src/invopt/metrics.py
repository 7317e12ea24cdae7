"""Post-processing of regret traces: ratios at checkpoints, scaling fits,
Monte Carlo means and the summary table."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from invopt.errors import InputError, NumericError
from invopt.sim import RUNNING, TRACE_STATS, ExperimentTrace

MIN_TRIALS = 30
MIN_CHECKPOINTS = 5
RESIDUAL_FLAG = 0.05  # relative residual above which a fit is flagged as a poor model

SUMMARY_COLUMNS = ["n", "T", "learner", "policy", "seed", "R", "Rtilde", "V", "Delta", "ratio_log", "ratio_sqrt"]


def power_checkpoints(lo: int, hi: int) -> list[int]:
    """``[2**lo, ..., 2**hi]``."""
    return [2**k for k in range(lo, hi + 1)]


def log_scale(B: float, n: int, D: float, K: float, T: int) -> float:
    """``B n ln(DKT/(Bn))``, the order of the regret bound for optimal feedback."""
    return B * n * math.log(D * K * T / (B * n))


def trace_constants(trace: ExperimentTrace) -> tuple[float, float, float]:
    h = trace.header
    return float(h["B"]), float(h["D"]), float(h["K"])


def ratio_log(trace: ExperimentTrace, T: int, statistic: str = "Rtilde") -> float:
    B, D, K = trace_constants(trace)
    return trace.prefix(statistic, T) / log_scale(B, trace.n, D, K, T)


def ratio_sqrt(trace: ExperimentTrace, T: int, statistic: str = "Rtilde") -> float:
    return trace.prefix(statistic, T) / math.sqrt(T)


def ratio_sequence(trace: ExperimentTrace, checkpoints: Iterable[int], kind: str = "log",
                   statistic: str = "Rtilde") -> np.ndarray:
    fn = {"log": ratio_log, "sqrt": ratio_sqrt}.get(kind)
    if fn is None:
        raise InputError(f"unknown ratio kind {kind!r} (log or sqrt)")
    return np.array([fn(trace, T, statistic) for T in checkpoints])


_INST = dict(zip(RUNNING, TRACE_STATS))


def _compensated_prefix(vals: np.ndarray) -> np.ndarray:
    # Neumaier summation, independent of the plain running sums stored in the trace
    out = np.empty(len(vals))
    s = c = 0.0
    for i, v in enumerate(vals.tolist()):
        t = s + v
        c += (s - t) + v if abs(s) >= abs(v) else (v - t) + s
        s = t
        out[i] = s + c
    return out


def recompute_running(trace: ExperimentTrace) -> dict[str, np.ndarray]:
    return {run: _compensated_prefix(trace.inst[inst]) for run, inst in _INST.items()}


def running_sums_consistent(trace: ExperimentTrace, rtol: float = 1e-9) -> bool:
    """Stored running sums agree with recomputed prefix sums, relative to the
    prefix sums of absolute values."""
    for name, want in recompute_running(trace).items():
        scale = np.cumsum(np.abs(trace.inst[_INST[name]]))
        if np.any(np.abs(trace.running[name] - want) > rtol * scale):
            return False
    return True


# ---------------------------------------------------------------------------
# scaling fits


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of regret values at checkpoints to one growth model.

    ``log``: ``c n ln(a T)``; constants ``(c, a)``.
    ``sqrt``: ``c sqrt(T)``; constants ``(c,)``.
    ``mixed``: ``c0 + c1 sqrt(Delta n ln T)``; constants ``(c0, c1)``.
    """

    model: str
    constants: tuple[float, ...]
    residual_norm: float
    relative_residual: float
    checkpoints: tuple[int, ...]
    ratios: tuple[float, ...] = field(default=())

    @property
    def poor_fit(self) -> bool:
        return self.relative_residual > RESIDUAL_FLAG

    def predict(self, T, n: int = 1, delta=None) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        if self.model == "log":
            c, a = self.constants
            return c * n * np.log(a * T)
        if self.model == "sqrt":
            return self.constants[0] * np.sqrt(T)
        c0, c1 = self.constants
        return c0 + c1 * np.sqrt(np.asarray(delta, dtype=float) * n * np.log(T))


def _lstsq(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise NumericError("degenerate design matrix: checkpoints do not identify the model")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef, float(np.linalg.norm(X @ coef - y))


def fit_scaling_values(checkpoints: Sequence[int], values: Sequence[float], model: str, n: int = 1,
                       deltas: Sequence[float] | None = None) -> ScalingFit:
    T = np.asarray(checkpoints, dtype=float)
    y = np.asarray(values, dtype=float)
    if T.shape != y.shape or T.ndim != 1:
        raise InputError("checkpoints and values must be 1-d and of equal length")
    if len(T) < MIN_CHECKPOINTS:
        raise InputError(f"need at least {MIN_CHECKPOINTS} checkpoints, got {len(T)}")
    if np.any(T < 2):
        raise InputError("checkpoints must be at least 2")
    lnT = np.log(T)
    ratios: tuple[float, ...] = ()
    if model == "log":
        coef, res = _lstsq(np.column_stack([np.ones_like(lnT), lnT]), y)
        p, q = coef
        if q == 0:
            raise NumericError("log model has zero slope; scale constant undefined")
        constants = (q / n, math.exp(p / q))
        ratios = tuple(y / (n * lnT))
    elif model == "sqrt":
        coef, res = _lstsq(np.sqrt(T)[:, None], y)
        constants = (float(coef[0]),)
    elif model == "mixed":
        if deltas is None:
            raise InputError("mixed model needs the cumulative suboptimality at each checkpoint")
        d = np.asarray(deltas, dtype=float)
        if d.shape != T.shape or np.any(d < 0):
            raise InputError("deltas must be non-negative and match the checkpoints")
        coef, res = _lstsq(np.column_stack([np.ones_like(T), np.sqrt(d * n * lnT)]), y)
        constants = tuple(float(v) for v in coef)
    else:
        raise InputError(f"unknown model {model!r} (log, sqrt or mixed)")
    scale = float(np.linalg.norm(y))
    rel = res / scale if scale > 0 else (0.0 if res == 0 else math.inf)
    return ScalingFit(model, tuple(float(c) for c in constants), res, rel,
                      tuple(int(t) for t in checkpoints), ratios)


def fit_scaling(traces: ExperimentTrace | Sequence[ExperimentTrace], model: str,
                checkpoints: Sequence[int] | None = None, statistic: str = "Rtilde") -> ScalingFit:
    """Fit the mean (over traces) of a running statistic at checkpoints."""
    if isinstance(traces, ExperimentTrace):
        traces = [traces]
    if not traces:
        raise InputError("no traces to fit")
    T = min(tr.T for tr in traces)
    if checkpoints is None:
        checkpoints = [2**k for k in range(1, int(math.log2(T)) + 1) if 2**k <= T] if T >= 2 else []
    if any(c > T for c in checkpoints):
        raise InputError("checkpoint beyond the shortest trace")
    y = [float(np.mean([tr.prefix(statistic, c) for tr in traces])) for c in checkpoints]
    deltas = [float(np.mean([tr.prefix("Delta", c) for tr in traces])) for c in checkpoints]
    return fit_scaling_values(checkpoints, y, model, n=traces[0].n,
                              deltas=deltas if model == "mixed" else None)


# ---------------------------------------------------------------------------
# Monte Carlo


def monte_carlo_mean(items: Sequence, statistic: Callable | None = None) -> tuple[float, float]:
    """Sample mean and standard error of ``statistic(item)`` over the trials."""
    if len(items) < MIN_TRIALS:
        raise InputError(f"need at least {MIN_TRIALS} trials, got {len(items)}")
    vals = np.array([float(statistic(x)) if statistic else float(x) for x in items])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def first_rounds_regret(trace: ExperimentTrace, rounds: int | None = None) -> float:
    """Cumulative regret over the first ``rounds`` (default n) rounds."""
    k = trace.n if rounds is None else rounds
    return trace.prefix("R", k)


def bound_envelope(tilde: Sequence[float], delta: Sequence[float], scale: Sequence[float]) -> tuple[float, float]:
    """Non-negative ``(c1, c2)`` such that every point satisfies
    ``tilde <= c1 * scale + c2 * sqrt(delta * scale)``, choosing among such
    envelopes the one with the smallest summed bound over the points (an LP)."""
    tilde, delta, scale = (np.asarray(v, dtype=float) for v in (tilde, delta, scale))
    if not (tilde.shape == delta.shape == scale.shape) or tilde.ndim != 1 or tilde.size == 0:
        raise InputError("envelope fit needs equal-length non-empty 1-d inputs")
    if np.any(delta < 0) or np.any(scale <= 0):
        raise InputError("envelope fit needs delta >= 0 and scale > 0")
    X = np.column_stack([scale, np.sqrt(delta * scale)])
    res = linprog(X.sum(axis=0), A_ub=-X, b_ub=-tilde, bounds=[(0, None), (0, None)], method="highs")
    if res.status != 0:
        raise NumericError(f"envelope LP failed: {res.message}")
    return float(res.x[0]), float(res.x[1])


# ---------------------------------------------------------------------------
# summary table


def summary_row(trace: ExperimentTrace) -> dict[str, object]:
    T = trace.T
    return {
        "n": trace.n, "T": T, "learner": trace.header.get("learner", ""),
        "policy": trace.header.get("policy", ""), "seed": trace.seed,
        "R": trace.final("R"), "Rtilde": trace.final("Rtilde"), "V": trace.final("V"),
        "Delta": trace.final("Delta"),
        "ratio_log": ratio_log(trace, T) if T > 0 else math.nan,
        "ratio_sqrt": ratio_sqrt(trace, T) if T > 0 else math.nan,
    }


def _cell(v) -> str:
    return format(v, ".17g") if isinstance(v, float) else str(v)


def summary_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([_cell(row[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def write_summary(rows: Iterable[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary_to_csv(rows))
    return path


def read_summary(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_COLUMNS:
            raise InputError(f"{path}: unexpected summary columns {reader.fieldnames}")
        out = []
        for r in reader:
            row: dict[str, object] = dict(r)
            for k in ("n", "T", "seed"):
                row[k] = int(r[k])
            for k in ("R", "Rtilde", "V", "Delta", "ratio_log", "ratio_sqrt"):
                row[k] = float(r[k])
            out.append(row)
        return out
