"""Derivative-free simplex minimization for noisy scalar objectives.

Implements Nelder-Mead with the standard move coefficients (reflection 1,
expansion 2, contraction 0.5, shrink 0.5), a convergence test that must
hold for two consecutive steps to avoid firing on measurement noise, and
restart-based exploration: after each convergence the simplex is rebuilt
around the incumbent with doubled edge lengths and a re-randomized
orientation, so the search can escape a local minimum found early.

Because every objective value may be a noisy measurement, the incumbent
can optionally be re-measured at each restart; ties within f_tol are
broken toward the point measured first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import CrabloopError, EvaluationFailedError

ALPHA = 1.0   # reflection
GAMMA = 2.0   # expansion
RHO = 0.5     # contraction (outside and inside)
SIGMA = 0.5   # shrink


class DegenerateSimplexError(CrabloopError):
    pass


class BudgetError(CrabloopError):
    pass


class _BudgetExhausted(Exception):
    """Internal: unwinds the simplex loop when max_evals is hit."""


@dataclass(frozen=True)
class Bounds:
    """Per-coordinate closed intervals for penalty-based feasibility."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "Bounds":
        lo = np.asarray([p[0] for p in pairs], dtype=float)
        hi = np.asarray([p[1] for p in pairs], dtype=float)
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        return cls(lo, hi)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def distance_sq(self, x) -> float:
        """Squared Euclidean distance from x to the feasible box."""
        x = np.asarray(x, dtype=float)
        below = np.maximum(self.lower - x, 0.0)
        above = np.maximum(x - self.upper, 0.0)
        return float(np.sum(below**2) + np.sum(above**2))


@dataclass
class OptimizerOptions:
    max_evals: int = 45
    f_tol: float = 1e-3
    x_tol: float = 1e-3
    restarts: int = 0
    init_scale: Union[float, Sequence[float]] = 0.1
    reeval_best: bool = True
    randomize_init: bool = False
    rng_seed: int = 0


class Termination(str, Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget_exhausted"
    RESTARTS_EXHAUSTED = "restarts_exhausted"


@dataclass(frozen=True)
class EvalRecord:
    """One objective invocation, in evaluation order."""

    index: int
    params: tuple[float, ...]
    value: float


@dataclass
class OptimumReport:
    best_params: np.ndarray
    best_fom: float
    history: list[EvalRecord]
    termination: Termination
    eval_count: int
    restart_count: int


@dataclass
class SimplexState:
    """d+1 vertices with their objective values; NaN marks unevaluated."""

    vertices: np.ndarray
    vertex_foms: np.ndarray
    eval_count: int = 0
    restart_count: int = 0
    last_move: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def spread(self) -> float:
        """Worst-minus-best objective value (0 when all equal)."""
        worst = float(np.max(self.vertex_foms))
        best = float(np.min(self.vertex_foms))
        if worst == best:
            return 0.0
        return worst - best

    def diameter(self) -> float:
        """Largest pairwise vertex distance."""
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((diffs**2).sum(axis=-1)).max())


def init_simplex(
    x0,
    init_scale,
    rng: Union[int, np.random.Generator, None] = None,
    randomize: bool = False,
) -> SimplexState:
    """Build the starting simplex around x0.

    Vertex 0 is x0 exactly; vertex i offsets x0 along axis i by the
    corresponding scale.  In randomized mode each offset picks a random
    sign and every non-base vertex is jittered by uniform noise within
    half a scale per coordinate.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    if d < 1:
        raise DegenerateSimplexError("need at least one parameter")
    scale = np.broadcast_to(np.asarray(init_scale, dtype=float), (d,)).copy()
    if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
        raise DegenerateSimplexError(f"scales must be positive, got {scale}")
    vertices = np.tile(x0, (d + 1, 1))
    if randomize:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        signs = gen.integers(0, 2, size=d) * 2 - 1
        jitter = gen.uniform(-0.5, 0.5, size=(d, d)) * scale
        for i in range(d):
            vertices[i + 1, i] += signs[i] * scale[i]
            vertices[i + 1] += jitter[i]
    else:
        for i in range(d):
            vertices[i + 1, i] += scale[i]
    foms = np.full(d + 1, np.nan)
    return SimplexState(vertices=vertices, vertex_foms=foms)


def _safe_call(objective: Callable, x: np.ndarray) -> float:
    """Map evaluation failures and NaN to +inf so the move logic can rank."""
    try:
        value = float(objective(x))
    except EvaluationFailedError:
        return math.inf
    return math.inf if math.isnan(value) else value


def step(state: SimplexState, objective: Callable) -> SimplexState:
    """Evaluate any pending vertices, then apply one Nelder-Mead move."""
    foms = state.vertex_foms
    for i in range(len(foms)):
        if math.isnan(foms[i]):
            foms[i] = _safe_call(objective, state.vertices[i])
            state.eval_count += 1

    order = np.argsort(foms, kind="stable")
    best, second_worst, worst = order[0], order[-2], order[-1]
    centroid = state.vertices[order[:-1]].mean(axis=0)

    def evaluate(x: np.ndarray) -> float:
        state.eval_count += 1
        return _safe_call(objective, x)

    reflected = centroid + ALPHA * (centroid - state.vertices[worst])
    f_reflected = evaluate(reflected)

    if f_reflected < foms[best]:
        expanded = centroid + GAMMA * (reflected - centroid)
        f_expanded = evaluate(expanded)
        if f_expanded < f_reflected:
            state.vertices[worst], foms[worst] = expanded, f_expanded
            state.last_move = "expand"
        else:
            state.vertices[worst], foms[worst] = reflected, f_reflected
            state.last_move = "reflect"
        return state

    if f_reflected < foms[second_worst]:
        state.vertices[worst], foms[worst] = reflected, f_reflected
        state.last_move = "reflect"
        return state

    if f_reflected < foms[worst]:
        contracted = centroid + RHO * (reflected - centroid)
        f_contracted = evaluate(contracted)
        if f_contracted <= f_reflected:
            state.vertices[worst], foms[worst] = contracted, f_contracted
            state.last_move = "contract-outside"
            return state
    else:
        contracted = centroid + RHO * (state.vertices[worst] - centroid)
        f_contracted = evaluate(contracted)
        if f_contracted < foms[worst]:
            state.vertices[worst], foms[worst] = contracted, f_contracted
            state.last_move = "contract-inside"
            return state

    for i in order[1:]:
        state.vertices[i] = state.vertices[best] + SIGMA * (
            state.vertices[i] - state.vertices[best]
        )
        foms[i] = evaluate(state.vertices[i])
    state.last_move = "shrink"
    return state


def penalty_wrap(
    objective: Callable, bounds: Bounds, penalty_base: float = 10.0
) -> Callable:
    """Guard an objective with a feasibility box.

    Out-of-box points return penalty_base plus the squared distance to the
    box without invoking the objective; evaluation failures inside the box
    return penalty_base.
    """

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return penalty_base
        dist_sq = bounds.distance_sq(x)
        if dist_sq > 0.0:
            return penalty_base + dist_sq
        try:
            return float(objective(x))
        except EvaluationFailedError:
            return penalty_base

    return wrapped


def minimize(
    objective: Callable,
    x0,
    options: Optional[OptimizerOptions] = None,
    on_restart: Optional[Callable[[int], None]] = None,
) -> OptimumReport:
    """Run simplex minimization with restart exploration.

    Each cycle runs Nelder-Mead until the value spread and simplex
    diameter stay below tolerance for two consecutive steps; then the
    simplex is rebuilt around the incumbent with doubled scales until the
    restart budget is spent.  on_restart, when given, is called with the
    restart index before any evaluation of that segment.
    """
    opts = options or OptimizerOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    if opts.max_evals < d + 2:
        raise BudgetError(f"max_evals={opts.max_evals} cannot seed a {d}-simplex")
    scale = np.broadcast_to(np.asarray(opts.init_scale, dtype=float), (d,)).copy()
    rng = np.random.default_rng(opts.rng_seed)

    history: list[EvalRecord] = []
    # latest measurement and first-eval index per distinct parameter vector
    latest: dict[bytes, list] = {}
    count = 0

    def tracked(x):
        nonlocal count
        if count >= opts.max_evals:
            raise _BudgetExhausted
        x = np.asarray(x, dtype=float)
        try:
            value = float(objective(x))
        except EvaluationFailedError:
            value = math.inf
        if math.isnan(value):
            value = math.inf
        history.append(EvalRecord(count, tuple(x.tolist()), value))
        key = x.tobytes()
        if key in latest:
            latest[key][1] = value
        else:
            latest[key] = [count, value]
        count += 1
        return value

    def incumbent() -> tuple[np.ndarray, float, int]:
        entries = [
            (value, first, key) for key, (first, value) in latest.items()
        ]
        vmin = min(value for value, _, _ in entries)
        tied = [e for e in entries if e[0] <= vmin + opts.f_tol]
        tied.sort(key=lambda e: e[1])
        value, first, key = tied[0]
        return np.frombuffer(key, dtype=float).copy(), value, first

    def run_cycle(center, cycle_scale, randomize, seed_fom=None):
        state = init_simplex(center, cycle_scale, rng=rng, randomize=randomize)
        if seed_fom is not None:
            state.vertex_foms[0] = seed_fom
        consecutive = 0
        while consecutive < 2:
            step(state, tracked)
            if state.spread() < opts.f_tol and state.diameter() < opts.x_tol:
                consecutive += 1
            else:
                consecutive = 0

    termination = None
    restart_index = 0
    try:
        run_cycle(x0, scale, opts.randomize_init)
        while restart_index < opts.restarts:
            if opts.max_evals - count < d + 2:
                termination = Termination.BUDGET_EXHAUSTED
                break
            restart_index += 1
            if on_restart is not None:
                on_restart(restart_index)
            best_x, best_f, _ = incumbent()
            if opts.reeval_best:
                best_f = tracked(best_x)
            scale = scale * 2.0
            run_cycle(best_x, scale, randomize=True, seed_fom=best_f)
        if termination is None:
            if opts.restarts == 0:
                termination = Termination.CONVERGED
            else:
                termination = Termination.RESTARTS_EXHAUSTED
    except _BudgetExhausted:
        termination = Termination.BUDGET_EXHAUSTED

    best_x, best_f, _ = incumbent()
    return OptimumReport(
        best_params=best_x,
        best_fom=best_f,
        history=history,
        termination=termination,
        eval_count=count,
        restart_count=restart_index,
    )
