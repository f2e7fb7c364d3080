"""Projected gradient ascent on the controller's budget simplex.

Three world-views are supported: ``signed`` optimises on the true graph,
``mirrored`` treats every tie as positive and ``dropped`` ignores negative ties.
Whatever the world-view, the returned allocation is scored on the true graph.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import SteadyStateSolution, SteadyStateSystem, as_allocation, steady_state
from .graph import SignedGraph, laplacian, transform

log = logging.getLogger(__name__)

MODES = {"signed": "identity", "mirrored": "mirror_positive", "dropped": "drop_negative"}
MODE_ALIASES = {"ga": "signed", "ga+": "mirrored", "gaplus": "mirrored", "gaphi": "dropped", "ga-phi": "dropped"}
INITS = ("uniform_random_simplex", "uniform", "provided")
MAX_HALVINGS = 30


class OptimizeError(ValueError):
    pass


def normalise_mode(mode: str) -> str:
    mode = mode.lower()
    mode = MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise OptimizeError(f"unknown optimiser mode {mode!r}")
    return mode


@dataclass(frozen=True)
class OptimizerOptions:
    """``learning_rate=None`` means ``eta = N``."""

    learning_rate: float | None = None
    tolerance: float = 1e-7
    max_iters: int = 100_000
    init: str = "uniform_random_simplex"
    mode: str = "signed"
    rng_seed: int | None = 0
    starts: int = 1
    initial: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", normalise_mode(self.mode))
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise OptimizeError("learning rate must be positive")
        if self.tolerance <= 0:
            raise OptimizeError("tolerance must be positive")
        if self.init not in INITS:
            raise OptimizeError(f"unknown init {self.init!r}")
        if self.init == "provided" and self.initial is None:
            raise OptimizeError("init='provided' needs an initial allocation")
        if self.starts < 1:
            raise OptimizeError("starts must be >= 1")


@dataclass
class OptimizationResult:
    p_star: np.ndarray
    objective_trace: list[float]
    true_vote_share: float
    iterations: int
    converged: bool
    mode: str = "signed"
    perceived_vote_share: float = float("nan")
    true_trace: list[float] | None = None


def gradient(g: SignedGraph, p_A, p_B, x: SteadyStateSolution | None = None,
             system: SteadyStateSystem | None = None) -> np.ndarray:
    """``dX_A/dp_A,i = (1/N) [1^T M^-1]_i (1 - x_i)`` via one adjoint solve."""
    system = SteadyStateSystem(g, p_A, p_B) if system is None else system
    if x is None:
        x = system.solve()
    y = system.adjoint_ones()
    return y * (1.0 - x.x)


def project_simplex(v, B: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = B}`` (sort-and-threshold)."""
    if B <= 0:
        raise OptimizeError("budget must be positive")
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - B
    idx = np.arange(1, len(v) + 1)
    rho = np.count_nonzero(u - css / idx > 0)
    theta = css[rho - 1] / rho
    p = np.maximum(v - theta, 0.0)
    # fold residual rounding into the support so the sum is exact to ~ulp
    s = p.sum()
    if s != B:
        support = p > 0
        p[support] += (B - s) / np.count_nonzero(support)
        p = np.maximum(p, 0.0)
    return p


class _Evaluator:
    def __init__(self, g: SignedGraph, p_B):
        self.g = g
        self.p_B = p_B
        self.lap = laplacian(g)

    def __call__(self, p_A, x0=None, y0=None):
        system = SteadyStateSystem(self.g, p_A, self.p_B, lap=self.lap, x0=x0, y0=y0)
        sol = system.solve()
        return sol, system


def _initial(n, B, opts: OptimizerOptions, rng) -> np.ndarray:
    if opts.init == "uniform":
        return np.full(n, B / n)
    if opts.init == "provided":
        p0 = as_allocation(opts.initial, n, "initial allocation")
        return project_simplex(p0, B)
    return rng.dirichlet(np.ones(n)) * B


def _ascend(view: SignedGraph, p_B, B_A, p0, eta, opts: OptimizerOptions, true_eval=None):
    evaluate = _Evaluator(view, p_B)
    p = p0
    sol, system = evaluate(p)
    trace = [sol.vote_share_A]
    true_trace = [true_eval(p)] if true_eval else None
    converged = False
    it = 0
    y = None
    for it in range(1, opts.max_iters + 1):
        y = system.adjoint_ones()
        grad = y * (1.0 - sol.x)
        step = eta
        for _ in range(MAX_HALVINGS + 1):
            cand = project_simplex(p + step * grad, B_A)
            cand_sol, cand_system = evaluate(cand, x0=sol.x, y0=y)
            if cand_sol.vote_share_A >= sol.vote_share_A - 1e-12:
                break
            step *= 0.5
        else:
            # no ascent direction at any step size: we are at a (numerical) optimum
            converged = True
            it -= 1
            break
        delta = cand_sol.vote_share_A - sol.vote_share_A
        p, sol, system = cand, cand_sol, cand_system
        trace.append(sol.vote_share_A)
        if true_eval:
            true_trace.append(true_eval(p))
        if abs(delta) < opts.tolerance:
            converged = True
            break
    return p, sol, trace, true_trace, it, converged


def gradient_ascent(g: SignedGraph, p_B, B_A: float, opts: OptimizerOptions | None = None,
                    record_true_trace: bool = False) -> OptimizationResult:
    """Maximise A's vote-share against the fixed allocation ``p_B``.

    Iterates ``p <- proj(p + eta * grad X)`` on the world-view graph until the
    objective changes by less than ``tolerance``. A step that would lower the
    objective is halved (up to 30 times). With ``starts > 1`` the best start by
    perceived objective is kept.
    """
    opts = opts or OptimizerOptions()
    if B_A <= 0:
        raise OptimizeError("budget B_A must be positive")
    p_B = as_allocation(p_B, g.n, "p_B")
    view = transform(g, MODES[opts.mode])
    eta = float(g.n) if opts.learning_rate is None else float(opts.learning_rate)
    rng = np.random.default_rng(opts.rng_seed)
    true_eval = None
    if record_true_trace:
        true_eval = (lambda p: steady_state(g, p, p_B).vote_share_A)

    best = None
    for _ in range(opts.starts):
        p0 = _initial(g.n, B_A, opts, rng)
        run = _ascend(view, p_B, B_A, p0, eta, opts, true_eval)
        if best is None or run[1].vote_share_A > best[1].vote_share_A:
            best = run
    p, sol, trace, true_trace, it, converged = best
    if not converged:
        log.warning("gradient ascent hit max_iters=%d without converging", opts.max_iters)
    true_x = sol.vote_share_A if opts.mode == "signed" else steady_state(g, p, p_B).vote_share_A
    return OptimizationResult(
        p_star=p, objective_trace=trace, true_vote_share=true_x, iterations=it, converged=converged,
        mode=opts.mode, perceived_vote_share=sol.vote_share_A, true_trace=true_trace,
    )


# ---------------------------------------------------------------------------
# adversary allocations

ADVERSARIES = ("uniform", "avoid_negative", "target_negative", "eps_split", "degree_proportional")


def _spread(mask: np.ndarray, budget: float) -> np.ndarray:
    count = np.count_nonzero(mask)
    out = np.zeros(len(mask))
    if budget == 0:
        return out
    if count == 0:
        raise OptimizeError("empty target class")
    out[mask] = budget / count
    return out


def adversary_strategy(g: SignedGraph, kind: str, B_B: float, eps: float | None = None) -> np.ndarray:
    """Passive allocation for controller B; ``kind`` may be ``eps_split:0.25``."""
    if ":" in kind:
        kind, _, arg = kind.partition(":")
        eps = float(arg)
    kind = kind.lower()
    neg = np.asarray(g.has_negative)
    if kind == "uniform":
        return np.full(g.n, B_B / g.n)
    if kind == "avoid_negative":
        return _spread(~neg, B_B)
    if kind == "target_negative":
        return _spread(neg, B_B)
    if kind == "eps_split":
        if eps is None or not 0 <= eps <= 1:
            raise OptimizeError("eps_split needs 0 <= eps <= 1")
        return _spread(neg, eps * B_B) + _spread(~neg, (1 - eps) * B_B)
    if kind == "degree_proportional":
        k = np.asarray(g.pos_in_strength, dtype=float)
        if k.sum() <= 0:
            raise OptimizeError("empty target class")
        return B_B * k / k.sum()
    raise OptimizeError(f"unknown adversary strategy {kind!r}")


def negative_share(g: SignedGraph, p) -> float:
    """Fraction of an allocation placed on nodes with negative ties (the ``eps`` of a strategy)."""
    p = np.asarray(p, dtype=float)
    total = p.sum()
    return float(p[np.asarray(g.has_negative)].sum() / total) if total > 0 else 0.0


@dataclass
class GainResult:
    gain: float
    x_signed: float
    x_mirrored: float
    gains: list[float]
    results: list[tuple[OptimizationResult, OptimizationResult]] = field(repr=False, default_factory=list)


def relative_gain(g: SignedGraph, p_B, B_A: float, opts: OptimizerOptions | None = None,
                  repeats: int = 5, baseline: str = "mirrored") -> GainResult:
    """``X_signed / X_baseline - 1`` on true vote-shares, averaged over random starts.

    Repeat ``r`` runs both optimisers from the same seed so the two world-views
    start from the same random allocation.
    """
    opts = opts or OptimizerOptions()
    base_seed = opts.rng_seed
    ss = np.random.SeedSequence(base_seed)
    gains, pairs = [], []
    for child in ss.spawn(repeats):
        seed = int(child.generate_state(1)[0])
        a = gradient_ascent(g, p_B, B_A, replace(opts, mode="signed", rng_seed=seed))
        b = gradient_ascent(g, p_B, B_A, replace(opts, mode=baseline, rng_seed=seed))
        gains.append(a.true_vote_share / b.true_vote_share - 1.0)
        pairs.append((a, b))
    return GainResult(
        gain=float(np.mean(gains)),
        x_signed=float(np.mean([a.true_vote_share for a, _ in pairs])),
        x_mirrored=float(np.mean([b.true_vote_share for _, b in pairs])),
        gains=gains,
        results=pairs,
    )
