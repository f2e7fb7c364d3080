"""Iterated best-response play between two controllers.

Each round both players best-respond to the strategy the opponent revealed at
the end of the previous round. A ``signed`` player optimises the true signed
model; a ``blind`` player treats every tie as positive. Numeric play works on an
explicit graph with gradient ascent; mean-field play works on a class template
with budget shares per class.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import steady_state
from .graph import SignedGraph, transform
from .meanfield import (
    ClassTemplate, _blind_arrays, _vote_share_arrays, maximise_over_shares,
)
from .optimize import OptimizerOptions, gradient_ascent, negative_share

log = logging.getLogger(__name__)

KNOWLEDGE = ("signed", "blind")


class GameError(ValueError):
    pass


@dataclass
class GameConfig:
    """``budget_a``/``budget_b`` are totals for numeric play and per-node means for mean-field play."""

    knowledge_a: str = "signed"
    knowledge_b: str = "blind"
    budget_a: float = 1.0
    budget_b: float = 1.0
    graph: SignedGraph | None = None
    template: ClassTemplate | None = None
    tolerance: float = 1e-4
    max_rounds: int = 200
    eta: float = 5.0
    mu: float = 1e-7
    damping: float = 0.0
    scheme: str = "simultaneous"
    max_iters: int = 100_000
    mf_step: float = 1e-3

    def __post_init__(self):
        for k in (self.knowledge_a, self.knowledge_b):
            if k not in KNOWLEDGE:
                raise GameError(f"knowledge must be one of {KNOWLEDGE}, got {k!r}")
        if self.budget_a <= 0 or self.budget_b <= 0:
            raise GameError("budgets must be positive")
        if self.max_rounds < 1:
            raise GameError("max_rounds must be >= 1")
        if (self.graph is None) == (self.template is None):
            raise GameError("give exactly one of graph or template")
        if not 0 <= self.damping < 1:
            raise GameError("damping must lie in [0, 1)")
        if self.scheme not in ("simultaneous", "alternating"):
            raise GameError("scheme must be 'simultaneous' or 'alternating'")

    @property
    def numeric(self) -> bool:
        return self.graph is not None

    def knowledge(self, player: str) -> str:
        return self.knowledge_a if player == "A" else self.knowledge_b

    def budget(self, player: str) -> float:
        return self.budget_a if player == "A" else self.budget_b


@dataclass
class RoundRecord:
    round: int
    eps_a: float
    eps_b: float
    perceived_xa: float
    perceived_xb: float
    true_xa: float
    true_xb: float
    change: float


@dataclass
class GameState:
    strategy_a: np.ndarray
    strategy_b: np.ndarray
    perceived_utilities: tuple[float, float]
    true_utilities: tuple[float, float]
    round: int
    converged: bool
    history: list[RoundRecord] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def eps(self) -> tuple[float, float]:
        last = self.history[-1]
        return last.eps_a, last.eps_b


# ---------------------------------------------------------------------------
# utilities


def _mf_utility(cfg: GameConfig, player: str, a_shares, b_shares):
    """Utility of ``player`` under its own world-view; broadcasts over share batches."""
    t = cfg.template
    a = np.asarray(a_shares) * cfg.budget_a / t.weight
    b = np.asarray(b_shares) * cfg.budget_b / t.weight
    if cfg.knowledge(player) == "signed":
        X, _, _ = _vote_share_arrays(t.ka, t.kb, t.weight, a, b)
        return X if player == "A" else 1.0 - X
    XA, XB = _blind_arrays(t.ka + t.kb, t.weight, a, b)
    return XA if player == "A" else XB


def _mf_true(cfg: GameConfig, a_shares, b_shares):
    t = cfg.template
    X, _, _ = _vote_share_arrays(t.ka, t.kb, t.weight, a_shares * cfg.budget_a / t.weight,
                                 b_shares * cfg.budget_b / t.weight)
    return float(X), 1.0 - float(X)


def _numeric_utility(cfg: GameConfig, player: str, p_a, p_b, views):
    g = views[cfg.knowledge(player)]
    X = steady_state(g, p_a, p_b).vote_share_A
    return X if player == "A" else 1.0 - X


# ---------------------------------------------------------------------------
# best responses


def best_response(player: str, opponent_strategy, cfg: GameConfig, own_strategy=None, seed=0) -> np.ndarray:
    """Best response of ``player`` ('A' or 'B') to the opponent's revealed strategy."""
    if player not in ("A", "B"):
        raise GameError("player must be 'A' or 'B'")
    if cfg.numeric:
        g = cfg.graph
        mode = "signed" if cfg.knowledge(player) == "signed" else "mirrored"
        init = "provided" if own_strategy is not None else "uniform"
        opts = OptimizerOptions(learning_rate=cfg.eta, tolerance=cfg.mu, max_iters=cfg.max_iters, init=init,
                                mode=mode, rng_seed=seed, initial=own_strategy)
        # the opponent plays the passive role; vote-share duality makes this B's problem too
        res = gradient_ascent(g, opponent_strategy, cfg.budget(player), opts)
        return res.p_star
    opp = np.asarray(opponent_strategy, dtype=float)
    if player == "A":
        obj = lambda s: _mf_utility(cfg, "A", s, opp[None, :])
    else:
        obj = lambda s: _mf_utility(cfg, "B", opp[None, :], s)
    shares, _ = maximise_over_shares(obj, cfg.template.size, step=cfg.mf_step)
    return shares


def _record(cfg: GameConfig, rnd, s_a, s_b, change, views) -> RoundRecord:
    if cfg.numeric:
        g = cfg.graph
        pa = _numeric_utility(cfg, "A", s_a, s_b, views)
        pb = _numeric_utility(cfg, "B", s_a, s_b, views)
        ta = steady_state(g, s_a, s_b).vote_share_A
        return RoundRecord(rnd, negative_share(g, s_a), negative_share(g, s_b), pa, pb, ta, 1.0 - ta, change)
    t = cfg.template
    pa = float(_mf_utility(cfg, "A", s_a, s_b))
    pb = float(_mf_utility(cfg, "B", s_a, s_b))
    ta, tb = _mf_true(cfg, s_a, s_b)
    return RoundRecord(rnd, t.eps(s_a), t.eps(s_b), pa, pb, ta, tb, change)


def _initial(cfg: GameConfig, player: str) -> np.ndarray:
    if cfg.numeric:
        return np.full(cfg.graph.n, cfg.budget(player) / cfg.graph.n)
    return cfg.template.uniform_shares()


def play_game(cfg: GameConfig, initial_a=None, initial_b=None, seed: int = 0) -> GameState:
    """Repeated best responses until neither strategy moves by more than ``tolerance``.

    Strategy change is the max-norm difference relative to the player's budget
    (numeric) or of the budget shares (mean-field). Both players start uniform.
    """
    views = {}
    if cfg.numeric:
        views = {"signed": cfg.graph, "blind": transform(cfg.graph, "mirror_positive")}
    s_a = np.asarray(initial_a, dtype=float) if initial_a is not None else _initial(cfg, "A")
    s_b = np.asarray(initial_b, dtype=float) if initial_b is not None else _initial(cfg, "B")
    scale_a = cfg.budget_a if cfg.numeric else 1.0
    scale_b = cfg.budget_b if cfg.numeric else 1.0
    history = [_record(cfg, 0, s_a, s_b, float("nan"), views)]
    converged = False
    rnd = 0
    for rnd in range(1, cfg.max_rounds + 1):
        new_a = best_response("A", s_b, cfg, own_strategy=s_a if cfg.numeric else None, seed=seed + rnd)
        opp_for_b = new_a if cfg.scheme == "alternating" else s_a
        new_b = best_response("B", opp_for_b, cfg, own_strategy=s_b if cfg.numeric else None, seed=seed + rnd)
        if cfg.damping:
            new_a = cfg.damping * s_a + (1 - cfg.damping) * new_a
            new_b = cfg.damping * s_b + (1 - cfg.damping) * new_b
        change = max(np.max(np.abs(new_a - s_a)) / scale_a, np.max(np.abs(new_b - s_b)) / scale_b)
        s_a, s_b = new_a, new_b
        history.append(_record(cfg, rnd, s_a, s_b, float(change), views))
        if change < cfg.tolerance:
            converged = True
            break
    if not converged:
        log.warning("best-response play did not settle within %d rounds", cfg.max_rounds)
    last = history[-1]
    return GameState(
        strategy_a=s_a, strategy_b=s_b,
        perceived_utilities=(last.perceived_xa, last.perceived_xb),
        true_utilities=(last.true_xa, last.true_xb),
        round=rnd, converged=converged, history=history,
        settings={"tolerance": cfg.tolerance, "damping": cfg.damping, "scheme": cfg.scheme,
                  "eta": cfg.eta, "mu": cfg.mu, "max_rounds": cfg.max_rounds},
    )


def knowledge_gain(cfg_signed: GameConfig, cfg_blind: GameConfig, **kw) -> tuple[float, GameState, GameState]:
    """True vote-share of A playing signed minus A playing blind (B blind in both)."""
    s = play_game(cfg_signed, **kw)
    b = play_game(cfg_blind, **kw)
    return s.true_utilities[0] - b.true_utilities[0], s, b
