import numpy as np
import pytest

from signedvoter.game import GameConfig, GameError, best_response, play_game
from signedvoter.graph import transform
from signedvoter.meanfield import template
from signedvoter.netgen import make_topology
from signedvoter.optimize import OptimizerOptions, gradient_ascent, negative_share


@pytest.fixture(scope="module")
def small_cp():
    return make_topology("cp-reg-high", n=80, p=0.5, seed=5)


def test_config_validation(small_cp):
    with pytest.raises(GameError):
        GameConfig(graph=small_cp, budget_a=0.0)
    with pytest.raises(GameError):
        GameConfig(graph=small_cp, max_rounds=0)
    with pytest.raises(GameError):
        GameConfig()
    with pytest.raises(GameError):
        GameConfig(knowledge_a="psychic", graph=small_cp)


def test_single_response_is_optimizer_output(small_cp):
    g = small_cp
    cfg = GameConfig("signed", "blind", 0.5 * g.n, g.n, graph=g)
    opp = np.full(g.n, 1.0)
    own = np.full(g.n, 0.5)
    br = best_response("A", opp, cfg, own_strategy=own)
    ref = gradient_ascent(g, opp, 0.5 * g.n, OptimizerOptions(learning_rate=5.0, init="provided", initial=own))
    assert np.array_equal(br, ref.p_star)


def test_blind_response_ignores_signs(small_cp):
    g = small_cp
    mirrored = transform(g, "mirror_positive")
    opp = np.linspace(0.5, 1.5, g.n)
    a = best_response("B", opp, GameConfig("signed", "blind", g.n, g.n, graph=g), own_strategy=np.ones(g.n))
    b = best_response("B", opp, GameConfig("signed", "blind", g.n, g.n, graph=mirrored), own_strategy=np.ones(g.n))
    assert np.allclose(a, b, atol=1e-12)


def test_signed_low_budget_avoids_negative_ties():
    state = play_game(GameConfig("signed", "blind", 0.1, 1.0, template=template("cp-reg-high", 0.5)))
    assert state.converged
    assert state.eps[0] < 0.01


def test_signed_low_budget_avoids_negative_ties_numeric(small_cp):
    g = small_cp
    state = play_game(GameConfig("signed", "blind", 0.1 * g.n, g.n, graph=g))
    assert state.eps[0] < 0.05


def test_both_blind_uniform():
    state = play_game(GameConfig("blind", "blind", 1.0, 1.0, template=template("reg-reg", 0.5)))
    assert state.converged
    assert state.eps == pytest.approx((0.5, 0.5), abs=1e-6)


def test_large_ratio_both_near_uniform():
    t = template("cp-reg-high", 0.5)
    at10 = play_game(GameConfig("signed", "blind", 10.0, 1.0, template=t))
    assert abs(at10.eps[0] - 0.5) < 0.05
    # B's share on negative-tie nodes crosses one half in this region
    below = play_game(GameConfig("signed", "blind", 5.0, 1.0, template=t)).eps[1]
    above = play_game(GameConfig("signed", "blind", 20.0, 1.0, template=t)).eps[1]
    assert below > 0.5 > above


def test_knowledge_gain_negative_at_small_ratio():
    t = template("cp-reg-high", 0.5)
    signed = play_game(GameConfig("signed", "blind", 0.05, 1.0, template=t))
    blind = play_game(GameConfig("blind", "blind", 0.05, 1.0, template=t))
    assert signed.true_utilities[0] < blind.true_utilities[0]


def test_state_invariants(small_cp):
    g = small_cp
    cfg = GameConfig("signed", "blind", 0.5 * g.n, g.n, graph=g)
    state = play_game(cfg)
    assert sum(state.true_utilities) == pytest.approx(1.0)
    assert state.strategy_a.sum() == pytest.approx(cfg.budget_a)
    assert state.strategy_b.sum() == pytest.approx(cfg.budget_b)
    for h in state.history:
        assert h.true_xa + h.true_xb == pytest.approx(1.0)
    assert state.eps[0] == pytest.approx(negative_share(g, state.strategy_a))
    # one more round does not move either player
    nxt_a = best_response("A", state.strategy_b, cfg, own_strategy=state.strategy_a)
    nxt_b = best_response("B", state.strategy_a, cfg, own_strategy=state.strategy_b)
    assert np.max(np.abs(nxt_a - state.strategy_a)) / cfg.budget_a < cfg.tolerance
    assert np.max(np.abs(nxt_b - state.strategy_b)) / cfg.budget_b < cfg.tolerance


def test_blind_perceived_utilities_complementary():
    state = play_game(GameConfig("blind", "blind", 0.3, 1.0, template=template("reg-cp", 0.5)))
    assert sum(state.perceived_utilities) == pytest.approx(1.0, abs=1e-12)


def test_label_swap_symmetry(small_cp):
    g = small_cp
    rng = np.random.default_rng(0)
    p, q = rng.dirichlet(np.ones(g.n)) * g.n, rng.dirichlet(np.ones(g.n)) * g.n
    one = play_game(GameConfig("blind", "blind", g.n, g.n, graph=g, max_rounds=3), initial_a=p, initial_b=q)
    two = play_game(GameConfig("blind", "blind", g.n, g.n, graph=g, max_rounds=3), initial_a=q, initial_b=p)
    assert np.array_equal(one.strategy_a, two.strategy_b)
    assert np.array_equal(one.strategy_b, two.strategy_a)


def test_symmetric_blind_game_equal_strategies(small_cp):
    g = small_cp
    state = play_game(GameConfig("blind", "blind", g.n, g.n, graph=g))
    assert state.converged
    assert np.max(np.abs(state.strategy_a - state.strategy_b)) / g.n < 1e-4


def test_damping_and_alternating_recorded():
    t = template("reg-reg", 0.5)
    state = play_game(GameConfig("signed", "blind", 1.0, 1.0, template=t, damping=0.5, scheme="alternating"))
    assert state.settings["damping"] == 0.5 and state.settings["scheme"] == "alternating"
    plain = play_game(GameConfig("signed", "blind", 1.0, 1.0, template=t))
    assert state.eps == pytest.approx(plain.eps, abs=1e-3)


def test_nonconvergence_flagged():
    t = template("reg-reg", 0.5)
    state = play_game(GameConfig("signed", "blind", 10.0, 1.0, template=t, max_rounds=2))
    assert not state.converged
    assert len(state.history) == 3
