import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signedvoter.dynamics import steady_state
from signedvoter.graph import undirected
from signedvoter.meanfield import (
    DegreeClassModel, MeanFieldError, _vote_share_arrays, blind_allocation, blind_classes, class_states,
    limiting_allocation, limiting_slopes, maximise_over_shares, mf_optimize_eps, mf_positive_vote_shares,
    mf_vote_share, neighbour_states_fixed_point, simplex_grid, template,
)
from signedvoter.netgen import ComponentSpec, generate_component, make_topology
from signedvoter.optimize import OptimizerOptions, gradient_ascent, negative_share


def test_one_class_symmetric():
    X, _, _ = mf_vote_share(DegreeClassModel([16.0], [0.0], [1.0], [1.0], [1.0]))
    assert X == pytest.approx(0.5)


def test_regular_graph_matches_numeric():
    g = generate_component(ComponentSpec("regular", 1000, (16,)), 0)
    num = steady_state(g, np.full(g.n, 1.3), np.ones(g.n)).vote_share_A
    X, _, _ = mf_vote_share(DegreeClassModel([16.0], [0.0], [1.0], [1.3], [1.0]))
    assert abs(X - num) < 1e-6


def test_signed_regular_graph_close_to_numeric():
    g = make_topology("reg-reg", n=1000, p=1.0, seed=0)
    num = steady_state(g, np.full(g.n, 2.0), np.ones(g.n)).vote_share_A
    X, _, _ = mf_vote_share(DegreeClassModel([16.0], [4.0], [1.0], [2.0], [1.0]))
    assert abs(X - num) < 1e-3


def random_table(rng, m):
    ka = rng.uniform(1, 40, m)
    kb = rng.uniform(0, 10, m) * (rng.random(m) < 0.7)
    w = rng.dirichlet(np.ones(m))
    return DegreeClassModel(ka, kb, w, rng.uniform(0, 5, m), rng.uniform(0, 5, m) + 1e-3)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 6))
def test_closed_form_equals_fixed_point(seed, m):
    model = random_table(np.random.default_rng(seed), m)
    X, xa, xb = mf_vote_share(model, check=False)
    fxa, fxb = neighbour_states_fixed_point(model)
    assert abs(xa - fxa) < 1e-10
    assert abs(xb - fxb) < 1e-10
    states = class_states(model)
    assert np.all(states >= -1e-12) and np.all(states <= 1 + 1e-12)
    assert X == pytest.approx(float(np.sum(model.weight * states)), abs=1e-12)


def test_no_negative_ties_branch():
    X, xa, xb = mf_vote_share(DegreeClassModel([10.0, 20.0], [0.0, 0.0], [0.5, 0.5], [1.0, 2.0], [1.0, 1.0]))
    assert 0 < X < 1


def test_invalid_models():
    with pytest.raises(MeanFieldError):
        DegreeClassModel([0.0], [1.0], [1.0], [1.0], [1.0])
    with pytest.raises(MeanFieldError):
        DegreeClassModel([1.0, 2.0], [0.0, 0.0], [0.3, 0.3], [1.0, 1.0], [1.0, 1.0])


def test_reg_reg_small_p_avoids_negative():
    res = mf_optimize_eps(template("reg-reg", 0.1), 1.0, 1.0)
    assert res.eps == 0.0


def test_all_negative_network_eps_one():
    res = mf_optimize_eps(template("reg-reg", 1.0), 1.0, 1.0)
    assert res.eps == 1.0


def test_reg_cp_prefers_low_negative_degree():
    res = mf_optimize_eps(template("reg-cp", 0.3), 1.0, 1.0)
    assert res.eps > 0
    tmpl = res.template
    high, low = np.argmax(tmpl.kb), int(np.flatnonzero((tmpl.kb > 0) & (tmpl.kb < tmpl.kb.max()))[0])
    assert res.shares[low] > res.shares[high]


def test_meanfield_tracks_gradient_ascent():
    tmpl = template("reg-reg", 0.5)
    mf = mf_optimize_eps(tmpl, 1.0, 1.0)
    g = make_topology("reg-reg", n=1000, p=0.5, seed=1)
    ga = gradient_ascent(g, np.ones(g.n), g.n, OptimizerOptions(rng_seed=0))
    assert abs(mf.x_star - ga.true_vote_share) < 0.01
    assert abs(mf.eps - negative_share(g, ga.p_star)) < 0.05


def test_template_weights_and_groups():
    for name in ("reg-reg", "cp-reg-high", "cp-reg-low", "reg-cp"):
        for p in (0.1, 0.5, 0.8):
            t = template(name, p)
            assert t.weight.sum() == pytest.approx(1.0)
            assert t.weight[t.negative].sum() == pytest.approx(p)
            mean_kb = float(np.sum(t.weight * t.kb))
            assert mean_kb == pytest.approx(4.0 if name != "reg-cp" else 4.0 - p, rel=0.3)
    assert template("cp-reg-high", 0.5).size == 2
    assert template("cp-reg-high", 0.3).size == 3
    assert template("reg-cp", 0.5).size == 3


def test_share_search_finds_interior_optimum():
    target = np.array([0.2, 0.3, 0.5])
    shares, val = maximise_over_shares(lambda s: -np.sum((s - target) ** 2, axis=-1), 3)
    assert np.allclose(shares, target, atol=1e-5)
    assert simplex_grid(3, 0.5).shape == (6, 3)


def test_limiting_allocation_examples():
    assert limiting_allocation(1.0, 1.0, 1.0, 1.0, 1.0) == pytest.approx(1.0)
    # regular negative component, uniform adversary -> uniform
    assert np.allclose(limiting_allocation(np.full(5, 2.0), np.full(5, 0.7), 3.0, 0.7, 2.0), 3.0)
    slope_b, slope_kb = limiting_slopes(3 * 0.5 + 2 * 2, 0.5, 2)
    assert slope_kb == 0 and slope_b > 0
    with pytest.raises(MeanFieldError):
        limiting_allocation(0.0, 0.0, 1.0, 0.0, 0.0)


def test_limiting_allocation_budget_consistency(rng):
    for _ in range(20):
        w = rng.dirichlet(np.ones(6))
        kb, b = rng.uniform(0, 5, 6), rng.uniform(0, 3, 6)
        mean_kb, mean_b = float(w @ kb), float(w @ b)
        mean_a = 3 * mean_b + 2 * mean_kb + rng.uniform(0, 5)
        a = limiting_allocation(kb, b, mean_a, mean_b, mean_kb, clip=False)
        assert float(w @ a) == pytest.approx(mean_a, rel=1e-12)


def test_limiting_allocation_clips_with_warning():
    with pytest.warns(RuntimeWarning):
        a = limiting_allocation(np.array([5.0, 0.0]), np.array([1.0, 1.0]), 1.0, 1.0, 2.5)
    assert a.min() == 0.0


def test_zero_gain_law_large_positive_degree():
    # every node has the same negative degree and the adversary is uniform
    ka, kb, w = np.array([30.0, 50.0, 70.0]), np.full(3, 2.0), np.array([0.25, 0.5, 0.25])
    for mean_a, mean_b in [(1.0, 1.0), (5.5, 0.5), (4.5, 5.0), (7.0, 0.5)]:
        b = np.full(3, mean_b)
        signed = limiting_allocation(kb, b, mean_a, mean_b, 2.0)
        blind = blind_allocation(b, mean_a, mean_b)
        x_signed = mf_vote_share(DegreeClassModel(ka, kb, w, signed, b))[0]
        x_blind = mf_vote_share(DegreeClassModel(ka, kb, w, blind, b))[0]
        assert abs(x_signed - x_blind) < 1e-3


def test_blind_equal_allocations():
    xa, xb = mf_positive_vote_shares([(20, 0.5, 1.0, 1.0), (4, 0.5, 2.0, 2.0)])
    assert xa == pytest.approx(0.5) and xb == pytest.approx(0.5)


def test_blind_single_class():
    xa, _ = mf_positive_vote_shares([(12, 1.0, 3.0, 1.0)])
    assert xa == pytest.approx(3.0 / 4.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), m=st.integers(1, 6))
def test_blind_complementarity(seed, m):
    rng = np.random.default_rng(seed)
    rows = list(zip(rng.uniform(1, 40, m), rng.dirichlet(np.ones(m)), rng.uniform(0, 5, m),
                    rng.uniform(0, 5, m) + 1e-3))
    xa, xb = mf_positive_vote_shares(rows)
    assert xa + xb == pytest.approx(1.0, abs=1e-12)


def test_blind_matches_derivation_on_regular_graph():
    # on a k-regular graph the blind model is exact: compare with the numeric solver
    g = generate_component(ComponentSpec("regular", 500, (10,)), 3)
    xa, _ = mf_positive_vote_shares([(10, 1.0, 2.0, 1.0)])
    assert xa == pytest.approx(steady_state(g, np.full(500, 2.0), np.ones(500)).vote_share_A, abs=1e-9)


def test_blind_view_sees_total_degree_only():
    m = DegreeClassModel([16.0, 20.0], [4.0, 0.0], [0.5, 0.5], [1.0, 1.0], [2.0, 2.0])
    rows = blind_classes(m)
    assert [r[0] for r in rows] == [20.0, 20.0]
    flipped = DegreeClassModel([20.0, 16.0], [0.0, 4.0], [0.5, 0.5], [1.0, 1.0], [2.0, 2.0])
    assert mf_positive_vote_shares(rows) == pytest.approx(mf_positive_vote_shares(blind_classes(flipped)))
