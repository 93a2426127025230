import pytest

from services import analytic, dist, sim
from services.config import BIAS_TARGET, CHUNK_TRIALS, THREADS_ENV, GameConfig

WIDE = 0.9999


def _contains(est, value):
    slack = est.bias_bound + 1e-12
    return est.ci_lo - slack <= value <= est.ci_hi + slack


def test_wilson_interval():
    lo, hi = sim.wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert 0.5 - lo == pytest.approx(hi - 0.5, abs=1e-9)
    lo, hi = sim.wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-12)
    assert hi > 0.0


def test_chunks_cover_all_trials():
    chunks = sim._chunks(2 * CHUNK_TRIALS + 5)
    assert [n for _, n in chunks] == [CHUNK_TRIALS, CHUNK_TRIALS, 5]
    assert [i for i, _ in chunks] == [0, 1, 2]


def test_success_threshold_bias():
    inc = dist.to_increment(dist.poisson(3.0), -2)
    m, bias = sim.success_threshold(inc, 1)
    assert m >= 2
    assert bias <= BIAS_TARGET
    m_fixed, _ = sim.success_threshold(inc, 1, GameConfig(threshold=7))
    assert m_fixed == 7


def test_walk_simulation_is_deterministic():
    inc = dist.to_increment(dist.poisson(3.0), -2)
    cfg = GameConfig(trials=5000, master_seed=11)
    assert sim.simulate_walk_hit(inc, 1, cfg) == sim.simulate_walk_hit(inc, 1, cfg)


def test_worker_count_does_not_change_results(monkeypatch):
    inc = dist.to_increment(dist.poisson(3.0), -2)
    serial = sim.simulate_walk_hit(inc, 1, GameConfig(trials=3 * CHUNK_TRIALS, master_seed=5))
    monkeypatch.setenv(THREADS_ENV, "4")
    threaded = sim.simulate_walk_hit(
        inc, 1, GameConfig(trials=3 * CHUNK_TRIALS, master_seed=5, workers=4))
    assert threaded.successes == serial.successes


@pytest.mark.parametrize("start,attr", [(1, "p"), (2, "p_bar")])
def test_walk_simulation_matches_no_info(start, attr):
    d = dist.poisson(3.0)
    expected = getattr(analytic.solve_empty(d), attr)
    cfg = GameConfig(trials=40_000, master_seed=1, confidence=WIDE)
    est = sim.simulate_walk_hit(dist.to_increment(d, -2), start, cfg)
    assert _contains(est, expected)
    assert est.undecided == 0


def test_walk_simulation_matches_size_info():
    d = dist.binomial(3, 0.8)
    sol = analytic.solve_size_info(d)
    inc = dist.to_increment(dist.skew(d, sol.q), -2, "skewed-minus-2")
    est = sim.simulate_walk_hit(inc, 1, GameConfig(trials=40_000, master_seed=2, confidence=WIDE))
    assert _contains(est, sol.p_conditional)


def test_walk_simulation_two_boundary_law():
    d = dist.binomial(3, 0.8)
    sol = analytic.solve_empty(d)
    est = sim.simulate_walk_hit(dist.to_increment(d, -2), 1,
                                GameConfig(trials=40_000, master_seed=3, confidence=WIDE))
    assert _contains(est, sol.p)


@pytest.mark.slow
@pytest.mark.parametrize("d", [dist.poisson(3.0), dist.geometric_n0(0.25), dist.binomial(3, 0.8),
                               dist.one_or_many(4, 0.8)], ids=str)
@pytest.mark.parametrize("starter", ["breaker", "maker"])
def test_game_matches_no_info(d, starter):
    sol = analytic.solve_empty(d)
    expected = sol.p if starter == "breaker" else sol.p_bar
    cfg = GameConfig(trials=20_000, master_seed=4, starter=starter, confidence=WIDE)
    est = sim.simulate_game(d, "none", starter, cfg)
    assert _contains(est, expected)


@pytest.mark.slow
def test_game_matches_size_info():
    d = dist.binomial(3, 0.8)
    sol = analytic.solve_size_info(d)
    cfg = GameConfig(trials=20_000, master_seed=6, regime="size", confidence=WIDE)
    est = sim.simulate_game(d, "size", "breaker", cfg)
    assert _contains(est, sol.p_conditional)
    assert est.p_unconditional == pytest.approx(sol.q + (1 - sol.q) * est.p_hat)


NO_INFO_LAWS = [
    dist.poisson(3.0),
    dist.poisson(10.0),
    dist.geometric_n0(0.25),
    dist.binomial(3, 0.8),
    dist.one_or_many(4, 0.8),
    dist.finite_pmf([0.1, 0.1, 0.3, 0.5]),
]

SIZE_INFO_LAWS = [
    dist.poisson(3.0),
    dist.poisson(10.0),
    dist.geometric_n0(0.1),
    dist.binomial(3, 0.8),
    dist.binomial(4, 0.75),
    dist.finite_pmf([0.1, 0.1, 0.3, 0.5]),
]

FULL_INFO_LAWS = [
    dist.poisson(3.0),
    dist.poisson(10.0),
    dist.geometric_n0(0.1),
    dist.binomial(3, 0.8),
    dist.binomial(4, 0.75),
    dist.one_or_many(4, 0.8),
]


def _size_info_target(d, starter):
    """Conditional Breaker probability given an infinite root subtree."""
    sol = analytic.solve_size_info(d)
    if starter == "breaker":
        return sol, sol.p_conditional
    return sol, (dist.pgf(d, sol.p_unconditional) - sol.q) / (1 - sol.q)


@pytest.mark.slow
@pytest.mark.parametrize("d", NO_INFO_LAWS, ids=str)
@pytest.mark.parametrize("starter", ["breaker", "maker"])
def test_no_info_battery(d, starter):
    sol = analytic.solve_empty(d)
    expected = sol.p if starter == "breaker" else sol.p_bar
    cfg = GameConfig(trials=20_000, master_seed=21, starter=starter, confidence=WIDE)
    walked = sim.simulate_walk_hit(dist.to_increment(d, -2), cfg.start_level, cfg)
    played = sim.simulate_game(d, "none", starter, cfg)
    assert _contains(walked, expected)
    assert _contains(played, expected)


@pytest.mark.slow
@pytest.mark.parametrize("d", SIZE_INFO_LAWS, ids=str)
@pytest.mark.parametrize("starter", ["breaker", "maker"])
def test_size_info_battery(d, starter):
    sol, expected = _size_info_target(d, starter)
    assert sol.case == "Interior"
    assert sol.p_bar == pytest.approx(dist.pgf(d, sol.p_unconditional), abs=1e-12)
    cfg = GameConfig(trials=20_000, master_seed=22, regime="size", starter=starter,
                     confidence=WIDE)
    inc = dist.to_increment(dist.skew(d, sol.q), -2)
    walked = sim.simulate_walk_hit(inc, cfg.start_level, cfg)
    played = sim.simulate_game(d, "size", starter, cfg)
    assert _contains(walked, expected)
    assert _contains(played, expected)
    assert played.p_unconditional == pytest.approx(sol.q + (1 - sol.q) * played.p_hat)


@pytest.mark.slow
@pytest.mark.parametrize("d", FULL_INFO_LAWS, ids=str)
@pytest.mark.parametrize("starter", ["breaker", "maker"])
def test_full_info_battery(d, starter):
    cfg = GameConfig(trials=20_000, master_seed=23, regime="full", starter=starter,
                     depth=3, confidence=WIDE)
    est = sim.estimate_binary_subtree_prob(d, 3, cfg)
    assert _contains(est, sim.depth_iterate_p(d, 3, starter))


def test_size_info_walk_large_mean():
    d = dist.poisson(10.0)
    sol = analytic.solve_size_info(d)
    inc = dist.to_increment(dist.skew(d, sol.q), -2)
    est = sim.simulate_walk_hit(inc, 1, GameConfig(trials=40_000, master_seed=24,
                                                   confidence=WIDE))
    assert est.successes > 0
    assert _contains(est, sol.p_conditional)


@pytest.mark.parametrize("d", [dist.geometric_n0(0.1), dist.geometric_n(0.1), dist.poisson(4.0)],
                         ids=str)
def test_depth_iteration_limits(d):
    sol = analytic.solve_full_info(d)
    assert sim.depth_iterate_p(d, 5000) == pytest.approx(sol.p, abs=1e-6)
    assert sim.depth_iterate_p(d, 5000, "maker") == pytest.approx(sol.p_bar, abs=1e-6)


def test_maker_start_depth_iteration():
    d = dist.poisson(3.0)
    assert sim.depth_iterate_p(d, 0, "maker") == 0.0
    assert sim.depth_iterate_p(d, 1, "maker") == pytest.approx(dist.pmf(d, 0))
    assert sim.depth_iterate_p(d, 4, "maker") == \
           pytest.approx(dist.pgf(d, sim.depth_iterate_p(d, 3)))


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_binary_subtree_estimate_maker_start(depth):
    d = dist.poisson(3.0)
    cfg = GameConfig(trials=20_000, master_seed=25, regime="full", starter="maker",
                     depth=depth, confidence=WIDE)
    est = sim.estimate_binary_subtree_prob(d, depth, cfg)
    assert _contains(est, sim.depth_iterate_p(d, depth, "maker"))


def test_game_rejects_full_information():
    with pytest.raises(ValueError):
        sim.simulate_game(dist.poisson(3.0), "full", "breaker", GameConfig(trials=10))


def test_game_small_run_counts():
    est = sim.simulate_game(dist.poisson(3.0), "none", "breaker",
                            GameConfig(trials=500, master_seed=9))
    assert est.trials == 500
    assert 0 <= est.minus_one <= est.successes <= 500


def test_depth_iteration_converges_to_full_info():
    d = dist.geometric_n0(0.1)
    assert sim.depth_iterate_p(d, 0) == 0.0
    assert sim.depth_iterate_p(d, 1) == pytest.approx(dist.pmf(d, 0) + dist.pmf(d, 1))
    assert sim.depth_iterate_p(d, 2000) == pytest.approx(0.238433, abs=1e-6)


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_binary_subtree_estimate(depth):
    d = dist.poisson(3.0)
    cfg = GameConfig(trials=20_000, master_seed=8, regime="full", depth=depth, confidence=WIDE)
    est = sim.estimate_binary_subtree_prob(d, depth, cfg)
    assert _contains(est, sim.depth_iterate_p(d, depth))


def test_binary_subtree_depth_limit():
    with pytest.raises(ValueError):
        sim.estimate_binary_subtree_prob(dist.poisson(3.0), 13, GameConfig(trials=10))


def test_drift_survival_matches_escape_probability():
    half = dist.poisson(1.5)
    inc = dist.to_increment(half, -1)
    escape = 1.0 - analytic.extinction_q(half)
    frac = sim.drift_survival(inc, 400, 40_000, seed=3)
    assert frac == pytest.approx(escape, abs=0.015)


@pytest.mark.parametrize("kwargs", [
    {"trials": 0},
    {"regime": "partial"},
    {"starter": "nobody"},
    {"threshold": 0},
    {"confidence": 1.0},
    {"master_seed": -1},
])
def test_game_config_validation(kwargs):
    with pytest.raises(ValueError):
        GameConfig(**kwargs)


def test_start_level():
    assert GameConfig(starter="breaker").start_level == 1
    assert GameConfig(starter="maker").start_level == 2
