"""Mobile-node tracking: walkers, adversarial speeds, experiment driver."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from aoisched.core import RngStream
from aoisched.mobility import (
    ADVERSARIAL_C_CLASSES,
    LEVY_VMAX_CLASSES,
    BsEstimate,
    MobilityConfig,
    NodeState,
    assign_adversarial_velocities,
    brownian_step,
    levy_step,
    run_tracking_experiment,
    tracking_error,
)


def _queued(values):
    vals = list(values)
    return lambda *a, **k: vals.pop(0)


def _fixed_gen(**returns):
    """Stand-in for RngStream returning preset draws (hand-traced cases)."""
    return SimpleNamespace(gen=SimpleNamespace(**returns))


# ---------------------------------------------------------------------------
# walkers


def test_levy_step_hand_trace():
    # forced draws: speed 1, heading 0, flight 2 slots, pause 1 slot
    node = NodeState(v_max=1.0)
    rng = _fixed_gen(uniform=_queued([1.0, 0.0]), integers=_queued([2, 1]))
    levy_step(node, rng)  # a fresh tuple flies in the same slot
    np.testing.assert_allclose(node.position, [1.0, 0.0])
    assert node.phase == "flying" and node.remaining == 1
    levy_step(node, rng)
    np.testing.assert_allclose(node.position, [2.0, 0.0])
    levy_step(node, rng)  # flight exhausted: the stored pause starts
    np.testing.assert_allclose(node.position, [2.0, 0.0])
    assert node.phase == "paused"
    # a report during the pause still carries the step-tuple speed
    assert node.velocity == 1.0


def test_levy_step_draw_order_is_speed_heading_flight_pause():
    node = NodeState(v_max=2.0)
    rng = _fixed_gen(uniform=_queued([0.5, math.pi / 2.0]), integers=_queued([1, 3]))
    levy_step(node, rng)
    np.testing.assert_allclose(node.position, [0.0, 0.5], atol=1e-12)
    assert node.phase == "flying" and node.remaining == 0
    assert node.pending_pause == 3
    # the stored pause only starts on the next slot
    levy_step(node, _fixed_gen(uniform=_queued([]), integers=_queued([])))
    assert node.phase == "paused" and node.remaining == 2
    assert node.pending_pause == 0


def test_levy_step_displacement_never_exceeds_v_max():
    for v_max in (0.1, 0.5, 5.0):
        node = NodeState(v_max=v_max)
        rng = RngStream(81).child(f"levy-{v_max}")
        for _ in range(300):
            before = node.position.copy()
            levy_step(node, rng)
            assert np.linalg.norm(node.position - before) <= v_max + 1e-12


def test_levy_step_zero_v_max_is_immobile():
    node = NodeState(v_max=0.0)
    rng = RngStream(82).child("still")
    for _ in range(50):
        levy_step(node, rng)
    np.testing.assert_array_equal(node.position, [0.0, 0.0])


def test_levy_step_pause_lengths_within_configured_range():
    node = NodeState(v_max=1.0)
    rng = RngStream(83).child("ranges")
    pauses = set()
    flights = set()
    for _ in range(2000):
        was_paused = node.phase == "paused"
        levy_step(node, rng, fly_max=4, pause_max=2)
        if node.phase == "paused" and not was_paused:
            pauses.add(node.remaining + 1)
    assert pauses <= {1, 2} and len(pauses) == 2


def test_brownian_step_exact_displacement():
    node = NodeState()
    rng = RngStream(84).child("brownian")
    for speed in (0.0, 0.3, 2.0):
        before = node.position.copy()
        brownian_step(node, speed, rng)
        assert np.linalg.norm(node.position - before) == pytest.approx(speed)
        assert node.velocity == speed
    with pytest.raises(ValueError):
        brownian_step(node, -0.1, rng)


# ---------------------------------------------------------------------------
# adversarial speed assignment


def test_adversarial_velocities_inverse_square_weighting():
    obs = [np.array([1.0, 0.0]), np.array([0.5, 0.0])]
    speeds = assign_adversarial_velocities([1.0, 1.0], obs, 10.0)
    np.testing.assert_allclose(speeds, [2.0, 8.0])  # weights 1 : 4


def test_adversarial_velocities_equal_attention_splits_by_c():
    obs = [np.ones(4)] * 3
    c = np.asarray(ADVERSARIAL_C_CLASSES)
    speeds = assign_adversarial_velocities(c, obs, 5.0)
    np.testing.assert_allclose(speeds, 5.0 * c / c.sum())


def test_adversarial_velocities_exhaust_the_budget():
    rng = RngStream(85).child("budget")
    for _ in range(20):
        n = int(rng.gen.integers(2, 6))
        obs = [rng.gen.uniform(0.1, 2.0, 5) for _ in range(n)]
        c = rng.gen.uniform(0.1, 10.0, n)
        speeds = assign_adversarial_velocities(c, obs, 3.0)
        assert speeds.sum() == pytest.approx(3.0)
        assert np.all(speeds > 0)


def test_adversarial_velocities_reject_zero_norm_observable():
    obs = [np.ones(3), np.zeros(3)]
    with pytest.raises(ValueError, match="node 2 has zero norm"):
        assign_adversarial_velocities([1.0, 1.0], obs, 1.0)


def test_adversarial_velocities_validation():
    obs = [np.ones(3)] * 2
    with pytest.raises(ValueError):
        assign_adversarial_velocities([1.0, 0.0], obs, 1.0)
    with pytest.raises(ValueError):
        assign_adversarial_velocities([1.0, 1.0], obs, 0.0)
    with pytest.raises(ValueError):
        assign_adversarial_velocities([1.0], obs, 1.0)


# ---------------------------------------------------------------------------
# base-station estimate and error metric


def test_bs_estimate_fresh_snapshots_positions():
    nodes = [NodeState(position=np.array([3.0, 4.0])), NodeState()]
    est = BsEstimate.fresh(nodes)
    nodes[0].position[0] = 99.0
    np.testing.assert_array_equal(est.positions, [[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_array_equal(est.velocities, np.zeros((2, 2)))
    np.testing.assert_array_equal(est.ages, [0, 0])


def test_tracking_error_hand_cases():
    nodes = [NodeState(position=np.array([3.0, 4.0]), velocity=2.0)]
    est = BsEstimate.fresh([NodeState()])
    est.ages[0] = 3
    result = tracking_error(nodes, est)
    assert result.mean_distance == pytest.approx(5.0)
    assert result.weighted_aoi == pytest.approx(6.0)


def test_tracking_error_exact_estimate_is_zero():
    nodes = [NodeState(position=np.array([1.0, -2.0]))]
    est = BsEstimate.fresh(nodes)
    result = tracking_error(nodes, est)
    assert result.mean_distance == 0.0
    assert result.weighted_aoi == 0.0


def test_tracking_error_averages_over_nodes():
    nodes = [NodeState(position=np.array([3.0, 4.0])),
             NodeState(position=np.array([0.0, 1.0]))]
    est = BsEstimate.fresh([NodeState(), NodeState()])
    assert tracking_error(nodes, est).mean_distance == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# configuration


def test_mobility_config_class_split_by_thirds():
    levy = MobilityConfig(model="levy", n_nodes=6, T=1)
    np.testing.assert_array_equal(levy.node_params(),
                                  [0.1, 0.1, 0.5, 0.5, 5.0, 5.0])
    adv = MobilityConfig(model="adversarial", n_nodes=6, T=1)
    np.testing.assert_array_equal(adv.node_params(),
                                  [0.1, 0.1, 0.4, 0.4, 40.0, 40.0])


def test_mobility_config_explicit_parameters_bypass_thirds():
    config = MobilityConfig(model="levy", n_nodes=4, T=1,
                            v_max_per_node=(0.2, 0.2, 1.0, 1.0))
    np.testing.assert_array_equal(config.node_params(), [0.2, 0.2, 1.0, 1.0])


def test_mobility_config_speed_ceiling():
    assert MobilityConfig(model="levy", n_nodes=3, T=1).speed_ceiling() == 5.0
    assert MobilityConfig(model="adversarial", n_nodes=3,
                          T=1).speed_ceiling() == 3.0
    assert MobilityConfig(model="adversarial", n_nodes=3, T=1,
                          v_total=7.5).speed_ceiling() == 7.5


def test_mobility_config_validation():
    with pytest.raises(ValueError, match="unknown mobility model"):
        MobilityConfig(model="teleport", n_nodes=3)
    with pytest.raises(ValueError, match="divisible by 3"):
        MobilityConfig(model="levy", n_nodes=4)
    with pytest.raises(ValueError):
        MobilityConfig(model="levy", n_nodes=0)
    with pytest.raises(ValueError):
        MobilityConfig(model="levy", n_nodes=3, M=1)
    with pytest.raises(ValueError, match="unknown scheduler"):
        MobilityConfig(model="levy", n_nodes=3, schedulers=("edf",))
    with pytest.raises(ValueError):
        MobilityConfig(model="levy", n_nodes=3, v_max_per_node=(1.0,))


# ---------------------------------------------------------------------------
# experiment driver


def _tiny(model, **kw):
    kw.setdefault("n_nodes", 3)
    kw.setdefault("M", 12)
    kw.setdefault("T", 4)
    return MobilityConfig(model=model, **kw)


def test_tracking_experiment_smoke_both_models():
    for model in ("levy", "adversarial"):
        runs = run_tracking_experiment(_tiny(model), RngStream(90))
        assert set(runs) == {"fpwl", "fdwl", "max-aoi"}
        for name, run in runs.items():
            assert run.scheduler == name
            assert run.tracking_error.shape == (4,)
            assert np.all(run.tracking_error >= 0.0)
            assert np.all(np.isfinite(run.surrogate_raw))
            assert np.all(run.surrogate_norm >= 0.0)
            assert np.all(run.surrogate_norm <= 1.0 + 1e-12)


def test_tracking_experiment_stationary_nodes_have_zero_error():
    levy = _tiny("levy", v_max_per_node=(0.0, 0.0, 0.0))
    for run in run_tracking_experiment(levy, RngStream(91)).values():
        np.testing.assert_array_equal(run.tracking_error, np.zeros(4))
        np.testing.assert_array_equal(run.surrogate_raw, np.zeros(4))
    adv = _tiny("adversarial", v_total=0.0)
    for run in run_tracking_experiment(adv, RngStream(91)).values():
        np.testing.assert_array_equal(run.tracking_error, np.zeros(4))


def test_tracking_experiment_is_deterministic():
    series = []
    for _ in range(2):
        runs = run_tracking_experiment(_tiny("adversarial"), RngStream(92))
        series.append({k: r.tracking_error.copy() for k, r in runs.items()})
    for k in series[0]:
        np.testing.assert_array_equal(series[0][k], series[1][k])


def test_tracking_experiment_levy_trajectories_are_paired():
    # under position-driven motion every scheduler must face the same
    # walks, so a scheduler's series cannot depend on who else ran
    alone = run_tracking_experiment(
        _tiny("levy", schedulers=("max-aoi",)), RngStream(93))
    together = run_tracking_experiment(_tiny("levy"), RngStream(93))
    np.testing.assert_array_equal(alone["max-aoi"].tracking_error,
                                  together["max-aoi"].tracking_error)
    np.testing.assert_array_equal(alone["max-aoi"].surrogate_raw,
                                  together["max-aoi"].surrogate_raw)


def test_tracking_experiment_fast_nodes_hurt_oblivious_scheduler():
    # one fast node among slow ones: the max-AoI scheduler ignores speed
    # and must track worse than a speed-weighted one over a long run
    config = MobilityConfig(model="levy", n_nodes=3, M=60, T=20,
                            v_max_per_node=(0.05, 0.05, 3.0))
    runs = run_tracking_experiment(config, RngStream(94))
    fdwl = runs["fdwl"].tracking_error.mean()
    maxaoi = runs["max-aoi"].tracking_error.mean()
    assert fdwl < maxaoi
