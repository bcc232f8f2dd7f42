"""Environment dynamics: reset, movement, charging, collection, rewards."""

import math
from dataclasses import replace

import numpy as np
import pytest

from aoi_uav import world
from aoi_uav.config import ConfigError, RewardParams, ScenarioConfig, tiny_scenario
from aoi_uav.physics import LaserParams, hover_power, propulsion_power
from aoi_uav.world import (
    EpisodeLog,
    EpisodeOver,
    check_constraints,
    events_to_csv,
    global_state_vector,
    observe,
    parse_layout,
    peak_aoi,
    peak_aoi_recorded,
    reset,
    states_equal,
    step,
)

CANON = ScenarioConfig()

# Frozen: Eq-2 charge minus hover drain for one slot directly above the LBD.
HOVER_CHARGE_DELTA = 93.6954004799872
# Frozen: propulsion power at the canonical cruise speed of 5 m/s.
DRAIN_PER_SLOT_V5 = 48.317043489296964


def open_field(n_uavs=1, n_iots=1, iot_at=((0.0, 400.0),), horizon=10, **kw):
    """Scenario with IoTs pinned via recorded layout-free positions."""
    cfg = replace(CANON, n_uavs=n_uavs, n_iots=n_iots, horizon=horizon, **kw)
    state = reset(cfg, seed=1)
    for s, pos in zip(state.iots, iot_at):
        s.pos = np.array(pos, dtype=float)
    return cfg, state


class TestReset:
    def test_deterministic(self):
        a = reset(CANON, seed=42)
        b = reset(CANON, seed=42)
        assert states_equal(a, b)

    def test_initial_energy(self):
        state = reset(CANON, seed=0)
        for uav in state.uavs:
            assert uav.energy == 0.6 * 30000.0

    def test_iot_count_and_flags(self):
        state = reset(CANON, seed=0)
        assert len(state.iots) == 50
        assert all(s.has_data for s in state.iots)
        assert all(s.gen_time == 0 for s in state.iots)

    def test_canonical_uav_spawn(self):
        state = reset(CANON, seed=0)
        np.testing.assert_array_equal(
            np.array([u.pos for u in state.uavs]),
            np.array([(1, 0), (-1, 0), (0, 1), (0, -1)], dtype=float))

    def test_seed_changes_iot_layout(self):
        a, b = reset(CANON, seed=1), reset(CANON, seed=2)
        assert not states_equal(a, b)

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            reset(replace(CANON, charge_radius=600.0), seed=0)


class TestMovement:
    def test_north_displacement(self):
        cfg, state = open_field()
        nxt, _, _ = step(state, [0], cfg)
        np.testing.assert_allclose(nxt.uavs[0].pos, [1.0, 5.0], atol=1e-12)

    def test_all_displacements_have_commanded_length(self):
        cfg, state = open_field(horizon=20)
        for a in range(8):
            nxt, _, _ = step(state, [a], cfg)
            moved = nxt.uavs[0].pos - state.uavs[0].pos
            assert math.hypot(*moved) == pytest.approx(5.0, abs=1e-9)

    def test_hover_keeps_position(self):
        cfg, state = open_field(include_hover_action=True)
        nxt, _, _ = step(state, [8], cfg)
        np.testing.assert_array_equal(nxt.uavs[0].pos, state.uavs[0].pos)

    def test_flight_disc_clip_logged(self):
        cfg, state = open_field(horizon=300)
        state.uavs[0].pos = np.array([499.0, 0.0])
        nxt, _, _ = step(state, [2], cfg)  # east, through the boundary
        assert math.hypot(*nxt.uavs[0].pos) <= cfg.flight_limit + 1e-9
        assert any(e.event == "clip" for e in nxt.events)

    def test_wrong_action_count(self):
        cfg, state = open_field(n_uavs=1)
        with pytest.raises(ValueError):
            step(state, [0, 0], cfg)

    def test_step_after_done_rejected(self):
        cfg, state = open_field(horizon=1)
        nxt, _, done = step(state, [0], cfg)
        assert done
        with pytest.raises(EpisodeOver):
            step(nxt, [0], cfg)


class TestChargingAndEnergy:
    def test_hover_above_lbd_net_gain(self):
        cfg, state = open_field(include_hover_action=True)
        state.uavs[0].pos = np.array([0.0, 0.0])
        before = state.uavs[0].energy
        nxt, _, _ = step(state, [8], cfg)
        assert nxt.uavs[0].energy - before == pytest.approx(HOVER_CHARGE_DELTA, abs=1e-9)

    def test_one_uav_per_lbd(self):
        cfg, state = open_field(n_uavs=2, include_hover_action=True)
        state.uavs[0].pos = np.array([10.0, 0.0])
        state.uavs[1].pos = np.array([0.0, 20.0])
        nxt, _, _ = step(state, [8, 8], cfg)
        charging = [u.charging_lbd for u in nxt.uavs]
        assert charging.count(0) == 1
        assert charging[0] == 0  # nearest wins

    def test_charging_tie_breaks_by_lower_index(self):
        cfg, state = open_field(n_uavs=2, include_hover_action=True)
        state.uavs[0].pos = np.array([15.0, 0.0])
        state.uavs[1].pos = np.array([-15.0, 0.0])
        nxt, _, _ = step(state, [8, 8], cfg)
        assert nxt.uavs[0].charging_lbd == 0
        assert nxt.uavs[1].charging_lbd is None

    def test_ring_layout_charges_from_nearest_station(self):
        cfg = replace(CANON, n_uavs=1, n_lbds=10, lbd_layout="ring",
                      horizon=5, include_hover_action=True)
        state = reset(cfg, seed=2)
        # Ring stations sit on the charging-radius circle; park on one.
        state.uavs[0].pos = state.lbds[3][:2].copy()
        nxt, _, _ = step(state, [8], cfg)
        assert nxt.uavs[0].charging_lbd == 3

    def test_two_lbds_charge_two_uavs(self, tmp_path):
        layout = tmp_path / "two_lbd.txt"
        layout.write_text("UAV -100 0\nUAV 100 0\n"
                          "LBD -100 0 0\nLBD 100 0 0\nIOT 400 400\n")
        cfg = replace(CANON, n_uavs=2, n_lbds=2, n_iots=1, horizon=5,
                      include_hover_action=True, layout_file=str(layout))
        state = reset(cfg, seed=0)
        nxt, _, _ = step(state, [8, 8], cfg)
        assert nxt.uavs[0].charging_lbd == 0
        assert nxt.uavs[1].charging_lbd == 1

    def test_energy_ledger_balances(self):
        cfg = replace(tiny_scenario(), horizon=40)
        state = reset(cfg, seed=5)
        rng = np.random.default_rng(5)
        done = False
        while not done:
            before = {j: u.energy for j, u in enumerate(state.uavs)}
            actions = list(rng.integers(0, cfg.n_actions, size=cfg.n_uavs))
            state, _, done = step(state, actions, cfg)
            for j, uav in enumerate(state.uavs):
                charge = sum(e.value for e in state.events
                             if e.entity_kind == "uav" and e.entity_id == j
                             and e.event == "charge")
                drain = sum(e.value for e in state.events
                            if e.entity_kind == "uav" and e.entity_id == j
                            and e.event == "drain")
                expected = min(max(before[j] + charge - drain, 0.0), cfg.e_full)
                assert uav.energy == expected

    def test_death_without_charging(self):
        # Charging disabled and constant motion: the battery empties at the
        # slot where cumulative drain crosses the initial 18000 J.
        cfg = replace(CANON, n_uavs=1, horizon=400,
                      laser=LaserParams(conversion_eff=0.0))
        state = reset(cfg, seed=0)
        slot, done = 0, False
        actions = [2, 6]  # shuttle east/west to stay in bounds
        while not done:
            state, rewards, done = step(state, [actions[slot % 2]], cfg)
            slot += 1
        assert not state.uavs[0].alive
        assert slot == math.floor(18000.0 / DRAIN_PER_SLOT_V5) + 1 == 373
        assert any(e.event == "die" for e in state.events)
        # Dying agent receives the terminal penalty through r_p.
        assert rewards[0].r_p <= -cfg.reward.death_penalty


class TestCollection:
    def test_collect_within_comm_radius(self):
        cfg, state = open_field(iot_at=((1.0, 50.0),))
        nxt, rewards, _ = step(state, [0], cfg)  # north: (1,5), dist 45 < 60
        assert any(e.event == "collect" for e in nxt.events)
        assert rewards[0].r_s == 1.0
        assert nxt.iots[0].recorded_aoi == 1

    def test_regenerate_keeps_data_flag(self):
        cfg, state = open_field(iot_at=((1.0, 10.0),))
        nxt, _, _ = step(state, [0], cfg)
        assert nxt.iots[0].has_data
        assert nxt.iots[0].gen_time == 1

    def test_one_shot_clears_flag(self):
        cfg, state = open_field(iot_at=((1.0, 10.0),), regenerate_on_collect=False)
        nxt, _, _ = step(state, [0], cfg)
        assert not nxt.iots[0].has_data

    def test_single_collector_per_iot(self):
        cfg, state = open_field(n_uavs=2, iot_at=((0.0, 0.0),),
                                include_hover_action=True)
        state.uavs[0].pos = np.array([5.0, 0.0])
        state.uavs[1].pos = np.array([9.0, 0.0])
        nxt, rewards, _ = step(state, [8, 8], cfg)
        assert rewards[0].r_s == 1.0 and rewards[1].r_s == 0.0

    def test_agent_can_collect_two(self):
        cfg, state = open_field(n_iots=2, iot_at=((1.0, 20.0), (1.0, -10.0)),
                                include_hover_action=True)
        nxt, rewards, _ = step(state, [8], cfg)
        assert rewards[0].r_s == 2.0

    def test_iot_energy_drains_on_collect(self):
        cfg, state = open_field(iot_at=((1.0, 10.0),))
        nxt, _, _ = step(state, [0], cfg)
        assert nxt.iots[0].energy == cfg.e_iot_init - cfg.channel.tx_power_w * cfg.slot_dt

    def test_rate_gate_blocks_oversized_buffers(self):
        # At ~1e7 bit/s a 1e9-bit buffer cannot clear in one slot, so the
        # gated mode must refuse the collection that the instantaneous mode
        # would have granted.
        gated = replace(CANON, n_uavs=1, horizon=5, rate_gated_collection=True,
                        data_volume=1e9)
        state = reset(gated, seed=1)
        state.iots[0].pos = np.array([1.0, 10.0])
        state.iots[0].data_remaining = gated.data_volume
        nxt, _, _ = step(state, [0], gated)
        assert not any(e.event == "collect" and e.entity_id == 0
                       for e in nxt.events)

    def test_rate_gate_allows_feasible_buffers(self):
        gated = replace(CANON, n_uavs=1, horizon=5, rate_gated_collection=True,
                        data_volume=1e6)
        state = reset(gated, seed=1)
        state.iots[0].pos = np.array([1.0, 10.0])
        nxt, _, _ = step(state, [0], gated)
        assert any(e.event == "collect" and e.entity_id == 0
                   for e in nxt.events)


class TestPeakAoi:
    def test_max_over_recorded(self):
        state = reset(replace(CANON, n_iots=3), seed=0)
        state.slot = 12
        for s, aoi in zip(state.iots, (3, 9, 4)):
            s.recorded_aoi = aoi
            s.has_data = False
        state.peak_recorded_aoi = 9
        assert peak_aoi(state) == 9

    def test_pending_age_counts(self):
        state = reset(replace(CANON, n_iots=1), seed=0)
        state.slot = 50
        assert peak_aoi(state) >= 50

    def test_all_collected_at_generation(self):
        state = reset(replace(CANON, n_iots=2), seed=0)
        for s in state.iots:
            s.has_data = False
            s.recorded_aoi = 0
        assert peak_aoi(state) == 0
        assert peak_aoi_recorded(state) == 0

    def test_peak_nondecreasing_over_episode(self):
        cfg = tiny_scenario()
        state = reset(cfg, seed=3)
        rng = np.random.default_rng(3)
        peaks = [peak_aoi(state)]
        done = False
        while not done:
            state, _, done = step(
                state, list(rng.integers(0, cfg.n_actions, cfg.n_uavs)), cfg)
            peaks.append(peak_aoi(state))
        assert all(a <= b for a, b in zip(peaks, peaks[1:]))


class TestRewards:
    def test_healthy_band_gets_r0(self):
        cfg, state = open_field()
        state.uavs[0].energy = 20000.0
        state.uavs[0].pos = np.array([400.0, 0.0])  # outside charging area
        nxt, rewards, _ = step(state, [4], cfg)
        assert rewards[0].r_p == cfg.reward.r_0

    def test_low_energy_inside_area_no_penalty(self):
        cfg, state = open_field(include_hover_action=True)
        state.uavs[0].energy = 5000.0
        state.uavs[0].pos = np.array([0.0, 100.0])  # inside charging disc
        nxt, rewards, _ = step(state, [8], cfg)
        assert rewards[0].r_p == 0.0

    def test_low_energy_outside_area_penalized(self):
        cfg, state = open_field()
        state.uavs[0].energy = 5000.0
        state.uavs[0].pos = np.array([400.0, 0.0])
        nxt, rewards, _ = step(state, [4], cfg)  # south, stays outside
        d_c = float(np.hypot(*nxt.uavs[0].pos)) - cfg.charge_radius
        assert rewards[0].r_p == pytest.approx(-d_c * cfg.reward.r_pen1)

    def test_total_is_exact_weighted_sum(self):
        cfg, state = open_field(iot_at=((1.0, 50.0),))
        _, rewards, _ = step(state, [0], cfg)
        r = rewards[0]
        rw = cfg.reward
        assert r.total == rw.alpha_a * r.r_a + rw.beta_p * r.r_p + rw.gamma_s * r.r_s

    def test_reward_of_matches_step(self):
        cfg = tiny_scenario()
        state = reset(cfg, seed=9)
        rng = np.random.default_rng(9)
        for _ in range(15):
            actions = list(rng.integers(0, cfg.n_actions, cfg.n_uavs))
            nxt, rewards, done = step(state, actions, cfg)
            for j in range(cfg.n_uavs):
                again = world.reward_of(state, nxt, j, cfg)
                assert again == rewards[j]
            state = nxt
            if done:
                break

    def test_collision_penalty_folded_into_rp(self):
        cfg, state = open_field(n_uavs=2, include_hover_action=True)
        state.uavs[0].pos = np.array([100.0, 0.0])
        state.uavs[1].pos = np.array([104.0, 0.0])
        state.uavs[0].energy = state.uavs[1].energy = 20000.0
        nxt, rewards, _ = step(state, [8, 8], cfg)
        assert rewards[0].r_p == cfg.reward.r_0 - cfg.reward.event_penalty
        assert rewards[1].r_p == cfg.reward.r_0 - cfg.reward.event_penalty


class TestObservation:
    def test_center_agent_entries(self):
        cfg, state = open_field(include_hover_action=True)
        state.uavs[0].pos = np.array([0.0, 0.0])
        obs = observe(state, 0, cfg)
        assert obs[0] == 0.0 and obs[1] == 0.0
        assert obs[2] == cfg.e_init_frac

    def test_dimension_fixed(self):
        cfg = tiny_scenario()
        state = reset(cfg, seed=1)
        for agent in range(cfg.n_uavs):
            assert observe(state, agent, cfg).shape == (cfg.obs_dim,)

    def test_padding_rows_are_sentinel(self):
        cfg = replace(CANON, n_iots=1, obs_k_nearest=3)
        state = reset(cfg, seed=0)
        obs = observe(state, 0, cfg)
        np.testing.assert_array_equal(obs[7:11], np.zeros(4))
        np.testing.assert_array_equal(obs[11:15], np.zeros(4))

    def test_invariant_under_storage_permutation(self):
        cfg = replace(CANON, n_iots=8, obs_k_nearest=4)
        state = reset(cfg, seed=7)
        obs1 = observe(state, 0, cfg)
        rng = np.random.default_rng(0)
        for _ in range(20):
            perm = rng.permutation(len(state.iots))
            shuffled = state.copy()
            shuffled.iots = [state.iots[i].copy() for i in perm]
            np.testing.assert_array_equal(observe(shuffled, 0, cfg), obs1)

    def test_dead_agent_rejected(self):
        cfg, state = open_field()
        state.uavs[0].alive = False
        with pytest.raises(ValueError):
            observe(state, 0, cfg)

    def test_global_state_dimension(self):
        cfg = tiny_scenario()
        state = reset(cfg, seed=1)
        assert global_state_vector(state, cfg).shape == (cfg.global_state_dim,)


class TestDeterminismAndLog:
    def run_episode(self, cfg, seed):
        state = reset(cfg, seed=seed)
        rng = np.random.default_rng(seed)
        log = EpisodeLog(config=cfg)
        done = False
        while not done:
            state, _, done = step(
                state, list(rng.integers(0, cfg.n_actions, cfg.n_uavs)), cfg)
            log.absorb(state)
        return log

    def test_identical_runs_bit_identical(self):
        cfg = replace(tiny_scenario(), horizon=30)
        log_a = self.run_episode(cfg, 11)
        log_b = self.run_episode(cfg, 11)
        assert states_equal(log_a.final_state, log_b.final_state)
        assert events_to_csv(log_a.events) == events_to_csv(log_b.events)

    def test_constraint_report_clean_episode(self):
        cfg, state = open_field(iot_at=((1.0, 10.0),), horizon=3)
        log = EpisodeLog(config=cfg)
        done = False
        while not done:
            state, _, done = step(state, [0], cfg)
            log.absorb(state)
        report = check_constraints(log)
        assert report.all_data_collected.satisfied
        assert report.collision_clearance.satisfied
        assert report.flight_area.satisfied
        assert report.uav_energy_range.satisfied

    def test_constraint_report_collision(self):
        cfg, state = open_field(n_uavs=2, include_hover_action=True, horizon=2)
        state.uavs[0].pos = np.array([100.0, 0.0])
        state.uavs[1].pos = np.array([105.0, 0.0])
        log = EpisodeLog(config=cfg)
        done = False
        while not done:
            state, _, done = step(state, [8, 8], cfg)
            log.absorb(state)
        report = check_constraints(log)
        assert not report.collision_clearance.satisfied
        assert report.collision_clearance.violations >= 1

    def test_constraint_report_boundary(self):
        cfg, state = open_field(horizon=40)
        state.uavs[0].pos = np.array([480.0, 0.0])
        log = EpisodeLog(config=cfg)
        done = False
        while not done:
            state, _, done = step(state, [2], cfg)  # push east into the wall
            log.absorb(state)
        report = check_constraints(log)
        assert not report.flight_area.satisfied
        assert report.flight_area.violations > 0

    def test_event_csv_format(self):
        cfg, state = open_field(iot_at=((1.0, 10.0),))
        nxt, _, _ = step(state, [0], cfg)
        csv = events_to_csv(nxt.events)
        lines = csv.strip().split("\n")
        assert lines[0] == "slot,entity_kind,entity_id,event,value"
        assert all(len(line.split(",")) == 5 for line in lines[1:])

    def test_event_kinds_within_vocabulary(self):
        cfg = replace(tiny_scenario(), horizon=60,
                      e_init_frac=0.02)  # force a death along the way
        state = reset(cfg, seed=13)
        rng = np.random.default_rng(13)
        seen = set()
        done = False
        while not done:
            state, _, done = step(
                state, list(rng.integers(0, cfg.n_actions, cfg.n_uavs)), cfg)
            seen.update(e.event for e in state.events)
        assert seen <= set(world.EVENT_KINDS)
        assert {"move", "drain", "collect"} <= seen


class TestLayoutFile:
    def test_parse_and_reset(self, tmp_path):
        layout = tmp_path / "field.txt"
        layout.write_text(
            "# toy field\n"
            "IOT 10 20\n"
            "IOT -30 5\n"
            "LBD 0 0 0\n"
            "UAV 1 0\n")
        cfg = replace(CANON, n_uavs=1, n_iots=2, n_lbds=1,
                      layout_file=str(layout))
        state = reset(cfg, seed=99)
        np.testing.assert_array_equal(state.iots[0].pos, [10.0, 20.0])
        np.testing.assert_array_equal(state.iots[1].pos, [-30.0, 5.0])
        np.testing.assert_array_equal(state.uavs[0].pos, [1.0, 0.0])

    def test_bad_record_rejected(self):
        with pytest.raises(ConfigError):
            parse_layout("IOT 1\n")

    def test_count_mismatch_rejected(self, tmp_path):
        layout = tmp_path / "field.txt"
        layout.write_text("IOT 0 0\n")
        cfg = replace(CANON, n_iots=2, layout_file=str(layout))
        with pytest.raises(ConfigError):
            reset(cfg, seed=0)
