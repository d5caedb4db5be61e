"""Engine tests: reset, step pipeline, episode runs, oracle equivalence."""

from dataclasses import replace

import numpy as np
import pytest

from climcoop import (
    ActionBatch,
    FixedPolicy,
    RandomPolicy,
    ZeroPolicy,
    build_observation,
    build_observations,
    episode_rewards,
    logs_equal,
    reset,
    run_episode,
    step,
    temperature_increase,
    with_floors,
)
from climcoop.engine import EpisodeLog, region_state, worldstate_equal
from climcoop.errors import ConfigError, InvalidStateError
from climcoop.policy import OBS_FLOOR, OBS_REGION_ID, OBS_STEP_FRACTION

from helpers import ScheduledPolicy, config_as_plain_dict, varied_schedule
from naive_sim import naive_episode


class TestReset:
    def test_default_has_27_regions_with_table_row0(self, full_config):
        state = reset(full_config, seed=0)
        assert state.n_regions == 27
        assert state.labor[0] == pytest.approx(476.878)
        assert state.technology[0] == pytest.approx(1.872)
        assert state.capital[0] == pytest.approx(0.239)
        assert state.sigma[0] == pytest.approx(0.456)

    def test_reset_deterministic(self, full_config):
        assert worldstate_equal(reset(full_config, 5), reset(full_config, 5))

    def test_truncated_config(self, tiny_config):
        assert reset(tiny_config, 0).n_regions == 3

    def test_invalid_config_names_field_and_region(self, full_config):
        bad_region = replace(full_config.regions[3], l0=-1.0)
        bad = replace(
            full_config,
            regions=full_config.regions[:3] + (bad_region,) + full_config.regions[4:],
        )
        with pytest.raises(ConfigError, match="region 3.*xL_0"):
            reset(bad, 0)


class TestStep:
    def test_zero_actions_advance_stocks(self, full_config):
        state = reset(full_config, 0)
        nxt, rewards = step(state, ActionBatch.zeros(27))
        assert nxt.step_index == 1
        assert nxt.labor[0] == pytest.approx(482.40, abs=5e-3)
        assert nxt.technology[0] == pytest.approx(2.1066, abs=5e-4)
        # capital decays without investment
        assert nxt.capital[0] == pytest.approx(0.239 * 0.9**5, rel=1e-12)
        # state is not mutated
        assert state.step_index == 0 and state.labor[0] == pytest.approx(476.878)

    def test_purity(self, tiny_config):
        state = reset(tiny_config, 1)
        acts = ActionBatch.zeros(3)
        a1, r1 = step(state, acts)
        a2, r2 = step(state, acts)
        assert worldstate_equal(a1, a2)
        assert np.array_equal(r1, r2)

    def test_full_abatement_zero_emissions(self, full_config):
        state = reset(full_config, 0)
        batch = FixedPolicy(27, mitigation=1.0).act_batch(None, None)
        nxt, _ = step(state, batch)
        assert nxt.last_emissions == 0.0
        assert nxt.climate.cumulative_emissions == 0.0

    def test_action_count_mismatch(self, tiny_config):
        state = reset(tiny_config, 0)
        with pytest.raises(ConfigError):
            step(state, ActionBatch.zeros(5))

    def test_step_after_done_errors(self, tiny_config):
        state = reset(tiny_config, 0)
        for _ in range(tiny_config.econ.num_steps):
            state, _ = step(state, ActionBatch.zeros(3))
        with pytest.raises(InvalidStateError):
            step(state, ActionBatch.zeros(3))

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_nan_aborts_with_context(self, tiny_config):
        blown = replace(
            tiny_config,
            regions=(
                replace(tiny_config.regions[0], g_a=1e308),
            ) + tiny_config.regions[1:],
        )
        state = reset(blown, 0)
        with pytest.raises(InvalidStateError, match="step=0"):
            step(state, ActionBatch.zeros(3))

    def test_clamping_out_of_range_actions(self, tiny_config):
        state = reset(tiny_config, 0)
        acts = ActionBatch.zeros(3)
        acts.savings[:] = 1.7
        acts.mitigation[:] = -0.5
        acts.import_bids[:] = -1.0
        nxt, _ = step(state, acts)
        # savings clamp to 1 -> zero consumption; bids clamp to 0 -> no trade
        assert nxt.last_action_means[0] == pytest.approx(1.0)
        assert nxt.last_action_means[1] == pytest.approx(0.0)
        assert nxt.last_action_means[3] == pytest.approx(0.0)

    def test_floor_masks_mitigation(self, tiny_config):
        state = with_floors(reset(tiny_config, 0), np.array([0.6, 0.0, 0.2]))
        nxt, _ = step(state, ActionBatch.zeros(3))
        assert nxt.last_action_means[1] == pytest.approx((0.6 + 0.0 + 0.2) / 3)
        # floors are per step: cleared on the new state
        assert np.all(nxt.floors == 0)

    def test_region_state_view(self, tiny_config):
        state = reset(tiny_config, 0)
        rs = region_state(state, 1)
        assert rs.labor == pytest.approx(68.395)
        assert rs.cumulative_utility == 0.0


class TestObservations:
    def test_layout_basics(self, tiny_config):
        state = reset(tiny_config, 0)
        obs = build_observations(state)
        assert obs.shape == (3, 14)
        assert np.all(obs[:, OBS_STEP_FRACTION] == 0.0)
        assert np.all(obs[:, OBS_FLOOR] == 0.0)
        assert obs[:, OBS_REGION_ID] == pytest.approx([0.0, 0.5, 1.0])
        assert np.all(np.isfinite(obs))

    def test_single_row_matches_matrix(self, tiny_config):
        state = reset(tiny_config, 0)
        obs = build_observations(state)
        assert np.array_equal(build_observation(state, 2), obs[2])
        with pytest.raises(ConfigError):
            build_observation(state, 9)

    def test_identical_states_differ_only_in_identity(self, full_config):
        # regions 12 and 14 share growth params but differ in stocks; use
        # two synthetic identical regions instead
        cfg = replace(
            full_config,
            regions=(
                full_config.regions[0],
                replace(full_config.regions[1], **{
                    f: getattr(full_config.regions[0], f)
                    for f in ("a0", "k0", "l0", "l_a", "delta_a", "g_a", "l_g", "sigma0")
                }),
            ),
            econ=replace(full_config.econ, for_pref=(0.5, 0.5)),
        )
        obs = build_observations(reset(cfg, 0))
        differing = np.nonzero(obs[0] != obs[1])[0]
        assert differing.tolist() == [OBS_REGION_ID]

    def test_step_fraction_advances(self, tiny_config):
        state = reset(tiny_config, 0)
        state, _ = step(state, ActionBatch.zeros(3))
        obs = build_observations(state)
        assert np.all(obs[:, OBS_STEP_FRACTION] == pytest.approx(1 / 3))


class TestRunEpisode:
    def test_log_is_rectangular(self, full_config):
        log = run_episode(full_config, ZeroPolicy(27), seed=1)
        assert log.num_steps == 20
        for field, series in log.region_series.items():
            assert series.shape == (20, 27), field
        assert log.temp_atmosphere_pre.shape == (20,)

    def test_zero_policy_nego_invariant(self, full_config):
        off = run_episode(full_config, ZeroPolicy(27), seed=4, nego_on=False)
        on = run_episode(full_config, ZeroPolicy(27), seed=4, nego_on=True)
        assert logs_equal(off, on)
        assert off.to_json() == on.to_json().replace('"negotiation_on": true',
                                                     '"negotiation_on": false')

    def test_bit_identical_reruns(self, full_config):
        a = run_episode(full_config, RandomPolicy(27), seed=9, nego_on=True)
        b = run_episode(full_config, RandomPolicy(27), seed=9, nego_on=True)
        assert logs_equal(a, b) and a.to_json() == b.to_json()

    def test_summary_matches_log(self, full_config):
        policy = FixedPolicy(27, savings=0.2, mitigation=0.3, export_cap=0.5,
                             bid=0.01, tariff=0.1)
        log = run_episode(full_config, policy, seed=2)
        summary = run_episode(full_config, policy, seed=2, collect_log=False)
        assert summary.u == pytest.approx(log.u, rel=1e-12)
        assert np.allclose(summary.u_i, log.u_i, rtol=1e-12)
        assert summary.temperature_increase == pytest.approx(
            log.temperature_increase, rel=1e-12
        )
        assert summary.action_means == pytest.approx(
            log.summary().action_means, rel=1e-12
        )

    def test_reward_consistency(self, full_config):
        log = run_episode(full_config, RandomPolicy(27), seed=3)
        u_i, u = episode_rewards(log)
        assert np.allclose(u_i, log.region_series["utility"].sum(axis=0), rtol=1e-12)
        assert np.allclose(u_i, log.u_i, rtol=1e-12)
        assert u == pytest.approx(log.u, rel=1e-12)

    def test_temperature_increase_definition(self, full_config):
        log = run_episode(full_config, ZeroPolicy(27), seed=1)
        assert temperature_increase(log) == pytest.approx(
            log.temp_atmosphere_post[-1] - log.temp_atmosphere_pre[0], rel=1e-12
        )
        assert log.temp_atmosphere_pre[0] == pytest.approx(
            full_config.climate.initial_temp_atmosphere
        )

    def test_temperature_increase_constant_log_is_zero(self, tiny_config):
        log = run_episode(tiny_config, ZeroPolicy(3), seed=1)
        log.temp_atmosphere_pre[:] = 0.7
        log.temp_atmosphere_post[:] = 0.7
        assert temperature_increase(log) == 0.0

    def test_full_abatement_from_equilibrium_leaves_drift_only(self, tiny_config):
        # start the climate at its preindustrial fixed point with no
        # exogenous forcing: full abatement must keep temperature at zero
        from climcoop import ClimateParams

        cfg = replace(
            tiny_config,
            climate=ClimateParams(
                initial_masses=(588.0, 360.0, 1720.0),
                initial_temp_atmosphere=0.0,
                initial_temp_ocean=0.0,
                f_exo_0=0.0,
                f_exo_slope=0.0,
            ),
        )
        log = run_episode(cfg, FixedPolicy(3, savings=0.2, mitigation=1.0), seed=1)
        assert np.all(log.emissions == 0.0)
        assert log.temperature_increase == pytest.approx(0.0, abs=1e-12)
        # with the exogenous schedule switched back on, only that drift shows
        drift_cfg = replace(
            tiny_config,
            climate=ClimateParams(
                initial_masses=(588.0, 360.0, 1720.0),
                initial_temp_atmosphere=0.0,
                initial_temp_ocean=0.0,
            ),
        )
        drift_log = run_episode(
            drift_cfg, FixedPolicy(3, savings=0.2, mitigation=1.0), seed=1
        )
        assert np.all(drift_log.emissions == 0.0)
        assert 0.0 < drift_log.temperature_increase < 0.5

    def test_json_round_trip(self, tiny_config):
        log = run_episode(tiny_config, RandomPolicy(3), seed=5, nego_on=True,
                          collect_nego=True)
        back = EpisodeLog.from_dict(log.to_dict())
        assert logs_equal(log, back)
        assert back.negotiation_trace == log.negotiation_trace

    def test_verbose_callback_stream(self, tiny_config):
        seen = []
        run_episode(
            tiny_config,
            ZeroPolicy(3),
            seed=1,
            step_callback=lambda t, state, acts, rewards, floors: seen.append(t),
        )
        assert seen == [0, 1, 2]

    def test_mitigation_monotonicity_end_to_end(self, full_config):
        high = run_episode(full_config, FixedPolicy(27, savings=0.2, mitigation=0.9),
                           seed=1)
        low = run_episode(full_config, FixedPolicy(27, savings=0.2, mitigation=0.0),
                          seed=1)
        assert high.temp_atmosphere_post[-1] < low.temp_atmosphere_post[-1]

    def test_quantized_proposals_snap_floors(self, tiny_config):
        cfg = replace(tiny_config, nego_quantize_levels=10)
        policy = FixedPolicy(3, promise=0.52, request=0.48, accept_all=True)
        log = run_episode(cfg, policy, seed=1, nego_on=True, collect_nego=True)
        floors = np.asarray(log.negotiation_trace[0]["floors"])
        # 0.52 -> 5/9, 0.48 -> 4/9; the binding bound is the max
        assert floors == pytest.approx([5 / 9] * 3)

    def test_composite_policy_heterogeneous(self, tiny_config):
        from climcoop.policy import CompositePolicy

        members = [
            FixedPolicy(3, savings=0.1, mitigation=0.0),
            FixedPolicy(3, savings=0.2, mitigation=0.5),
            ZeroPolicy(3),
        ]
        log = run_episode(tiny_config, CompositePolicy(members), seed=1)
        assert log.region_series["savings"][0].tolist() == [0.1, 0.2, 0.0]
        assert log.region_series["mitigation"][0].tolist() == [0.0, 0.5, 0.0]

    def test_negotiation_trace_only_when_asked(self, tiny_config):
        policy = FixedPolicy(3, promise=0.5, request=0.4, accept_all=True)
        bare = run_episode(tiny_config, policy, seed=1, nego_on=True)
        traced = run_episode(tiny_config, policy, seed=1, nego_on=True,
                             collect_nego=True)
        assert bare.negotiation_trace == []
        assert len(traced.negotiation_trace) == tiny_config.econ.num_steps
        assert traced.negotiation_trace[0]["floors"] == pytest.approx([0.5] * 3)


class TestOracleEquivalence:
    def test_three_region_three_step_scripted(self, tiny_config):
        batches, dicts = varied_schedule(3, 3)
        log = run_episode(tiny_config, ScheduledPolicy(batches), seed=0)
        oracle = naive_episode(config_as_plain_dict(tiny_config), dicts)

        for field, key in [
            ("utility", "utility"),
            ("labor", "labor"),
            ("technology", "technology"),
            ("capital", "capital"),
            ("consumption", "consumption"),
            ("savings", "savings"),
            ("mitigation", "mitigation"),
        ]:
            got = log.region_series[field]
            want = np.array(oracle[key])
            assert got == pytest.approx(want, rel=1e-9), field
        assert log.temp_atmosphere_pre == pytest.approx(
            np.array(oracle["temp_pre"]), rel=1e-9
        )
        assert log.temp_atmosphere_post == pytest.approx(
            np.array(oracle["temp_post"]), rel=1e-9
        )
        assert log.emissions == pytest.approx(np.array(oracle["emissions"]), rel=1e-9)
        assert log.u_i == pytest.approx(np.array(oracle["u_i"]), rel=1e-9)
        assert log.u == pytest.approx(oracle["u"], rel=1e-9)
        assert log.temperature_increase == pytest.approx(
            oracle["temperature_increase"], rel=1e-9
        )

    def test_oracle_also_matches_on_20_step_default_horizon(self, full_config):
        cfg = replace(full_config, regions=full_config.regions[:5],
                      econ=replace(full_config.econ,
                                   **dict(zip(("dom_pref", "for_pref"),
                                              (0.5, (0.125,) * 5)))))
        batches, dicts = varied_schedule(5, 20)
        log = run_episode(cfg, ScheduledPolicy(batches), seed=0)
        oracle = naive_episode(config_as_plain_dict(cfg), dicts)
        assert log.u_i == pytest.approx(np.array(oracle["u_i"]), rel=1e-9)
        assert log.temp_atmosphere_post[-1] == pytest.approx(
            oracle["temp_post"][-1], rel=1e-9
        )
