#include "slat/degradation_sim.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace slat;

namespace {

SimConfig config_for(FaultMode mode) {
    SimConfig cfg;
    cfg.mode = mode;
    return cfg;
}

AmplifierState settle(AmplifierState s, const AmplifierModel& m, int iterations = 400) {
    for (int i = 0; i < iterations; ++i) s = agc_step(s, m, m.target_gain_db);
    return s;
}

// Channels a mode's drift is expected to move: the affected stage's pump.
std::vector<Index> targeted(FaultMode mode) {
    switch (mode) {
        case FaultMode::PumpLaser:
        case FaultMode::PassiveComponents: return {kPump1Current, kPump1Power};
        case FaultMode::PowerDetector:
        case FaultMode::Voa: return {kPump2Current, kPump2Power};
    }
    return {};
}

}  // namespace

TEST(Agc, AtTargetCurrentsUnchanged) {
    const AmplifierModel m;
    const AmplifierState s = initial_state(m);
    EXPECT_NEAR(s.reported_gain(), m.target_gain_db, 1e-12);
    EXPECT_NEAR(s.reported_stage1_gain(), m.stage1_target_db, 1e-12);
    const AmplifierState next = agc_step(s, m, m.target_gain_db);
    EXPECT_NEAR(next.pump_current[0], s.pump_current[0], 1e-9);
    EXPECT_NEAR(next.pump_current[1], s.pump_current[1], 1e-9);
}

TEST(Agc, HalvedEfficiencyDoublesCurrent) {
    const AmplifierModel m;
    for (std::size_t stage : {0u, 1u}) {
        AmplifierState s = initial_state(m);
        const double before = s.pump_current[stage];
        s.pump_efficiency[stage] *= 0.5;
        const AmplifierState settled = settle(s, m);
        EXPECT_NEAR(settled.pump_current[stage] / before, 2.0, 1e-9);
    }
}

TEST(Agc, SaturatesAtMaxCurrent) {
    const AmplifierModel m;
    AmplifierState s = initial_state(m);
    s.pump_efficiency[0] *= 0.1;
    const AmplifierState settled = settle(s, m);
    EXPECT_EQ(settled.pump_current[0], m.max_current_ma);
    EXPECT_LT(settled.reported_stage1_gain(), m.stage1_target_db - 1.0);
    const AmplifierState again = agc_step(settled, m, m.target_gain_db);
    EXPECT_EQ(again.pump_current[0], m.max_current_ma);
}

TEST(Agc, GainHeldWhileUnsaturated) {
    for (FaultMode mode : kAllModes) {
        const SimulationRun run = simulate_run(config_for(mode), 77);
        const AmplifierModel m;
        for (std::size_t i = 5; i < run.states.size(); ++i) {
            const auto& s = run.states[i];
            if (s.pump_current[0] >= m.max_current_ma || s.pump_current[1] >= m.max_current_ma) continue;
            ASSERT_LT(std::abs(s.reported_gain() - m.target_gain_db), 0.1) << mode_tag(mode) << " step " << i;
            ASSERT_LT(std::abs(s.reported_stage1_gain() - m.stage1_target_db), 0.1);
        }
    }
}

TEST(Drift, ZeroTimeLeavesStateUnchanged) {
    const AmplifierModel m;
    const AmplifierState s = initial_state(m, {0.51, 0.48});
    const DriftParams d;
    for (FaultMode mode : kAllModes) {
        const AmplifierState x = inject_drift(s, mode, 0.0, d);
        EXPECT_EQ(x.pump_efficiency, s.pump_efficiency);
        EXPECT_EQ(x.pd_bias, s.pd_bias);
        EXPECT_EQ(x.voa_error, s.voa_error);
        EXPECT_EQ(x.passive_loss, s.passive_loss);
        EXPECT_EQ(x.pump_current, s.pump_current);
    }
}

TEST(Drift, PumpEfficiencyAtTauIsOneOverE) {
    const AmplifierModel m;
    const AmplifierState s = initial_state(m, {0.52, 0.49});
    DriftParams d;
    d.pump_tau = 437.0;
    const AmplifierState x = inject_drift(s, FaultMode::PumpLaser, 437.0, d);
    EXPECT_DOUBLE_EQ(x.pump_efficiency[0], 0.52 / std::exp(1.0));
    EXPECT_EQ(x.pump_efficiency[1], 0.49);
}

TEST(Drift, ModeIsolation) {
    const AmplifierModel m;
    const AmplifierState s = initial_state(m, {0.52, 0.49});
    const DriftParams d;
    const double t = 123.0;

    const AmplifierState pd = inject_drift(s, FaultMode::PowerDetector, t, d);
    EXPECT_EQ(pd.pump_efficiency, s.pump_efficiency);
    EXPECT_EQ(pd.voa_error, 0.0);
    EXPECT_EQ(pd.passive_loss, s.passive_loss);
    EXPECT_DOUBLE_EQ(pd.pd_bias, d.pd_bias_rate * t);

    const AmplifierState voa = inject_drift(s, FaultMode::Voa, t, d);
    EXPECT_EQ(voa.pump_efficiency, s.pump_efficiency);
    EXPECT_EQ(voa.pd_bias, 0.0);
    EXPECT_DOUBLE_EQ(voa.voa_error, d.voa_drift_rate * t);

    const AmplifierState pc = inject_drift(s, FaultMode::PassiveComponents, t, d);
    EXPECT_EQ(pc.pump_efficiency, s.pump_efficiency);
    EXPECT_DOUBLE_EQ(pc.passive_loss - s.passive_loss, d.passive_loss_rate * t);

    const AmplifierState pl = inject_drift(s, FaultMode::PumpLaser, t, d);
    EXPECT_EQ(pl.pd_bias, 0.0);
    EXPECT_EQ(pl.voa_error, 0.0);
    EXPECT_EQ(pl.passive_loss, s.passive_loss);
}

TEST(Simulate, UntargetedChannelsMatchHealthyBaseline) {
    const SimConfig base;
    for (FaultMode mode : kAllModes) {
        const SimConfig cfg = config_for(mode);
        const Trajectory traj = simulate_trajectory(cfg, 1234);
        const SimulationRun healthy = simulate_healthy(cfg, 1234, traj.length());
        const auto moved = targeted(mode);
        const double n = static_cast<double>(traj.length());
        for (Index c = 0; c < kChannelCount; ++c) {
            if (std::find(moved.begin(), moved.end(), c) != moved.end()) continue;
            const double dev = (traj.channels.col(c) - healthy.trajectory.channels.col(c)).mean();
            const double tol = 4.0 * base.noise_std[static_cast<std::size_t>(c)] / std::sqrt(n);
            EXPECT_LE(std::abs(dev), tol) << mode_tag(mode) << " channel " << channel_names()[c];
        }
        // The targeted pump current does move.
        const Index c = moved[0];
        const double shift = traj.channels(traj.length() - 1, c) - healthy.trajectory.channels(traj.length() - 1, c);
        EXPECT_GT(std::abs(shift), 10.0) << mode_tag(mode);
    }
}

TEST(Simulate, Deterministic) {
    for (FaultMode mode : kAllModes) {
        const SimConfig cfg = config_for(mode);
        const Trajectory a = simulate_trajectory(cfg, 99);
        const Trajectory b = simulate_trajectory(cfg, 99);
        const Trajectory c = simulate_trajectory(cfg, 100);
        EXPECT_TRUE(a.channels == b.channels);
        EXPECT_EQ(a.failure_index, b.failure_index);
        EXPECT_FALSE(c.channels.rows() == a.channels.rows() && c.channels == a.channels);
    }
}

TEST(Simulate, PumpFailureIndexRange) {
    const SimConfig cfg = config_for(FaultMode::PumpLaser);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Trajectory t = simulate_trajectory(cfg, derive_seed(5, "pl", seed));
        EXPECT_GE(t.failure_index, 300);
        EXPECT_LE(t.failure_index, 500);
    }
}

TEST(Simulate, FasterDriftShortensRuns) {
    for (FaultMode mode : kAllModes) {
        SimConfig slow = config_for(mode);
        SimConfig fast = slow;
        fast.drift_scale = 2.0;
        fast.min_length = 2;
        double slow_total = 0, fast_total = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            slow_total += static_cast<double>(simulate_trajectory(slow, seed).length());
            fast_total += static_cast<double>(simulate_trajectory(fast, seed).length());
        }
        EXPECT_LT(fast_total, slow_total) << mode_tag(mode);
    }
}

TEST(Simulate, SingleCrossingAtFinalIndexAndMonotoneDrift) {
    for (FaultMode mode : kAllModes) {
        const SimConfig cfg = config_for(mode);
        const double limit = failure_limit(cfg.thresholds, mode);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const SimulationRun run = simulate_run(cfg, seed);
            const auto& st = run.states;
            ASSERT_EQ(static_cast<Index>(st.size()), run.trajectory.length());
            EXPECT_EQ(run.trajectory.failure_index, run.trajectory.length() - 1);
            EXPECT_GE(run.trajectory.length(), cfg.min_length);
            for (std::size_t i = 0; i + 1 < st.size(); ++i) {
                ASSERT_LT(degradation_metric(st[i], mode), limit);
            }
            EXPECT_GE(degradation_metric(st.back(), mode), limit);
            for (std::size_t i = 1; i < st.size(); ++i) {
                switch (mode) {
                    case FaultMode::PumpLaser:
                        ASSERT_LT(st[i].pump_efficiency[0], st[i - 1].pump_efficiency[0]);
                        break;
                    case FaultMode::PowerDetector: ASSERT_GT(st[i].pd_bias, st[i - 1].pd_bias); break;
                    case FaultMode::Voa: ASSERT_GT(st[i].voa_error, st[i - 1].voa_error); break;
                    case FaultMode::PassiveComponents:
                        ASSERT_GT(st[i].passive_loss, st[i - 1].passive_loss);
                        break;
                }
            }
            validate_trajectory(run.trajectory);
            EXPECT_EQ(run.trajectory.channel_count(), 9);
        }
    }
}

TEST(Simulate, UnreachableThresholdIsConfigError) {
    SimConfig cfg = config_for(FaultMode::Voa);
    cfg.max_steps = 100;
    try {
        simulate_trajectory(cfg, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Config);
    }
    cfg = config_for(FaultMode::PumpLaser);
    cfg.thresholds.pump_current_limit_ma = 600.0;
    EXPECT_THROW(validate_sim_config(cfg), Error);
}

TEST(Simulate, DriftDrawsWithinBounds) {
    const SimConfig cfg;
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const DriftParams d = sample_drift(cfg, rng);
        EXPECT_GE(d.pump_tau, cfg.pump_tau.lo);
        EXPECT_LE(d.pump_tau, cfg.pump_tau.hi);
        EXPECT_GE(d.pd_bias_rate, cfg.pd_bias_rate.lo);
        EXPECT_LE(d.pd_bias_rate, cfg.pd_bias_rate.hi);
        EXPECT_GE(d.voa_drift_rate, cfg.voa_drift_rate.lo);
        EXPECT_LE(d.voa_drift_rate, cfg.voa_drift_rate.hi);
        EXPECT_GE(d.passive_loss_rate, cfg.passive_loss_rate.lo);
        EXPECT_LE(d.passive_loss_rate, cfg.passive_loss_rate.hi);
    }
}

TEST(Measure, NoiseFreeAndNoisy) {
    const SimConfig cfg;
    const AmplifierState s = initial_state(cfg.amplifier);
    const RowVector clean = measure(s, cfg, nullptr);
    EXPECT_EQ(clean[kPump1Power], s.pump_current[0] * s.pump_efficiency[0]);
    EXPECT_EQ(clean[kOutputPower], s.output_power);
    Rng rng(1);
    const int n = 4000;
    RowVector sum = RowVector::Zero(kChannelCount), sq = RowVector::Zero(kChannelCount);
    for (int i = 0; i < n; ++i) {
        const RowVector d = measure(s, cfg, &rng) - clean;
        sum += d;
        sq += d.cwiseProduct(d);
    }
    for (Index c = 0; c < kChannelCount; ++c) {
        const double sd = std::sqrt(sq[c] / n);
        EXPECT_NEAR(sd / cfg.noise_std[static_cast<std::size_t>(c)], 1.0, 0.06);
    }
}
