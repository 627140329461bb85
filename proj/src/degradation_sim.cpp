#include "slat/degradation_sim.hpp"

#include <algorithm>

namespace slat {

namespace {

// Controller gain is expressed in mA per dB of error at the nominal plant.
double plant_gain(double gain_per_mw, const AmplifierModel& model) {
    return gain_per_mw * model.pump_efficiency;
}

void require_bounds(const DriftBounds& b, const char* name) {
    require(b.lo > 0.0 && b.hi >= b.lo && std::isfinite(b.hi), ErrorCode::Config,
            std::string(name) + " bounds must satisfy 0 < lo <= hi");
}

SimulationRun run(const SimConfig& cfg, std::uint64_t trajectory_seed, bool degrade,
                  Index fixed_steps) {
    validate_sim_config(cfg);
    Rng rng(trajectory_seed);
    const AmplifierModel& model = cfg.amplifier;

    SimulationRun out;
    out.drift = sample_drift(cfg, rng);
    std::array<double, 2> efficiency{};
    for (auto& e : efficiency) {
        e = model.pump_efficiency *
            (1.0 + rng.uniform(-model.efficiency_spread, model.efficiency_spread));
    }
    AmplifierState state = initial_state(model, efficiency);
    const double limit = failure_limit(cfg.thresholds, cfg.mode);

    std::vector<RowVector> rows;
    const Index steps = degrade ? cfg.max_steps : fixed_steps;
    bool failed = false;
    for (Index step = 0; step < steps; ++step) {
        const double t = static_cast<double>(step) * cfg.step_period;
        if (degrade) state = inject_drift(state, cfg.mode, t, out.drift);
        for (Index k = 0; k < model.agc_iterations; ++k) {
            state = agc_step(state, model, model.target_gain_db);
        }
        rows.push_back(measure(state, cfg, &rng));
        out.states.push_back(state);
        if (degrade && degradation_metric(state, cfg.mode) >= limit) {
            failed = true;
            break;
        }
    }
    if (degrade) {
        require(failed, ErrorCode::Config,
                std::string(mode_tag(cfg.mode)) + " threshold not reached within " +
                    std::to_string(cfg.max_steps) + " steps");
        require(static_cast<Index>(rows.size()) >= cfg.min_length, ErrorCode::Config,
                std::string(mode_tag(cfg.mode)) + " trajectory failed after " +
                    std::to_string(rows.size()) + " steps, below min_length " +
                    std::to_string(cfg.min_length));
    }

    Trajectory& traj = out.trajectory;
    traj.mode = cfg.mode;
    traj.channels.resize(static_cast<Index>(rows.size()), kChannelCount);
    for (std::size_t i = 0; i < rows.size(); ++i) traj.channels.row(static_cast<Index>(i)) = rows[i];
    traj.failure_index = traj.length() - 1;
    return out;
}

}  // namespace

std::array<std::string_view, kChannelCount> channel_names() {
    return {"pump1_current_ma", "pump2_current_ma", "pump1_power_mw", "pump2_power_mw",
            "input_power_dbm",  "interstage_power_dbm", "output_power_dbm", "voa_setting_db",
            "case_temperature_c"};
}

void refresh_readings(AmplifierState& s, const AmplifierModel& model) {
    const double g1 = model.stage1_gain_per_mw * s.pump_efficiency[0] * s.pump_current[0];
    const double g2 = model.stage2_gain_per_mw * s.pump_efficiency[1] * s.pump_current[1];
    s.input_power = model.input_power_dbm;
    s.interstage_power = s.input_power + g1 - s.passive_loss;
    const double true_output = s.interstage_power + g2 - (s.voa_setting + s.voa_error);
    s.output_power = true_output - s.pd_bias;
}

AmplifierState initial_state(const AmplifierModel& model, std::array<double, 2> efficiency) {
    AmplifierState s;
    for (std::size_t i = 0; i < 2; ++i) {
        const double e = efficiency[i] > 0.0 ? efficiency[i] : model.pump_efficiency;
        s.pump_efficiency[i] = e;
        s.initial_efficiency[i] = e;
    }
    s.voa_setting = model.voa_setting_db;
    s.passive_loss = model.passive_loss_db;
    s.initial_passive_loss = model.passive_loss_db;
    s.case_temperature = model.case_temperature_c;
    s.target_gain = model.target_gain_db;
    const double g1 = model.stage1_target_db + model.passive_loss_db;
    const double g2 = model.target_gain_db - model.stage1_target_db + model.voa_setting_db;
    s.pump_current[0] = g1 / (model.stage1_gain_per_mw * s.pump_efficiency[0]);
    s.pump_current[1] = g2 / (model.stage2_gain_per_mw * s.pump_efficiency[1]);
    refresh_readings(s, model);
    return s;
}

AmplifierState agc_step(const AmplifierState& state, const AmplifierModel& model,
                        double target_gain) {
    AmplifierState s = state;
    s.target_gain = target_gain;
    const std::array<double, 2> error = {model.stage1_target_db - s.reported_stage1_gain(),
                                         target_gain - s.reported_gain()};
    const std::array<double, 2> plant = {plant_gain(model.stage1_gain_per_mw, model),
                                         plant_gain(model.stage2_gain_per_mw, model)};
    for (std::size_t i = 0; i < 2; ++i) {
        const double delta_db =
            model.kp * (error[i] - s.previous_error[i]) + model.ki * error[i];
        s.pump_current[i] =
            std::clamp(s.pump_current[i] + delta_db / plant[i], 0.0, model.max_current_ma);
        s.previous_error[i] = error[i];
    }
    refresh_readings(s, model);
    return s;
}

AmplifierState inject_drift(const AmplifierState& state, FaultMode mode, double t,
                            const DriftParams& drift) {
    AmplifierState s = state;
    switch (mode) {
        case FaultMode::PumpLaser:
            s.pump_efficiency[0] = s.initial_efficiency[0] * std::exp(-t / drift.pump_tau);
            break;
        case FaultMode::PowerDetector:
            s.pd_bias = drift.pd_bias_rate * t;
            break;
        case FaultMode::Voa:
            s.voa_error = drift.voa_drift_rate * t;
            break;
        case FaultMode::PassiveComponents:
            s.passive_loss = s.initial_passive_loss + drift.passive_loss_rate * t;
            break;
    }
    // Readings are refreshed by the next controller update; currents are
    // untouched here so the loop has to react.
    return s;
}

void validate_sim_config(const SimConfig& cfg) {
    const AmplifierModel& m = cfg.amplifier;
    require(cfg.step_period > 0.0, ErrorCode::Config, "step_period must be > 0");
    require(cfg.drift_scale > 0.0, ErrorCode::Config, "drift_scale must be > 0");
    require(cfg.max_steps >= 2 && cfg.min_length >= 2, ErrorCode::Config,
            "max_steps and min_length must be >= 2");
    require(m.pump_efficiency > 0.0 && m.stage1_gain_per_mw > 0.0 && m.stage2_gain_per_mw > 0.0,
            ErrorCode::Config, "plant constants must be positive");
    require(m.efficiency_spread >= 0.0 && m.efficiency_spread < 1.0, ErrorCode::Config,
            "efficiency_spread must lie in [0, 1)");
    require(m.agc_iterations >= 1, ErrorCode::Config, "agc_iterations must be >= 1");
    for (double s : cfg.noise_std) {
        require(s >= 0.0 && std::isfinite(s), ErrorCode::Config, "noise std must be >= 0");
    }
    require_bounds(cfg.pump_tau, "pump_tau");
    require_bounds(cfg.pd_bias_rate, "pd_bias_rate");
    require_bounds(cfg.voa_drift_rate, "voa_drift_rate");
    require_bounds(cfg.passive_loss_rate, "passive_loss_rate");

    // Longest possible time to failure under the slowest drift draw.
    const double horizon = static_cast<double>(cfg.max_steps - 1) * cfg.step_period;
    const FailureThresholds& th = cfg.thresholds;
    double worst = 0.0;
    switch (cfg.mode) {
        case FaultMode::PumpLaser: {
            const double weakest = m.pump_efficiency * (1.0 + m.efficiency_spread);
            const double start =
                (m.stage1_target_db + m.passive_loss_db) / (m.stage1_gain_per_mw * weakest);
            require(th.pump_current_limit_ma < m.max_current_ma, ErrorCode::Config,
                    "pump current limit must be below the current clamp");
            require(th.pump_current_limit_ma > start, ErrorCode::Config,
                    "pump current limit is below the initial operating current");
            worst = cfg.pump_tau.hi / cfg.drift_scale * std::log(th.pump_current_limit_ma / start);
            break;
        }
        case FaultMode::PowerDetector:
            require(th.pd_bias_limit_db > 0.0, ErrorCode::Config, "pd bias limit must be > 0");
            worst = th.pd_bias_limit_db / (cfg.pd_bias_rate.lo * cfg.drift_scale);
            break;
        case FaultMode::Voa:
            require(th.voa_error_limit_db > 0.0, ErrorCode::Config, "voa limit must be > 0");
            worst = th.voa_error_limit_db / (cfg.voa_drift_rate.lo * cfg.drift_scale);
            break;
        case FaultMode::PassiveComponents:
            require(th.passive_loss_limit_db > 0.0, ErrorCode::Config,
                    "passive loss limit must be > 0");
            worst = th.passive_loss_limit_db / (cfg.passive_loss_rate.lo * cfg.drift_scale);
            break;
    }
    require(worst < horizon, ErrorCode::Config,
            std::string(mode_tag(cfg.mode)) + " threshold unreachable within max_steps");
}

DriftParams sample_drift(const SimConfig& cfg, Rng& rng) {
    DriftParams d;
    // Draw all four so the noise stream does not depend on the mode.
    d.pump_tau = rng.log_uniform(cfg.pump_tau.lo, cfg.pump_tau.hi) / cfg.drift_scale;
    d.pd_bias_rate = rng.log_uniform(cfg.pd_bias_rate.lo, cfg.pd_bias_rate.hi) * cfg.drift_scale;
    d.voa_drift_rate =
        rng.log_uniform(cfg.voa_drift_rate.lo, cfg.voa_drift_rate.hi) * cfg.drift_scale;
    d.passive_loss_rate =
        rng.log_uniform(cfg.passive_loss_rate.lo, cfg.passive_loss_rate.hi) * cfg.drift_scale;
    return d;
}

double degradation_metric(const AmplifierState& s, FaultMode mode) {
    switch (mode) {
        case FaultMode::PumpLaser: return s.pump_current[0];
        case FaultMode::PowerDetector: return s.pd_bias;
        case FaultMode::Voa: return s.voa_error;
        case FaultMode::PassiveComponents: return s.passive_loss - s.initial_passive_loss;
    }
    return 0.0;
}

double failure_limit(const FailureThresholds& th, FaultMode mode) {
    switch (mode) {
        case FaultMode::PumpLaser: return th.pump_current_limit_ma;
        case FaultMode::PowerDetector: return th.pd_bias_limit_db;
        case FaultMode::Voa: return th.voa_error_limit_db;
        case FaultMode::PassiveComponents: return th.passive_loss_limit_db;
    }
    return 0.0;
}

RowVector measure(const AmplifierState& s, const SimConfig& cfg, Rng* noise_rng) {
    RowVector row(kChannelCount);
    row[kPump1Current] = s.pump_current[0];
    row[kPump2Current] = s.pump_current[1];
    row[kPump1Power] = s.pump_current[0] * s.pump_efficiency[0];
    row[kPump2Power] = s.pump_current[1] * s.pump_efficiency[1];
    row[kInputPower] = s.input_power;
    row[kInterstagePower] = s.interstage_power;
    row[kOutputPower] = s.output_power;
    row[kVoaSetting] = s.voa_setting;
    row[kCaseTemperature] = s.case_temperature;
    if (noise_rng != nullptr) {
        for (Index c = 0; c < kChannelCount; ++c) {
            row[c] += cfg.noise_std[static_cast<std::size_t>(c)] * noise_rng->normal();
        }
    }
    return row;
}

SimulationRun simulate_run(const SimConfig& cfg, std::uint64_t trajectory_seed) {
    return run(cfg, trajectory_seed, true, 0);
}

SimulationRun simulate_healthy(const SimConfig& cfg, std::uint64_t trajectory_seed, Index steps) {
    require(steps >= 1, ErrorCode::InvalidArgument, "healthy run needs at least one step");
    return run(cfg, trajectory_seed, false, steps);
}

Trajectory simulate_trajectory(const SimConfig& cfg, std::uint64_t trajectory_seed) {
    return simulate_run(cfg, trajectory_seed).trajectory;
}

}  // namespace slat
