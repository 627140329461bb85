#pragma once

#include "slat/windowing.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace slat {

/// Recorded CBM channels, in column order.
enum Channel : Index {
    kPump1Current = 0,  // mA
    kPump2Current,      // mA
    kPump1Power,        // mW, current x efficiency
    kPump2Power,        // mW
    kInputPower,        // dBm, as reported
    kInterstagePower,   // dBm
    kOutputPower,       // dBm
    kVoaSetting,        // dB, commanded
    kCaseTemperature,   // degC
    kChannelCount,
};

std::array<std::string_view, kChannelCount> channel_names();

/// Plant constants and nominal operating point of the two-stage amplifier.
/// Stage gain in dB is linear in pump power: G = k * efficiency * current.
struct AmplifierModel {
    double input_power_dbm = -10.0;
    double stage1_gain_per_mw = 0.14;
    double stage2_gain_per_mw = 0.12;
    double pump_efficiency = 0.5;  // mW/mA, nominal
    double efficiency_spread = 0.05;  // per-device relative spread (uniform +/-)
    double stage1_target_db = 13.0;   // interstage gain held by the first loop
    double target_gain_db = 20.0;     // total gain held by the second loop
    double voa_setting_db = 5.0;
    double passive_loss_db = 1.0;
    double max_current_ma = 500.0;
    double case_temperature_c = 45.0;
    double kp = 0.2;  // PI gains, dimensionless (scaled by the nominal plant gain)
    double ki = 0.7;
    Index agc_iterations = 10;  // controller updates per recorded step
};

struct AmplifierState {
    std::array<double, 2> pump_current{};        // mA
    std::array<double, 2> pump_efficiency{};     // mW/mA, current value
    std::array<double, 2> initial_efficiency{};  // mW/mA, device value at t = 0
    // PD readings as reported (the output PD includes its sensitivity bias).
    double input_power = 0.0;
    double interstage_power = 0.0;
    double output_power = 0.0;
    double voa_setting = 0.0;  // commanded
    double voa_error = 0.0;    // actual minus commanded
    double passive_loss = 0.0;
    double initial_passive_loss = 0.0;
    double pd_bias = 0.0;  // dB the output PD under-reports
    double case_temperature = 0.0;
    double target_gain = 0.0;
    std::array<double, 2> previous_error{};

    double reported_stage1_gain() const { return interstage_power - input_power; }
    double reported_gain() const { return output_power - input_power; }
};

/// Recomputes the PD readings from currents, efficiencies and losses.
void refresh_readings(AmplifierState& state, const AmplifierModel& model);

/// Device at t = 0 with pumps at the steady-state operating point.
AmplifierState initial_state(const AmplifierModel& model,
                             std::array<double, 2> efficiency = {0.0, 0.0});

/// One velocity-form PI update of both pump currents; the first loop holds
/// the interstage gain, the second the total gain `target_gain`. Currents
/// are clamped to [0, max_current].
AmplifierState agc_step(const AmplifierState& state, const AmplifierModel& model,
                        double target_gain);

struct DriftParams {
    double pump_tau = 500.0;           // PL: efficiency e-folding time
    double pd_bias_rate = 0.00375;     // PD: dB per unit time
    double voa_drift_rate = 0.005;     // VOA: dB per unit time
    double passive_loss_rate = 0.0075; // PC: dB per unit time
};

/// Sets the selected mode's degradation parameter for time t; every other
/// parameter is left untouched.
AmplifierState inject_drift(const AmplifierState& state, FaultMode mode, double t,
                            const DriftParams& drift);

struct DriftBounds {
    double lo = 0.0;
    double hi = 0.0;
};

struct FailureThresholds {
    double pump_current_limit_ma = 450.0;
    double pd_bias_limit_db = 1.5;
    double voa_error_limit_db = 2.0;
    double passive_loss_limit_db = 3.0;  // growth over the initial loss
};

struct SimConfig {
    FaultMode mode = FaultMode::PumpLaser;
    std::uint64_t seed = 7;
    double step_period = 1.0;
    AmplifierModel amplifier;
    DriftBounds pump_tau{420.0, 580.0};
    DriftBounds pd_bias_rate{0.0031, 0.0045};
    DriftBounds voa_drift_rate{0.0042, 0.006};
    DriftBounds passive_loss_rate{0.0062, 0.009};
    double drift_scale = 1.0;  // multiplies every drift speed
    std::array<double, kChannelCount> noise_std = {0.5, 0.5, 0.25, 0.25, 0.01,
                                                   0.01, 0.01, 0.01, 0.1};
    FailureThresholds thresholds;
    Index n_trajectories = 10;
    Index max_steps = 5000;
    Index min_length = 60;
};

/// Throws Config when a threshold cannot be reached within max_steps under
/// the slowest allowed drift, or when any quantity is out of range.
void validate_sim_config(const SimConfig& cfg);

/// Draws the per-trajectory drift speeds log-uniformly inside the bounds.
DriftParams sample_drift(const SimConfig& cfg, Rng& rng);

/// The value compared against the mode's failure threshold.
double degradation_metric(const AmplifierState& state, FaultMode mode);
double failure_limit(const FailureThresholds& thresholds, FaultMode mode);

/// One row of recorded channels with additive Gaussian measurement noise.
RowVector measure(const AmplifierState& state, const SimConfig& cfg, Rng* noise_rng);

struct SimulationRun {
    Trajectory trajectory;
    DriftParams drift;
    std::vector<AmplifierState> states;  // noise-free state per step
};

/// Runs inject_drift -> agc_step -> measure until the failure threshold is
/// crossed. Identical (cfg, seed) yield bit-identical output.
SimulationRun simulate_run(const SimConfig& cfg, std::uint64_t trajectory_seed);

/// Same device, drift draw and noise stream as `simulate_run`, but with the
/// degradation switched off, for `steps` steps.
SimulationRun simulate_healthy(const SimConfig& cfg, std::uint64_t trajectory_seed, Index steps);

Trajectory simulate_trajectory(const SimConfig& cfg, std::uint64_t trajectory_seed);

}  // namespace slat
