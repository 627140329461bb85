#pragma once

#include "slat/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slat {

enum class FaultMode { PumpLaser, PowerDetector, Voa, PassiveComponents };

inline constexpr std::array<FaultMode, 4> kAllModes = {
    FaultMode::PumpLaser, FaultMode::PowerDetector, FaultMode::Voa,
    FaultMode::PassiveComponents};

/// Short tag used in file names and report rows: PL, PD, VOA, PC.
std::string_view mode_tag(FaultMode mode);
std::optional<FaultMode> parse_mode(std::string_view tag);

/// One run-to-failure multivariate series. Rows are time steps, columns are
/// sensor channels. The run ends at the failure step.
struct Trajectory {
    std::string id;
    FaultMode mode = FaultMode::PumpLaser;
    Matrix channels;  // T x S
    Index failure_index = 0;

    Index length() const { return channels.rows(); }
    Index channel_count() const { return channels.cols(); }
};

/// Throws InvalidInput unless T >= 2, S >= 1, failure_index == T - 1 and
/// every value is finite.
void validate_trajectory(const Trajectory& traj);

struct Window {
    Index start = 0;
    Index end = 0;  // exclusive

    bool operator==(const Window&) const = default;
};

struct LabelConfig {
    double rul_cap = 125.0;
};

struct PipelineConfig {
    Index n_stw = 30;
    Index stride = 1;
    LabelConfig labels;
};

void validate_pipeline(const PipelineConfig& cfg);

/// Z-score statistics fitted on training data only. Standard deviations use
/// the population convention; degenerate (constant) entries are stored as 1.
struct NormStats {
    Vector channel_mean;
    Vector channel_std;
    Vector descriptor_mean;
    Vector descriptor_std;

    Matrix normalize_channels(const Matrix& raw) const;
    Matrix denormalize_channels(const Matrix& normalized) const;
    Vector normalize_descriptors(const Vector& raw) const;
    Vector denormalize_descriptors(const Vector& normalized) const;
};

struct WindowSample {
    std::string trajectory_id;
    FaultMode mode = FaultMode::PumpLaser;
    Index end_index = 0;  // last time step covered by the window
    Matrix values;        // n_stw x S, normalized
    Vector descriptors;   // 2*S: means then slopes, normalized
    double rul_target = 0.0;
};

std::vector<Window> slide_windows(Index length, Index n_stw, Index stride);
std::vector<Window> slide_windows(const Trajectory& traj, Index n_stw, Index stride);

/// Per-channel mean followed by per-channel least-squares slope against the
/// time index 0..n-1.
Vector compute_descriptors(const Matrix& window_values);

/// Piecewise-linear target min(cap, failure_index - t).
Vector label_rul(const Trajectory& traj, const LabelConfig& cfg);

NormStats fit_norm_stats(std::span<const Trajectory> train_trajs, Index n_stw, Index stride);

std::vector<WindowSample> build_dataset(std::span<const Trajectory> trajs,
                                        const PipelineConfig& cfg,
                                        const NormStats& stats);

/// Builds the sample for the window ending at `end_index` (inclusive).
WindowSample make_sample(const Trajectory& traj, Index end_index, const PipelineConfig& cfg,
                         const NormStats& stats);

}  // namespace slat
