#pragma once

#include "slat/model.hpp"
#include "slat/windowing.hpp"

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace slat {

struct ModeResult {
    double rmse = 0.0;
    Index windows = 0;
};

/// Per-mode RMSE plus the unweighted mean over the modes that are present.
struct EvalReport {
    std::map<FaultMode, ModeResult> modes;
    double average = 0.0;
    std::vector<std::string> warnings;

    /// Aligned rows PL, PD, VOA, PC, Average.
    std::string to_table(const std::string& label = "SLAT") const;
    nlohmann::ordered_json to_json() const;
};

/// Builds a report from per-mode results. Absent modes get a warning and
/// are left out of the average.
EvalReport aggregate_report(const std::map<FaultMode, ModeResult>& modes);

using Predictor = std::function<double(const WindowSample&)>;

EvalReport evaluate(const Predictor& predict, std::span<const WindowSample> test_set);
EvalReport evaluate(const SlatModel& model, std::span<const WindowSample> test_set);

struct RtfRow {
    Index t = 0;
    double true_rul = 0.0;
    double pred_rul = 0.0;
};

struct RtfSeries {
    std::string trajectory_id;
    std::vector<RtfRow> rows;
};

/// Stride-1 sweep from the first full window to the failure step. Throws
/// EmptyTrajectory when the trajectory is shorter than one window.
RtfSeries rtf_series(const Predictor& predict, const Trajectory& traj, const PipelineConfig& cfg,
                     const NormStats& stats);
RtfSeries rtf_series(const SlatModel& model, const Trajectory& traj, const PipelineConfig& cfg,
                     const NormStats& stats);

/// t,true_rul,pred_rul with LF line endings.
std::string rtf_csv(const RtfSeries& series);

enum class BaselineKind { ConstantMean, LinearWindow };

std::string_view baseline_name(BaselineKind kind);
std::optional<BaselineKind> parse_baseline(std::string_view name);

/// Trivial statistical reference predictors fitted on training windows.
class Baseline {
public:
    static Baseline fit(BaselineKind kind, std::span<const WindowSample> train_set);

    BaselineKind kind() const { return kind_; }
    double predict(const WindowSample& sample) const;

    /// True when the normal equations were singular and the ridge term was
    /// added.
    bool used_ridge() const { return used_ridge_; }
    const std::set<std::string>& fitted_trajectories() const { return fitted_ids_; }

    /// Feature row: flattened window (row-major) followed by descriptors.
    static Vector features(const WindowSample& sample);

    static constexpr double kRidge = 1e-6;

private:
    BaselineKind kind_ = BaselineKind::ConstantMean;
    double mean_ = 0.0;
    Vector coef_;  // intercept first
    bool used_ridge_ = false;
    std::set<std::string> fitted_ids_;
};

/// Evaluates a baseline, refusing samples from trajectories it was fitted on.
EvalReport evaluate_baseline(const Baseline& baseline, std::span<const WindowSample> test_set);

}  // namespace slat
