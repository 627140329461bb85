#include "slat/evaluation.hpp"

#include "slat/training.hpp"

#include <cstdio>
#include <sstream>

namespace slat {

EvalReport aggregate_report(const std::map<FaultMode, ModeResult>& modes) {
    EvalReport report;
    report.modes = modes;
    double total = 0.0;
    for (FaultMode mode : kAllModes) {
        auto it = modes.find(mode);
        if (it == modes.end()) {
            report.warnings.push_back("mode " + std::string(mode_tag(mode)) +
                                      " absent from test set; excluded from average");
            continue;
        }
        require(it->second.rmse >= 0.0 && std::isfinite(it->second.rmse), ErrorCode::InvalidInput,
                "mode RMSE must be finite and non-negative");
        total += it->second.rmse;
    }
    report.average = modes.empty() ? 0.0 : total / static_cast<double>(modes.size());
    return report;
}

std::string EvalReport::to_table(const std::string& label) const {
    std::ostringstream out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-12s %12s %9s\n", "Subdataset", label.c_str(), "Windows");
    out << line;
    Index windows = 0;
    for (FaultMode mode : kAllModes) {
        auto it = modes.find(mode);
        if (it == modes.end()) {
            std::snprintf(line, sizeof(line), "%-12s %12s %9s\n",
                          std::string(mode_tag(mode)).c_str(), "-", "0");
        } else {
            std::snprintf(line, sizeof(line), "%-12s %12.4f %9lld\n",
                          std::string(mode_tag(mode)).c_str(), it->second.rmse,
                          static_cast<long long>(it->second.windows));
            windows += it->second.windows;
        }
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-12s %12.4f %9lld\n", "Average", average,
                  static_cast<long long>(windows));
    out << line;
    for (const auto& w : warnings) out << "note: " << w << "\n";
    return out.str();
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json mode_json = nlohmann::ordered_json::object();
    for (FaultMode mode : kAllModes) {
        auto it = modes.find(mode);
        if (it == modes.end()) continue;
        mode_json[std::string(mode_tag(mode))] = {{"rmse", it->second.rmse},
                                                  {"windows", it->second.windows}};
    }
    j["modes"] = mode_json;
    j["average"] = average;
    j["warnings"] = warnings;
    return j;
}

EvalReport evaluate(const Predictor& predict, std::span<const WindowSample> test_set) {
    std::map<FaultMode, std::pair<std::vector<double>, std::vector<double>>> per_mode;
    for (const auto& s : test_set) {
        auto& [preds, targets] = per_mode[s.mode];
        preds.push_back(predict(s));
        targets.push_back(s.rul_target);
    }
    std::map<FaultMode, ModeResult> modes;
    for (const auto& [mode, pt] : per_mode) {
        modes[mode] = {rmse(pt.first, pt.second), static_cast<Index>(pt.first.size())};
    }
    return aggregate_report(modes);
}

EvalReport evaluate(const SlatModel& model, std::span<const WindowSample> test_set) {
    return evaluate([&](const WindowSample& s) { return model.predict_rul(s); }, test_set);
}

RtfSeries rtf_series(const Predictor& predict, const Trajectory& traj, const PipelineConfig& cfg,
                     const NormStats& stats) {
    validate_trajectory(traj);
    require(traj.length() >= cfg.n_stw, ErrorCode::EmptyTrajectory,
            "trajectory '" + traj.id + "' has " + std::to_string(traj.length()) +
                " steps, shorter than the window length " + std::to_string(cfg.n_stw));
    RtfSeries series;
    series.trajectory_id = traj.id;
    const Vector labels = label_rul(traj, cfg.labels);
    for (const auto& w : slide_windows(traj, cfg.n_stw, 1)) {
        const Index t = w.end - 1;
        const WindowSample sample = make_sample(traj, t, cfg, stats);
        series.rows.push_back({t, labels[t], predict(sample)});
    }
    return series;
}

RtfSeries rtf_series(const SlatModel& model, const Trajectory& traj, const PipelineConfig& cfg,
                     const NormStats& stats) {
    return rtf_series([&](const WindowSample& s) { return model.predict_rul(s); }, traj, cfg,
                      stats);
}

std::string rtf_csv(const RtfSeries& series) {
    std::string out = "t,true_rul,pred_rul\n";
    for (const auto& r : series.rows) {
        out += std::to_string(r.t);
        out += ',';
        out += format_double(r.true_rul);
        out += ',';
        out += format_double(r.pred_rul);
        out += '\n';
    }
    return out;
}

std::string_view baseline_name(BaselineKind kind) {
    return kind == BaselineKind::ConstantMean ? "constant-mean" : "linear-window";
}

std::optional<BaselineKind> parse_baseline(std::string_view name) {
    if (name == "constant-mean") return BaselineKind::ConstantMean;
    if (name == "linear-window") return BaselineKind::LinearWindow;
    return std::nullopt;
}

Vector Baseline::features(const WindowSample& sample) {
    const Index n = sample.values.rows();
    const Index s = sample.values.cols();
    Vector f(n * s + sample.descriptors.size());
    for (Index t = 0; t < n; ++t) f.segment(t * s, s) = sample.values.row(t).transpose();
    f.tail(sample.descriptors.size()) = sample.descriptors;
    return f;
}

Baseline Baseline::fit(BaselineKind kind, std::span<const WindowSample> train_set) {
    require(!train_set.empty(), ErrorCode::InvalidArgument, "baseline needs training windows");
    Baseline b;
    b.kind_ = kind;
    for (const auto& s : train_set) b.fitted_ids_.insert(s.trajectory_id);

    double sum = 0.0;
    for (const auto& s : train_set) sum += s.rul_target;
    b.mean_ = sum / static_cast<double>(train_set.size());
    if (kind == BaselineKind::ConstantMean) return b;

    const Index p = features(train_set.front()).size() + 1;
    Matrix xtx = Matrix::Zero(p, p);
    Vector xty = Vector::Zero(p);
    Vector row(p);
    for (const auto& s : train_set) {
        row[0] = 1.0;
        row.tail(p - 1) = features(s);
        xtx.selfadjointView<Eigen::Lower>().rankUpdate(row);
        xty += row * s.rul_target;
    }
    xtx = xtx.selfadjointView<Eigen::Lower>();

    Eigen::LDLT<Matrix> ldlt(xtx);
    const Vector pivots = ldlt.vectorD();
    const double max_pivot = pivots.cwiseAbs().maxCoeff();
    const bool singular = ldlt.info() != Eigen::Success || !(max_pivot > 0.0) ||
                          pivots.minCoeff() <= 1e-12 * max_pivot;
    if (singular) {
        xtx.diagonal().array() += kRidge;
        ldlt.compute(xtx);
        b.used_ridge_ = true;
    }
    b.coef_ = ldlt.solve(xty);
    require(b.coef_.allFinite(), ErrorCode::NonFinite, "linear baseline solve failed");
    return b;
}

double Baseline::predict(const WindowSample& sample) const {
    if (kind_ == BaselineKind::ConstantMean) return mean_;
    const Vector f = features(sample);
    require(f.size() + 1 == coef_.size(), ErrorCode::InvalidArgument,
            "sample shape differs from the fitted baseline");
    return coef_[0] + coef_.tail(f.size()).dot(f);
}

EvalReport evaluate_baseline(const Baseline& baseline, std::span<const WindowSample> test_set) {
    for (const auto& s : test_set) {
        require(!baseline.fitted_trajectories().contains(s.trajectory_id),
                ErrorCode::InvalidArgument,
                "baseline was fitted on trajectory '" + s.trajectory_id + "'");
    }
    EvalReport report =
        evaluate([&](const WindowSample& s) { return baseline.predict(s); }, test_set);
    if (baseline.used_ridge()) {
        report.warnings.push_back("normal equations singular; ridge fallback lambda=1e-6 used");
    }
    return report;
}

}  // namespace slat
