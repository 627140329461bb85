#include "slat/windowing.hpp"

namespace slat {

namespace {

constexpr std::array<std::string_view, 4> kModeTags = {"PL", "PD", "VOA", "PC"};

Vector guarded_std(const Vector& sum_sq_dev, double count) {
    Vector std = (sum_sq_dev / count).cwiseSqrt();
    for (Index i = 0; i < std.size(); ++i) {
        if (!(std[i] > 0.0)) std[i] = 1.0;
    }
    return std;
}

}  // namespace

std::string_view mode_tag(FaultMode mode) { return kModeTags[static_cast<std::size_t>(mode)]; }

std::optional<FaultMode> parse_mode(std::string_view tag) {
    for (std::size_t i = 0; i < kModeTags.size(); ++i) {
        if (kModeTags[i] == tag) return kAllModes[i];
    }
    return std::nullopt;
}

void validate_trajectory(const Trajectory& traj) {
    require(traj.length() >= 2, ErrorCode::InvalidInput,
            "trajectory '" + traj.id + "' needs at least 2 steps");
    require(traj.channel_count() >= 1, ErrorCode::InvalidInput,
            "trajectory '" + traj.id + "' has no channels");
    require(traj.failure_index == traj.length() - 1, ErrorCode::InvalidInput,
            "trajectory '" + traj.id + "' must end at its failure index");
    require(all_finite(traj.channels), ErrorCode::InvalidInput,
            "trajectory '" + traj.id + "' contains non-finite values");
}

void validate_pipeline(const PipelineConfig& cfg) {
    require(cfg.n_stw >= 2, ErrorCode::InvalidArgument, "window length must be >= 2");
    require(cfg.stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
    require(std::isfinite(cfg.labels.rul_cap) && cfg.labels.rul_cap > 0.0,
            ErrorCode::InvalidArgument, "rul_cap must be finite and positive");
}

Matrix NormStats::normalize_channels(const Matrix& raw) const {
    require(raw.cols() == channel_mean.size(), ErrorCode::InvalidArgument,
            "channel count does not match normalization stats");
    return (raw.rowwise() - channel_mean.transpose()).array().rowwise() /
           channel_std.transpose().array();
}

Matrix NormStats::denormalize_channels(const Matrix& normalized) const {
    require(normalized.cols() == channel_mean.size(), ErrorCode::InvalidArgument,
            "channel count does not match normalization stats");
    Matrix scaled = normalized.array().rowwise() * channel_std.transpose().array();
    return scaled.rowwise() + channel_mean.transpose();
}

Vector NormStats::normalize_descriptors(const Vector& raw) const {
    require(raw.size() == descriptor_mean.size(), ErrorCode::InvalidArgument,
            "descriptor length does not match normalization stats");
    return (raw - descriptor_mean).cwiseQuotient(descriptor_std);
}

Vector NormStats::denormalize_descriptors(const Vector& normalized) const {
    require(normalized.size() == descriptor_mean.size(), ErrorCode::InvalidArgument,
            "descriptor length does not match normalization stats");
    return normalized.cwiseProduct(descriptor_std) + descriptor_mean;
}

std::vector<Window> slide_windows(Index length, Index n_stw, Index stride) {
    require(stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
    require(n_stw >= 2, ErrorCode::InvalidArgument, "window length must be >= 2");
    require(n_stw <= length, ErrorCode::EmptyTrajectory,
            "window length " + std::to_string(n_stw) + " exceeds trajectory length " +
                std::to_string(length));
    std::vector<Window> windows;
    windows.reserve(static_cast<std::size_t>((length - n_stw) / stride + 1));
    for (Index start = 0; start + n_stw <= length; start += stride) {
        windows.push_back({start, start + n_stw});
    }
    return windows;
}

std::vector<Window> slide_windows(const Trajectory& traj, Index n_stw, Index stride) {
    return slide_windows(traj.length(), n_stw, stride);
}

Vector compute_descriptors(const Matrix& window_values) {
    const Index n = window_values.rows();
    const Index channels = window_values.cols();
    require(n >= 2, ErrorCode::InvalidArgument, "descriptors need at least 2 steps");
    require(all_finite(window_values), ErrorCode::InvalidInput,
            "window contains non-finite values");

    const double dn = static_cast<double>(n);
    const double t_mean = (dn - 1.0) / 2.0;
    // sum over t of (t - t_mean)^2 for t = 0..n-1
    const double t_ss = dn * (dn * dn - 1.0) / 12.0;

    Vector out(2 * channels);
    for (Index c = 0; c < channels; ++c) {
        double mean = window_values.col(c).mean();
        double cross = 0.0;
        for (Index t = 0; t < n; ++t) {
            cross += (static_cast<double>(t) - t_mean) * (window_values(t, c) - mean);
        }
        out[c] = mean;
        out[channels + c] = cross / t_ss;
    }
    return out;
}

Vector label_rul(const Trajectory& traj, const LabelConfig& cfg) {
    require(traj.failure_index == traj.length() - 1, ErrorCode::InvalidInput,
            "trajectory '" + traj.id + "' must end at its failure index");
    Vector target(traj.length());
    for (Index t = 0; t < traj.length(); ++t) {
        target[t] = std::min(cfg.rul_cap, static_cast<double>(traj.failure_index - t));
    }
    return target;
}

NormStats fit_norm_stats(std::span<const Trajectory> train_trajs, Index n_stw, Index stride) {
    require(!train_trajs.empty(), ErrorCode::InvalidArgument,
            "normalization needs at least one training trajectory");
    const Index channels = train_trajs.front().channel_count();

    // Two-pass mean/variance over all training steps.
    Vector sum = Vector::Zero(channels);
    double steps = 0.0;
    for (const auto& traj : train_trajs) {
        validate_trajectory(traj);
        require(traj.channel_count() == channels, ErrorCode::InvalidInput,
                "trajectories disagree on channel count");
        sum += traj.channels.colwise().sum().transpose();
        steps += static_cast<double>(traj.length());
    }
    NormStats stats;
    stats.channel_mean = sum / steps;
    Vector ss = Vector::Zero(channels);
    for (const auto& traj : train_trajs) {
        ss += (traj.channels.rowwise() - stats.channel_mean.transpose())
                  .array()
                  .square()
                  .colwise()
                  .sum()
                  .matrix()
                  .transpose();
    }
    stats.channel_std = guarded_std(ss, steps);

    std::vector<Vector> descriptors;
    for (const auto& traj : train_trajs) {
        for (const auto& w : slide_windows(traj, n_stw, stride)) {
            descriptors.push_back(compute_descriptors(traj.channels.middleRows(w.start, n_stw)));
        }
    }
    Vector dsum = Vector::Zero(2 * channels);
    for (const auto& d : descriptors) dsum += d;
    const double count = static_cast<double>(descriptors.size());
    stats.descriptor_mean = dsum / count;
    Vector dss = Vector::Zero(2 * channels);
    for (const auto& d : descriptors) dss += (d - stats.descriptor_mean).array().square().matrix();
    stats.descriptor_std = guarded_std(dss, count);
    return stats;
}

WindowSample make_sample(const Trajectory& traj, Index end_index, const PipelineConfig& cfg,
                         const NormStats& stats) {
    const Index start = end_index + 1 - cfg.n_stw;
    require(start >= 0 && end_index < traj.length(), ErrorCode::InvalidArgument,
            "window end index out of range");
    const Matrix raw = traj.channels.middleRows(start, cfg.n_stw);
    WindowSample sample;
    sample.trajectory_id = traj.id;
    sample.mode = traj.mode;
    sample.end_index = end_index;
    sample.values = stats.normalize_channels(raw);
    sample.descriptors = stats.normalize_descriptors(compute_descriptors(raw));
    sample.rul_target =
        std::min(cfg.labels.rul_cap, static_cast<double>(traj.failure_index - end_index));
    return sample;
}

std::vector<WindowSample> build_dataset(std::span<const Trajectory> trajs,
                                        const PipelineConfig& cfg,
                                        const NormStats& stats) {
    validate_pipeline(cfg);
    std::vector<WindowSample> samples;
    for (const auto& traj : trajs) {
        validate_trajectory(traj);
        for (const auto& w : slide_windows(traj, cfg.n_stw, cfg.stride)) {
            samples.push_back(make_sample(traj, w.end - 1, cfg, stats));
        }
    }
    return samples;
}

}  // namespace slat
