#include "slat/training.hpp"

#include <chrono>
#include <numeric>
#include <set>
#include <sstream>

namespace slat {

void validate_train_config(const TrainConfig& cfg) {
    require(cfg.learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be > 0");
    require(cfg.batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
    require(cfg.epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
    require(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0,
            ErrorCode::InvalidArgument, "Adam betas must lie in (0, 1)");
    require(cfg.epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be > 0");
    require(cfg.validation_fraction > 0.0 && cfg.validation_fraction <= 0.5,
            ErrorCode::InvalidArgument, "validation_fraction must lie in (0, 0.5]");
    require(cfg.clip_norm > 0.0, ErrorCode::InvalidArgument, "clip_norm must be > 0");
}

AdamState AdamState::for_config(const SlatConfig& cfg) {
    return {zero_params(cfg), zero_params(cfg), 0};
}

std::string history_csv(const TrainHistory& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_rmse,seconds\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_rmse)
            << ',' << format_double(r.seconds) << '\n';
    }
    return out.str();
}

double mse_loss(std::span<const double> preds, std::span<const double> targets) {
    require(!preds.empty(), ErrorCode::InvalidArgument, "mse_loss needs at least one value");
    require(preds.size() == targets.size(), ErrorCode::InvalidArgument,
            "mse_loss lengths differ");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double diff = preds[i] - targets[i];
        total += diff * diff;
    }
    return total / static_cast<double>(preds.size());
}

double rmse(std::span<const double> preds, std::span<const double> targets) {
    return std::sqrt(mse_loss(preds, targets));
}

double global_norm(const SlatParams& grads) {
    double sq = 0.0;
    for (const auto& t : grads.tensors()) sq += t.tensor->squaredNorm();
    return std::sqrt(sq);
}

double clip_global_norm(SlatParams& grads, double max_norm) {
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& t : grads.tensors()) *t.tensor *= scale;
    }
    return norm;
}

void adam_step(SlatParams& params, SlatParams& grads, AdamState& state, const TrainConfig& cfg) {
    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = state.first_moment.tensors();
    auto v = state.second_moment.tensors();
    require(p.size() == g.size() && p.size() == m.size() && p.size() == v.size(),
            ErrorCode::InvalidArgument, "optimizer state does not mirror parameters");
    for (std::size_t i = 0; i < g.size(); ++i) {
        require(g[i].tensor->rows() == p[i].tensor->rows() &&
                    g[i].tensor->cols() == p[i].tensor->cols(),
                ErrorCode::InvalidArgument, "gradient shape mismatch for '" + g[i].name + "'");
        require(g[i].tensor->allFinite(), ErrorCode::NonFinite,
                "non-finite gradient in tensor '" + g[i].name + "' at optimizer step " +
                    std::to_string(state.step + 1));
    }
    clip_global_norm(grads, cfg.clip_norm);

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(cfg.beta1, t);
    const double corr2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
        Matrix& mi = *m[i].tensor;
        Matrix& vi = *v[i].tensor;
        const Matrix& gi = *g[i].tensor;
        mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
        vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi.cwiseProduct(gi);
        p[i].tensor->array() -= cfg.learning_rate * (mi.array() / corr1) /
                                ((vi.array() / corr2).sqrt() + cfg.epsilon);
    }
}

double batch_loss_and_grad(const SlatModel& model, std::span<const WindowSample* const> batch,
                           SlatParams& grads, Rng* dropout_rng) {
    require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    ForwardTrace trace;
    for (const WindowSample* sample : batch) {
        const double pred = model.forward(*sample, &trace, dropout_rng);
        const double diff = pred - sample->rul_target;
        loss += diff * diff;
        model.backward(trace, 2.0 * diff / n, grads);
    }
    return loss / n;
}

double evaluate_rmse(const SlatModel& model, std::span<const WindowSample> samples) {
    require(!samples.empty(), ErrorCode::InvalidArgument, "cannot evaluate an empty set");
    std::vector<double> preds = model.predict_batch(samples);
    std::vector<double> targets;
    targets.reserve(samples.size());
    for (const auto& s : samples) targets.push_back(s.rul_target);
    return rmse(preds, targets);
}

TrainResult train(const SlatConfig& model_cfg, const SlatParams& init,
                  std::span<const WindowSample> train_set, std::span<const WindowSample> val_set,
                  const TrainConfig& cfg) {
    validate_train_config(cfg);
    require(!train_set.empty(), ErrorCode::InvalidArgument, "training set is empty");
    require(!val_set.empty(), ErrorCode::InvalidArgument, "validation set is empty");
    std::set<std::string> train_ids;
    for (const auto& s : train_set) train_ids.insert(s.trajectory_id);
    for (const auto& s : val_set) {
        require(!train_ids.contains(s.trajectory_id), ErrorCode::InvalidArgument,
                "trajectory '" + s.trajectory_id + "' appears in both training and validation");
    }

    SlatModel model(model_cfg, init);
    AdamState adam = AdamState::for_config(model_cfg);
    SlatParams grads = zero_params(model_cfg);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
    Rng* dropout = model_cfg.dropout > 0.0 ? &dropout_rng : nullptr;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const WindowSample*> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));

    TrainResult result;
    result.best_val_rmse = std::numeric_limits<double>::infinity();
    using Clock = std::chrono::steady_clock;

    for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = Clock::now();
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        Index batches = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);
            grads.set_zero();
            const double loss = batch_loss_and_grad(model, batch, grads, dropout);
            require(std::isfinite(loss), ErrorCode::Divergence,
                    "training loss became non-finite at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batches + 1));
            adam_step(model.params(), grads, adam, cfg);
            loss_sum += loss;
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.val_rmse = evaluate_rmse(model, val_set);
        rec.seconds = std::chrono::duration<double>(Clock::now() - started).count();
        result.history.push_back(rec);
        if (rec.val_rmse < result.best_val_rmse) {
            result.best_val_rmse = rec.val_rmse;
            result.best_epoch = epoch;
            result.best_params = model.params();
        }
    }
    result.final_params = model.params();
    return result;
}

TrajectorySplit split_validation(std::span<const Trajectory> trajs, double fraction,
                                 std::uint64_t seed) {
    require(fraction > 0.0 && fraction <= 0.5, ErrorCode::InvalidArgument,
            "validation fraction must lie in (0, 0.5]");
    TrajectorySplit split;
    Rng rng(derive_seed(seed, "validation-split"));
    for (FaultMode mode : kAllModes) {
        std::vector<std::string> ids;
        for (const auto& t : trajs) {
            if (t.mode == mode) ids.push_back(t.id);
        }
        if (ids.empty()) continue;
        rng.shuffle(ids);
        const auto n = static_cast<double>(ids.size());
        std::size_t n_val =
            ids.size() >= 2 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * n)))
                            : 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            (i < n_val ? split.validation_ids : split.train_ids).push_back(ids[i]);
        }
    }
    require(!split.validation_ids.empty() && !split.train_ids.empty(), ErrorCode::InvalidArgument,
            "need at least two trajectories of one mode to split off validation");
    return split;
}

}  // namespace slat
