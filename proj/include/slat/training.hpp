#pragma once

#include "slat/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace slat {

struct TrainConfig {
    double learning_rate = 1e-3;
    Index batch_size = 32;
    Index epochs = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    double clip_norm = 1.0;
};

void validate_train_config(const TrainConfig& cfg);

struct AdamState {
    SlatParams first_moment;
    SlatParams second_moment;
    std::int64_t step = 0;

    static AdamState for_config(const SlatConfig& cfg);
};

struct EpochRecord {
    Index epoch = 0;
    double train_loss = 0.0;  // mean batch MSE over the epoch
    double val_rmse = 0.0;
    double seconds = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

/// epoch,train_loss,val_rmse,seconds with a header row.
std::string history_csv(const TrainHistory& history);

double mse_loss(std::span<const double> preds, std::span<const double> targets);
double rmse(std::span<const double> preds, std::span<const double> targets);

double global_norm(const SlatParams& grads);

/// Rescales `grads` in place so that its global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_global_norm(SlatParams& grads, double max_norm);

/// Bias-corrected Adam on every tensor, after global-norm clipping of
/// `grads`. Throws NonFinite naming the first tensor holding a
/// non-finite gradient; params are left untouched in that case.
void adam_step(SlatParams& params, SlatParams& grads, AdamState& state, const TrainConfig& cfg);

/// Mean squared error over `batch` and its gradient (accumulated into a
/// zeroed `grads`). Samples are processed in index order.
double batch_loss_and_grad(const SlatModel& model, std::span<const WindowSample* const> batch,
                           SlatParams& grads, Rng* dropout_rng);

double evaluate_rmse(const SlatModel& model, std::span<const WindowSample> samples);

struct TrainResult {
    SlatParams best_params;   // lowest validation RMSE
    SlatParams final_params;  // after the last epoch
    TrainHistory history;
    Index best_epoch = 0;
    double best_val_rmse = 0.0;
};

/// Fixed-epoch mini-batch training from `init`. Validation samples must come
/// from trajectories disjoint from the training ones. Throws Divergence if
/// the loss becomes non-finite.
TrainResult train(const SlatConfig& model_cfg, const SlatParams& init,
                  std::span<const WindowSample> train_set, std::span<const WindowSample> val_set,
                  const TrainConfig& cfg);

/// Splits trajectory ids per fault mode, putting round(fraction * n) (at
/// least one when n >= 2) of each mode's trajectories into validation.
struct TrajectorySplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
};

TrajectorySplit split_validation(std::span<const Trajectory> trajs, double fraction,
                                 std::uint64_t seed);

}  // namespace slat
