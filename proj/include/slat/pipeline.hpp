#pragma once

#include "slat/corpus.hpp"
#include "slat/evaluation.hpp"
#include "slat/training.hpp"

#include <string>
#include <vector>

namespace slat {

/// Window samples for one split. Training windows use the corpus stride;
/// evaluation sweeps every window position (stride 1).
std::vector<WindowSample> corpus_samples(const Corpus& corpus, Split split,
                                         const PipelineConfig& pipeline, const NormStats& stats,
                                         const std::vector<std::string>* only_ids = nullptr);

struct TrainOutcome {
    Checkpoint checkpoint;  // best-validation parameters
    TrainHistory history;
    TrajectorySplit split;
    Index best_epoch = 0;
    double best_val_rmse = 0.0;
};

/// Splits validation trajectories off the training split, trains, and packs
/// the best-validation parameters with the corpus pipeline metadata. The
/// model's n_stw, n_channels and rul_cap are taken from the corpus.
TrainOutcome train_on_corpus(const Corpus& corpus, SlatConfig model_cfg,
                             const TrainConfig& train_cfg);

EvalReport evaluate_on_corpus(const Checkpoint& ckpt, const Corpus& corpus);

RtfSeries rtf_on_corpus(const Checkpoint& ckpt, const Corpus& corpus, const std::string& id);

/// Fits on the training split, evaluates on the test split.
EvalReport baseline_on_corpus(const Corpus& corpus, BaselineKind kind);

struct TensorGradError {
    std::string name;
    Index size = 0;
    double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
    double max_abs_diff = 0.0;
};

struct GradCheckReport {
    std::vector<TensorGradError> tensors;
    double max_rel_error = 0.0;
    double seconds = 0.0;
};

/// d_model 8, 2 heads, one block per path, n_stw 6, 3 channels, no dropout.
SlatConfig gradcheck_config();

/// Central finite differences on every parameter of a randomly initialized
/// model against the analytic backward pass, for an MSE loss over
/// `samples` random windows.
GradCheckReport run_gradcheck(const SlatConfig& cfg, std::uint64_t seed = 1, Index samples = 2,
                              double step = 1e-5);

}  // namespace slat
