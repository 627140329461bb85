#include "slat/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <utility>

namespace slat {

std::vector<WindowSample> corpus_samples(const Corpus& corpus, Split split,
                                         const PipelineConfig& pipeline, const NormStats& stats,
                                         const std::vector<std::string>* only_ids) {
    std::vector<Trajectory> trajs;
    for (const auto& e : corpus.entries) {
        if (e.split != split) continue;
        if (only_ids != nullptr &&
            std::find(only_ids->begin(), only_ids->end(), e.trajectory.id) == only_ids->end()) {
            continue;
        }
        trajs.push_back(e.trajectory);
    }
    PipelineConfig cfg = pipeline;
    if (split == Split::Test) cfg.stride = 1;
    return build_dataset(trajs, cfg, stats);
}

TrainOutcome train_on_corpus(const Corpus& corpus, SlatConfig model_cfg,
                             const TrainConfig& train_cfg) {
    validate_train_config(train_cfg);
    model_cfg.n_stw = corpus.pipeline.n_stw;
    model_cfg.n_channels = corpus.stats.channel_mean.size();
    model_cfg.rul_cap = corpus.pipeline.labels.rul_cap;
    validate_config(model_cfg);

    TrainOutcome out;
    const auto train_trajs = corpus.trajectories(Split::Train);
    out.split = split_validation(train_trajs, train_cfg.validation_fraction, train_cfg.seed);
    const auto train_set =
        corpus_samples(corpus, Split::Train, corpus.pipeline, corpus.stats, &out.split.train_ids);
    const auto val_set = corpus_samples(corpus, Split::Train, corpus.pipeline, corpus.stats,
                                        &out.split.validation_ids);

    const SlatParams init = init_params(model_cfg, derive_seed(train_cfg.seed, "init"));
    TrainResult result = train(model_cfg, init, train_set, val_set, train_cfg);
    out.history = std::move(result.history);
    out.best_epoch = result.best_epoch;
    out.best_val_rmse = result.best_val_rmse;
    out.checkpoint = {model_cfg, std::move(result.best_params), corpus.pipeline, corpus.stats};
    return out;
}

EvalReport evaluate_on_corpus(const Checkpoint& ckpt, const Corpus& corpus) {
    const SlatModel model(ckpt.config, ckpt.params);
    const auto test = corpus_samples(corpus, Split::Test, ckpt.pipeline, ckpt.stats);
    return evaluate(model, test);
}

RtfSeries rtf_on_corpus(const Checkpoint& ckpt, const Corpus& corpus, const std::string& id) {
    const CorpusEntry* entry = corpus.find(id);
    require(entry != nullptr, ErrorCode::InvalidArgument, "no trajectory '" + id + "' in corpus");
    const SlatModel model(ckpt.config, ckpt.params);
    return rtf_series(model, entry->trajectory, ckpt.pipeline, ckpt.stats);
}

EvalReport baseline_on_corpus(const Corpus& corpus, BaselineKind kind) {
    const auto train = corpus_samples(corpus, Split::Train, corpus.pipeline, corpus.stats);
    const auto test = corpus_samples(corpus, Split::Test, corpus.pipeline, corpus.stats);
    const Baseline baseline = Baseline::fit(kind, train);
    return evaluate_baseline(baseline, test);
}

SlatConfig gradcheck_config() {
    SlatConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.time_blocks = 1;
    cfg.sensor_blocks = 1;
    cfg.decoder_blocks = 1;
    cfg.ffn_mult = 2;
    cfg.rank = 2;
    cfg.band = 1;
    cfg.globals = 1;
    cfg.sensor_band = 0;
    cfg.sensor_globals = 1;
    cfg.n_stw = 6;
    cfg.n_channels = 3;
    cfg.dropout = 0.0;
    return cfg;
}

GradCheckReport run_gradcheck(const SlatConfig& cfg, std::uint64_t seed, Index samples,
                              double step) {
    const auto started = std::chrono::steady_clock::now();
    require(samples >= 1, ErrorCode::InvalidArgument, "gradcheck needs at least one sample");
    SlatModel model(cfg, init_params(cfg, seed));
    // Perturb gains, biases and the zero-initialized tensors so that every
    // tensor carries a non-trivial gradient.
    Rng rng(derive_seed(seed, "gradcheck"));
    for (auto& t : model.params().tensors()) {
        for (Index i = 0; i < t.tensor->size(); ++i) t.tensor->data()[i] += 0.1 * rng.normal();
    }

    std::vector<WindowSample> batch(static_cast<std::size_t>(samples));
    for (auto& s : batch) {
        s.trajectory_id = "gradcheck";
        s.values = Matrix::NullaryExpr(cfg.n_stw, cfg.n_channels, [&] { return rng.normal(); });
        s.descriptors = Vector::NullaryExpr(2 * cfg.n_channels, [&] { return rng.normal(); });
        s.rul_target = rng.uniform(0.0, cfg.rul_cap);
    }
    std::vector<const WindowSample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);

    SlatParams analytic = zero_params(cfg);
    batch_loss_and_grad(model, ptrs, analytic, nullptr);

    auto loss = [&] {
        double total = 0.0;
        for (const auto& s : batch) {
            const double d = model.forward(s) - s.rul_target;
            total += d * d;
        }
        return total / static_cast<double>(batch.size());
    };

    GradCheckReport report;
    auto params = model.params().tensors();
    const auto grads = std::as_const(analytic).tensors();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].tensor;
        const Matrix& a = *grads[k].tensor;
        Matrix numeric(p.rows(), p.cols());
        for (Index i = 0; i < p.size(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + step;
            const double up = loss();
            p.data()[i] = saved - step;
            const double down = loss();
            p.data()[i] = saved;
            numeric.data()[i] = (up - down) / (2.0 * step);
        }
        TensorGradError e;
        e.name = params[k].name;
        e.size = p.size();
        const double scale = std::max({a.norm(), numeric.norm(), 1e-12});
        e.rel_error = (a - numeric).norm() / scale;
        e.max_abs_diff = (a - numeric).cwiseAbs().maxCoeff();
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        report.tensors.push_back(std::move(e));
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace slat
