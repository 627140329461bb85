#include "slat/slat.h"

#include "slat/pipeline.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

struct slat_corpus {
    slat::Corpus corpus;
};

struct slat_model {
    slat::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

slat_status to_status(slat::ErrorCode code) {
    switch (code) {
        case slat::ErrorCode::InvalidArgument: return SLAT_ERR_INVALID_ARGUMENT;
        case slat::ErrorCode::InvalidInput: return SLAT_ERR_INVALID_INPUT;
        case slat::ErrorCode::EmptyTrajectory: return SLAT_ERR_EMPTY_TRAJECTORY;
        case slat::ErrorCode::Config: return SLAT_ERR_CONFIG;
        case slat::ErrorCode::Io: return SLAT_ERR_IO;
        case slat::ErrorCode::NonFinite: return SLAT_ERR_NON_FINITE;
        case slat::ErrorCode::Divergence: return SLAT_ERR_DIVERGENCE;
    }
    return SLAT_ERR_INTERNAL;
}

template <typename F>
slat_status guarded(F&& body) {
    g_last_error.clear();
    try {
        body();
        return SLAT_OK;
    } catch (const slat::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("config: ") + e.what();
        return SLAT_ERR_CONFIG;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return SLAT_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SLAT_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SLAT_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    slat::require(p != nullptr, slat::ErrorCode::InvalidArgument,
                  std::string(what) + " must not be null");
}

slat::Json parse_json(const char* json) {
    if (json == nullptr || *json == '\0') return slat::Json::object();
    slat::Json parsed;
    try {
        parsed = slat::Json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
        slat::fail(slat::ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
    }
    return parsed;
}

slat::RunConfig run_config(const char* json) { return slat::parse_run_config(parse_json(json)); }

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char** out, const std::string& s) {
    if (out != nullptr) *out = dup_string(s);
}

}  // namespace

extern "C" {

const char* slat_version(void) { return "1.0.0"; }

const char* slat_status_name(slat_status status) {
    switch (status) {
        case SLAT_OK: return "ok";
        case SLAT_ERR_INVALID_ARGUMENT: return "invalid-argument";
        case SLAT_ERR_INVALID_INPUT: return "invalid-input";
        case SLAT_ERR_EMPTY_TRAJECTORY: return "empty-trajectory";
        case SLAT_ERR_CONFIG: return "config";
        case SLAT_ERR_IO: return "io";
        case SLAT_ERR_NON_FINITE: return "non-finite";
        case SLAT_ERR_DIVERGENCE: return "divergence";
        case SLAT_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* slat_last_error(void) { return g_last_error.c_str(); }

void slat_string_free(char* str) { std::free(str); }

slat_status slat_generate_corpus(const char* config_json, int override_seed, uint64_t seed,
                                 const char* out_dir) {
    return guarded([&] {
        need(out_dir, "out_dir");
        slat::RunConfig cfg = run_config(config_json);
        if (override_seed != 0) cfg.corpus.master_seed = seed;
        const slat::Corpus corpus = slat::generate_corpus(cfg.corpus);
        slat::write_corpus(corpus, out_dir);
    });
}

slat_status slat_corpus_open(const char* dir, slat_corpus** out) {
    return guarded([&] {
        need(dir, "dir");
        need(out, "out");
        *out = nullptr;
        auto handle = std::make_unique<slat_corpus>();
        handle->corpus = slat::read_corpus(dir);
        *out = handle.release();
    });
}

void slat_corpus_free(slat_corpus* corpus) { delete corpus; }

slat_status slat_corpus_trajectory_count(const slat_corpus* corpus, size_t* out) {
    return guarded([&] {
        need(corpus, "corpus");
        need(out, "out");
        *out = corpus->corpus.entries.size();
    });
}

slat_status slat_corpus_describe(const slat_corpus* corpus, char** json_out) {
    return guarded([&] {
        need(corpus, "corpus");
        need(json_out, "json_out");
        slat::Json arr = slat::Json::array();
        for (const auto& e : corpus->corpus.entries) {
            arr.push_back({{"id", e.trajectory.id},
                           {"mode", std::string(slat::mode_tag(e.trajectory.mode))},
                           {"split", e.split == slat::Split::Train ? "train" : "test"},
                           {"length", e.trajectory.channels.rows()}});
        }
        emit(json_out, arr.dump(2));
    });
}

slat_status slat_train(const slat_corpus* corpus, const char* config_json, int override_seed,
                       uint64_t seed, slat_model** out, char** history_csv) {
    return guarded([&] {
        need(corpus, "corpus");
        need(out, "out");
        *out = nullptr;
        const slat::Json j = parse_json(config_json);
        slat::RunConfig cfg = slat::parse_run_config(j);
        if (override_seed != 0) cfg.train.seed = seed;
        const slat::Corpus* source = &corpus->corpus;
        slat::Corpus restrided;
        if (j.contains("pipeline") && j["pipeline"].contains("stride")) {
            const auto& pipeline = cfg.corpus.pipeline;
            slat::require(pipeline.n_stw == source->pipeline.n_stw &&
                              pipeline.labels.rul_cap == source->pipeline.labels.rul_cap,
                          slat::ErrorCode::Config,
                          "pipeline.n_stw and rul_cap must match the corpus at training time");
            restrided = *source;
            restrided.pipeline.stride = pipeline.stride;
            source = &restrided;
        }
        slat::TrainOutcome outcome = slat::train_on_corpus(*source, cfg.model, cfg.train);
        auto handle = std::make_unique<slat_model>();
        handle->checkpoint = std::move(outcome.checkpoint);
        emit(history_csv, slat::history_csv(outcome.history));
        *out = handle.release();
    });
}

slat_status slat_model_create(const char* config_json, uint64_t seed, slat_model** out) {
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        const slat::RunConfig cfg = run_config(config_json);
        slat::validate_config(cfg.model);
        auto handle = std::make_unique<slat_model>();
        handle->checkpoint.config = cfg.model;
        handle->checkpoint.params = slat::init_params(cfg.model, seed);
        handle->checkpoint.pipeline = cfg.corpus.pipeline;
        handle->checkpoint.pipeline.n_stw = cfg.model.n_stw;
        handle->checkpoint.stats.channel_mean = slat::Vector::Zero(cfg.model.n_channels);
        handle->checkpoint.stats.channel_std = slat::Vector::Ones(cfg.model.n_channels);
        handle->checkpoint.stats.descriptor_mean = slat::Vector::Zero(2 * cfg.model.n_channels);
        handle->checkpoint.stats.descriptor_std = slat::Vector::Ones(2 * cfg.model.n_channels);
        *out = handle.release();
    });
}

slat_status slat_model_load(const char* path, slat_model** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        auto handle = std::make_unique<slat_model>();
        handle->checkpoint = slat::load_checkpoint(path);
        *out = handle.release();
    });
}

slat_status slat_model_save(const slat_model* model, const char* path) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        slat::save_checkpoint(model->checkpoint, path);
    });
}

void slat_model_free(slat_model* model) { delete model; }

slat_status slat_model_param_count(const slat_model* model, uint64_t* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = static_cast<uint64_t>(model->checkpoint.params.size());
    });
}

slat_status slat_model_predict(const slat_model* model, const slat_corpus* corpus,
                               const char* trajectory_id, size_t end_index, double* out) {
    return guarded([&] {
        need(model, "model");
        need(corpus, "corpus");
        need(trajectory_id, "trajectory_id");
        need(out, "out");
        const auto* entry = corpus->corpus.find(trajectory_id);
        slat::require(entry != nullptr, slat::ErrorCode::InvalidArgument,
                      std::string("no trajectory '") + trajectory_id + "' in corpus");
        const auto& ckpt = model->checkpoint;
        const slat::SlatModel m(ckpt.config, ckpt.params);
        const auto sample = slat::make_sample(entry->trajectory, static_cast<slat::Index>(end_index),
                                              ckpt.pipeline, ckpt.stats);
        *out = m.predict_rul(sample);
    });
}

slat_status slat_evaluate(const slat_model* model, const slat_corpus* corpus, char** report_json,
                          char** report_table) {
    return guarded([&] {
        need(model, "model");
        need(corpus, "corpus");
        const auto report = slat::evaluate_on_corpus(model->checkpoint, corpus->corpus);
        emit(report_json, report.to_json().dump(2) + "\n");
        emit(report_table, report.to_table("SLAT"));
    });
}

slat_status slat_rtf_export(const slat_model* model, const slat_corpus* corpus,
                            const char* trajectory_id, const char* csv_path) {
    return guarded([&] {
        need(model, "model");
        need(corpus, "corpus");
        need(trajectory_id, "trajectory_id");
        need(csv_path, "csv_path");
        const auto series = slat::rtf_on_corpus(model->checkpoint, corpus->corpus, trajectory_id);
        slat::write_text_file(csv_path, slat::rtf_csv(series));
    });
}

slat_status slat_baseline(const slat_corpus* corpus, const char* kind, char** report_json,
                          char** report_table) {
    return guarded([&] {
        need(corpus, "corpus");
        need(kind, "kind");
        const auto parsed = slat::parse_baseline(kind);
        slat::require(parsed.has_value(), slat::ErrorCode::InvalidArgument,
                      std::string("unknown baseline '") + kind +
                          "' (expected constant-mean or linear-window)");
        const auto report = slat::baseline_on_corpus(corpus->corpus, *parsed);
        emit(report_json, report.to_json().dump(2) + "\n");
        emit(report_table, report.to_table(std::string(slat::baseline_name(*parsed))));
    });
}

slat_status slat_gradcheck(uint64_t seed, double* max_rel_error, char** detail_json) {
    return guarded([&] {
        need(max_rel_error, "max_rel_error");
        const auto report = slat::run_gradcheck(slat::gradcheck_config(), seed);
        *max_rel_error = report.max_rel_error;
        if (detail_json != nullptr) {
            slat::Json j;
            j["max_rel_error"] = report.max_rel_error;
            j["seconds"] = report.seconds;
            slat::Json tensors = slat::Json::array();
            for (const auto& t : report.tensors) {
                tensors.push_back({{"name", t.name},
                                   {"size", t.size},
                                   {"rel_error", t.rel_error},
                                   {"max_abs_diff", t.max_abs_diff}});
            }
            j["tensors"] = std::move(tensors);
            *detail_json = dup_string(j.dump(2) + "\n");
        }
    });
}

}  // extern "C"
