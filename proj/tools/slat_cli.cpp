// Command-line front end. Talks to the library only through slat.h.
#include "slat/slat.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace fs = std::filesystem;

namespace {

struct RuntimeFailure {
    std::string message;
};

void check(slat_status status, const std::string& context) {
    if (status != SLAT_OK) {
        throw RuntimeFailure{context + ": " + slat_status_name(status) + ": " + slat_last_error()};
    }
}

// Owns a string returned by the C API.
class CString {
public:
    CString() = default;
    CString(const CString&) = delete;
    CString& operator=(const CString&) = delete;
    ~CString() { slat_string_free(ptr_); }
    char** out() { return &ptr_; }
    std::string str() const { return ptr_ ? ptr_ : ""; }

private:
    char* ptr_ = nullptr;
};

struct CorpusHandle {
    slat_corpus* ptr = nullptr;
    ~CorpusHandle() { slat_corpus_free(ptr); }
};

struct ModelHandle {
    slat_model* ptr = nullptr;
    ~ModelHandle() { slat_model_free(ptr); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure{"cannot read config file '" + path + "'"};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure{"cannot write '" + path.string() + "'"};
    out << text;
    if (!out) throw RuntimeFailure{"write failed for '" + path.string() + "'"};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeFailure{"cannot create '" + dir.string() + "': " + ec.message()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SLAT remaining-useful-life toolkit", "slat"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", slat_version());

    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir = ".";
    app.add_option("--seed", seed, "Master seed (generate), training seed (train) or gradcheck seed");
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory; nothing is written elsewhere");

    auto* generate = app.add_subcommand("generate", "Simulate a run-to-failure corpus into --out");

    std::string corpus_dir;
    auto* train = app.add_subcommand("train", "Train on a corpus; writes model.json and history.csv");
    train->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);

    std::string model_path;
    auto* evaluate = app.add_subcommand("evaluate", "Per-mode RMSE on the test split; writes report.json and report.txt");
    evaluate->add_option("--model", model_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);

    std::vector<std::string> trajectory_ids;
    auto* rtf = app.add_subcommand("rtf", "Export predicted vs true RUL to rtf_<id>.csv");
    rtf->add_option("--model", model_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
    rtf->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    rtf->add_option("--trajectory", trajectory_ids, "Trajectory id(s)")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");

    std::string kind = "all";
    auto* baseline = app.add_subcommand("baseline", "Fit and evaluate constant-mean / linear-window baselines");
    baseline->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    baseline->add_option("--kind", kind, "constant-mean, linear-window or all")
        ->check(CLI::IsMember({"constant-mean", "linear-window", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        const std::string config = config_path.empty() ? std::string() : read_file(config_path);
        const int has_seed = seed.has_value() ? 1 : 0;
        const std::uint64_t seed_value = seed.value_or(0);
        const fs::path out(out_dir);

        if (*generate) {
            ensure_dir(out);
            check(slat_generate_corpus(config.c_str(), has_seed, seed_value, out.string().c_str()),
                  "generate");
            CorpusHandle corpus;
            check(slat_corpus_open(out.string().c_str(), &corpus.ptr), "generate");
            size_t n = 0;
            check(slat_corpus_trajectory_count(corpus.ptr, &n), "generate");
            std::cout << "wrote " << n << " trajectories to " << out.string() << "\n";
        } else if (*train) {
            CorpusHandle corpus;
            check(slat_corpus_open(corpus_dir.c_str(), &corpus.ptr), "train");
            ModelHandle model;
            CString history;
            check(slat_train(corpus.ptr, config.c_str(), has_seed, seed_value, &model.ptr,
                             history.out()),
                  "train");
            ensure_dir(out);
            check(slat_model_save(model.ptr, (out / "model.json").string().c_str()), "train");
            write_file(out / "history.csv", history.str());
            std::uint64_t count = 0;
            check(slat_model_param_count(model.ptr, &count), "train");
            std::cout << "trained " << count << " parameters; wrote "
                      << (out / "model.json").string() << " and "
                      << (out / "history.csv").string() << "\n";
        } else if (*evaluate) {
            CorpusHandle corpus;
            check(slat_corpus_open(corpus_dir.c_str(), &corpus.ptr), "evaluate");
            ModelHandle model;
            check(slat_model_load(model_path.c_str(), &model.ptr), "evaluate");
            CString json;
            CString table;
            check(slat_evaluate(model.ptr, corpus.ptr, json.out(), table.out()), "evaluate");
            ensure_dir(out);
            write_file(out / "report.json", json.str());
            write_file(out / "report.txt", table.str());
            std::cout << table.str();
        } else if (*rtf) {
            CorpusHandle corpus;
            check(slat_corpus_open(corpus_dir.c_str(), &corpus.ptr), "rtf");
            ModelHandle model;
            check(slat_model_load(model_path.c_str(), &model.ptr), "rtf");
            ensure_dir(out);
            for (const auto& id : trajectory_ids) {
                const fs::path path = out / ("rtf_" + id + ".csv");
                check(slat_rtf_export(model.ptr, corpus.ptr, id.c_str(), path.string().c_str()),
                      "rtf");
                std::cout << "wrote " << path.string() << "\n";
            }
        } else if (*gradcheck) {
            double max_err = 0.0;
            CString detail;
            check(slat_gradcheck(seed.value_or(1), &max_err, detail.out()), "gradcheck");
            ensure_dir(out);
            write_file(out / "gradcheck.json", detail.str());
            const bool ok = max_err < 1e-3;
            std::printf("max relative error %.3e (%s)\n", max_err, ok ? "ok" : "FAILED");
            return ok ? 0 : 2;
        } else if (*baseline) {
            CorpusHandle corpus;
            check(slat_corpus_open(corpus_dir.c_str(), &corpus.ptr), "baseline");
            std::vector<std::string> kinds;
            if (kind == "all") {
                kinds = {"constant-mean", "linear-window"};
            } else {
                kinds = {kind};
            }
            ensure_dir(out);
            for (const auto& k : kinds) {
                CString json;
                CString table;
                check(slat_baseline(corpus.ptr, k.c_str(), json.out(), table.out()), "baseline");
                write_file(out / ("baseline_" + k + ".json"), json.str());
                write_file(out / ("baseline_" + k + ".txt"), table.str());
                std::cout << table.str();
            }
        }
    } catch (const RuntimeFailure& e) {
        std::cerr << "error: " << e.message << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
