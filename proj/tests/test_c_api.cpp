// Exercises the shared library strictly through its C header.
#include "slat/slat.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({"sim": {"n_trajectories": 3},
                         "model": {"d_model": 8, "heads": 2, "time_blocks": 1, "sensor_blocks": 1,
                                   "decoder_blocks": 1, "ffn_mult": 2, "rank": 2},
                         "pipeline": {"stride": 10},
                         "train": {"epochs": 2}})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("slat_capi_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string take(char* s) {
    std::string out = s ? s : "";
    slat_string_free(s);
    return out;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
    EXPECT_STREQ(slat_version(), "1.0.0");
    EXPECT_STREQ(slat_status_name(SLAT_OK), "ok");
    EXPECT_STREQ(slat_status_name(SLAT_ERR_CONFIG), "config");
}

TEST(CApi, NullArgumentsReported) {
    EXPECT_EQ(slat_corpus_open(nullptr, nullptr), SLAT_ERR_INVALID_ARGUMENT);
    EXPECT_NE(std::string(slat_last_error()).find("must not be null"), std::string::npos);
    double err = 0;
    EXPECT_EQ(slat_gradcheck(1, nullptr, nullptr), SLAT_ERR_INVALID_ARGUMENT);
    EXPECT_EQ(slat_gradcheck(1, &err, nullptr), SLAT_OK);
    EXPECT_STREQ(slat_last_error(), "");
    slat_corpus_free(nullptr);
    slat_model_free(nullptr);
    slat_string_free(nullptr);
}

TEST(CApi, ConfigAndIoErrors) {
    const fs::path dir = scratch("bad");
    EXPECT_EQ(slat_generate_corpus("{not json", 0, 0, dir.string().c_str()), SLAT_ERR_CONFIG);
    EXPECT_EQ(slat_generate_corpus(R"({"model": {"bogus": 1}})", 0, 0, dir.string().c_str()),
              SLAT_ERR_CONFIG);
    EXPECT_NE(std::string(slat_last_error()).find("bogus"), std::string::npos);
    slat_corpus* corpus = nullptr;
    EXPECT_EQ(slat_corpus_open(scratch("absent").string().c_str(), &corpus), SLAT_ERR_IO);
    EXPECT_EQ(corpus, nullptr);
    slat_model* model = nullptr;
    EXPECT_EQ(slat_model_load(scratch("absent.json").string().c_str(), &model), SLAT_ERR_IO);
    EXPECT_EQ(slat_model_create(R"({"model": {"heads": 3}})", 1, &model), SLAT_ERR_INVALID_ARGUMENT);
}

TEST(CApi, GradcheckDetail) {
    double err = 1;
    char* detail = nullptr;
    ASSERT_EQ(slat_gradcheck(1, &err, &detail), SLAT_OK);
    EXPECT_LT(err, 1e-3);
    const std::string json = take(detail);
    EXPECT_NE(json.find("\"tensors\""), std::string::npos);
    EXPECT_NE(json.find("head.w"), std::string::npos);
}

TEST(CApi, EndToEnd) {
    const fs::path dir = scratch("e2e");
    ASSERT_EQ(slat_generate_corpus(kSmall, 1, 5, dir.string().c_str()), SLAT_OK) << slat_last_error();
    slat_corpus* corpus = nullptr;
    ASSERT_EQ(slat_corpus_open(dir.string().c_str(), &corpus), SLAT_OK) << slat_last_error();
    size_t n = 0;
    ASSERT_EQ(slat_corpus_trajectory_count(corpus, &n), SLAT_OK);
    EXPECT_EQ(n, 12u);
    char* desc = nullptr;
    ASSERT_EQ(slat_corpus_describe(corpus, &desc), SLAT_OK);
    const std::string described = take(desc);
    EXPECT_NE(described.find("\"PL-000\""), std::string::npos);

    slat_model* model = nullptr;
    char* history = nullptr;
    ASSERT_EQ(slat_train(corpus, kSmall, 1, 3, &model, &history), SLAT_OK) << slat_last_error();
    const std::string hist = take(history);
    EXPECT_EQ(hist.substr(0, hist.find('\n')), "epoch,train_loss,val_rmse,seconds");
    EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 3);
    uint64_t count = 0;
    ASSERT_EQ(slat_model_param_count(model, &count), SLAT_OK);
    EXPECT_GT(count, 0u);

    double pred = -1;
    ASSERT_EQ(slat_model_predict(model, corpus, "PL-000", 40, &pred), SLAT_OK) << slat_last_error();
    EXPECT_GE(pred, 0.0);
    EXPECT_LE(pred, 125.0);
    EXPECT_EQ(slat_model_predict(model, corpus, "PL-999", 40, &pred), SLAT_ERR_INVALID_ARGUMENT);

    char* json = nullptr;
    char* table = nullptr;
    ASSERT_EQ(slat_evaluate(model, corpus, &json, &table), SLAT_OK) << slat_last_error();
    const std::string t = take(table);
    EXPECT_EQ(t.substr(0, 10), "Subdataset");
    EXPECT_NE(t.find("\nAverage"), std::string::npos);
    EXPECT_NE(take(json).find("\"average\""), std::string::npos);

    const fs::path saved = dir / "model.json";
    ASSERT_EQ(slat_model_save(model, saved.string().c_str()), SLAT_OK);
    slat_model* loaded = nullptr;
    ASSERT_EQ(slat_model_load(saved.string().c_str(), &loaded), SLAT_OK) << slat_last_error();
    double pred2 = -1;
    ASSERT_EQ(slat_model_predict(loaded, corpus, "PL-000", 40, &pred2), SLAT_OK);
    EXPECT_EQ(pred, pred2);

    const fs::path rtf = dir / "rtf.csv";
    ASSERT_EQ(slat_rtf_export(loaded, corpus, "PC-001", rtf.string().c_str()), SLAT_OK) << slat_last_error();
    const std::string first = slurp(rtf);
    EXPECT_EQ(first.substr(0, first.find('\n')), "t,true_rul,pred_rul");
    ASSERT_EQ(slat_rtf_export(model, corpus, "PC-001", rtf.string().c_str()), SLAT_OK);
    EXPECT_EQ(slurp(rtf), first);

    for (const char* kind : {"constant-mean", "linear-window"}) {
        char* bj = nullptr;
        char* bt = nullptr;
        ASSERT_EQ(slat_baseline(corpus, kind, &bj, &bt), SLAT_OK) << slat_last_error();
        EXPECT_NE(take(bt).find(kind), std::string::npos);
        take(bj);
    }
    EXPECT_EQ(slat_baseline(corpus, "bilstm", nullptr, nullptr), SLAT_ERR_INVALID_ARGUMENT);

    slat_model_free(loaded);
    slat_model_free(model);
    slat_corpus_free(corpus);
    fs::remove_all(dir);
}

TEST(CApi, TrainingStrideMustMatchWindow) {
    const fs::path dir = scratch("stride");
    ASSERT_EQ(slat_generate_corpus(R"({"sim": {"n_trajectories": 2}})", 0, 0, dir.string().c_str()), SLAT_OK);
    slat_corpus* corpus = nullptr;
    ASSERT_EQ(slat_corpus_open(dir.string().c_str(), &corpus), SLAT_OK);
    slat_model* model = nullptr;
    EXPECT_EQ(slat_train(corpus, R"({"pipeline": {"n_stw": 20, "stride": 4}, "train": {"epochs": 1}})", 0, 0,
                         &model, nullptr),
              SLAT_ERR_CONFIG);
    EXPECT_EQ(model, nullptr);
    slat_corpus_free(corpus);
    fs::remove_all(dir);
}
