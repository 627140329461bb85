#include "slat/evaluation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace slat;

namespace {

WindowSample sample(const std::string& id, FaultMode mode, double target, Index n = 3, Index s = 2) {
    WindowSample w;
    w.trajectory_id = id;
    w.mode = mode;
    w.values = Matrix::Zero(n, s);
    w.descriptors = Vector::Zero(2 * s);
    w.rul_target = target;
    return w;
}

Trajectory ramp_traj(const std::string& id, Index length) {
    Trajectory t;
    t.id = id;
    t.channels = Matrix(length, 2);
    for (Index i = 0; i < length; ++i) {
        t.channels(i, 0) = static_cast<double>(i);
        t.channels(i, 1) = std::sin(static_cast<double>(i));
    }
    t.failure_index = length - 1;
    return t;
}

}  // namespace

TEST(Aggregate, FourModeColumnAverage) {
    std::map<FaultMode, ModeResult> modes = {{FaultMode::PumpLaser, {8.93, 10}},
                                             {FaultMode::PowerDetector, {7.67, 10}},
                                             {FaultMode::Voa, {1.34, 10}},
                                             {FaultMode::PassiveComponents, {8.29, 10}}};
    const EvalReport r = aggregate_report(modes);
    EXPECT_NEAR(r.average, 6.5575, 1e-9);
    EXPECT_EQ(std::round(r.average * 100.0) / 100.0, 6.56);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Aggregate, MissingModeExcludedWithWarning) {
    std::map<FaultMode, ModeResult> modes = {{FaultMode::PumpLaser, {2.0, 5}},
                                             {FaultMode::Voa, {4.0, 5}}};
    const EvalReport r = aggregate_report(modes);
    EXPECT_NEAR(r.average, 3.0, 1e-12);
    EXPECT_EQ(r.warnings.size(), 2u);
    EXPECT_NE(r.to_table().find("note: mode PD absent"), std::string::npos);
}

TEST(Evaluate, PerfectPredictorIsZero) {
    std::vector<WindowSample> test;
    for (FaultMode m : kAllModes) {
        for (int i = 0; i < 5; ++i) test.push_back(sample("t", m, 10.0 * i));
    }
    const EvalReport r = evaluate([](const WindowSample& s) { return s.rul_target; }, test);
    EXPECT_EQ(r.average, 0.0);
    for (FaultMode m : kAllModes) {
        EXPECT_EQ(r.modes.at(m).rmse, 0.0);
        EXPECT_EQ(r.modes.at(m).windows, 5);
    }
}

TEST(Evaluate, AverageIsMeanOfModes) {
    Rng rng(3);
    std::vector<WindowSample> test;
    for (FaultMode m : kAllModes) {
        const int n = 3 + static_cast<int>(rng.below(20));
        for (int i = 0; i < n; ++i) test.push_back(sample("t", m, rng.uniform(0, 125)));
    }
    const EvalReport r = evaluate([](const WindowSample&) { return 60.0; }, test);
    double sum = 0;
    for (const auto& [m, res] : r.modes) {
        EXPECT_GE(res.rmse, 0.0);
        sum += res.rmse;
    }
    EXPECT_NEAR(r.average, sum / 4.0, 1e-9);
}

TEST(Report, TableRowsAndJson) {
    std::map<FaultMode, ModeResult> modes = {{FaultMode::PumpLaser, {8.93, 11}},
                                             {FaultMode::PowerDetector, {7.67, 12}},
                                             {FaultMode::Voa, {1.34, 13}},
                                             {FaultMode::PassiveComponents, {8.29, 14}}};
    const EvalReport r = aggregate_report(modes);
    const std::string table = r.to_table("SLAT");
    std::vector<std::string> firsts;
    std::istringstream in(table);
    for (std::string line; std::getline(in, line);) firsts.push_back(line.substr(0, line.find(' ')));
    EXPECT_EQ(firsts, (std::vector<std::string>{"Subdataset", "PL", "PD", "VOA", "PC", "Average"}));
    EXPECT_NE(table.find("6.5575"), std::string::npos);
    const auto j = r.to_json();
    EXPECT_EQ(j["modes"]["VOA"]["windows"], 13);
    EXPECT_DOUBLE_EQ(j["average"].get<double>(), r.average);
}

TEST(Baseline, ConstantMean) {
    std::vector<WindowSample> train = {sample("a", FaultMode::PumpLaser, 10.0),
                                       sample("a", FaultMode::PumpLaser, 20.0)};
    const Baseline b = Baseline::fit(BaselineKind::ConstantMean, train);
    EXPECT_EQ(b.predict(sample("z", FaultMode::Voa, 0.0)), 15.0);
    EXPECT_EQ(b.predict(sample("z", FaultMode::Voa, 99.0)), 15.0);
}

TEST(Baseline, ConstantMeanRmseClosedForm) {
    Rng rng(4);
    std::vector<WindowSample> train, test;
    for (int i = 0; i < 50; ++i) train.push_back(sample("tr", FaultMode::PumpLaser, std::min(125.0, rng.uniform(0, 200))));
    for (int i = 0; i < 40; ++i) test.push_back(sample("te", FaultMode::PumpLaser, std::min(125.0, rng.uniform(0, 200))));
    const Baseline b = Baseline::fit(BaselineKind::ConstantMean, train);
    const EvalReport r = evaluate_baseline(b, test);
    double mean = 0, c = 0;
    for (const auto& s : test) mean += s.rul_target / 40.0;
    for (const auto& s : train) c += s.rul_target / 50.0;
    double var = 0;
    for (const auto& s : test) var += (s.rul_target - mean) * (s.rul_target - mean) / 40.0;
    EXPECT_NEAR(r.modes.at(FaultMode::PumpLaser).rmse, std::sqrt(var + (mean - c) * (mean - c)), 1e-9);
}

TEST(Baseline, LinearWindowExactOnLinearTarget) {
    Rng rng(5);
    const Index n = 3, s = 2;
    Vector truth(n * s + 2 * s);
    for (Index i = 0; i < truth.size(); ++i) truth(i) = rng.normal();
    auto make = [&](const std::string& id) {
        WindowSample w = sample(id, FaultMode::Voa, 0.0, n, s);
        w.values = Matrix::NullaryExpr(n, s, [&] { return rng.normal(); });
        w.descriptors = Vector::NullaryExpr(2 * s, [&] { return rng.normal(); });
        w.rul_target = 7.0 + Baseline::features(w).dot(truth);
        return w;
    };
    std::vector<WindowSample> train, test;
    for (int i = 0; i < 200; ++i) train.push_back(make("tr"));
    for (int i = 0; i < 50; ++i) test.push_back(make("te"));
    const Baseline b = Baseline::fit(BaselineKind::LinearWindow, train);
    EXPECT_FALSE(b.used_ridge());
    EXPECT_LT(evaluate_baseline(b, test).modes.at(FaultMode::Voa).rmse, 1e-6);
}

TEST(Baseline, SingularSystemUsesRidge) {
    std::vector<WindowSample> train;
    for (int i = 0; i < 10; ++i) train.push_back(sample("tr", FaultMode::PumpLaser, i));
    const Baseline b = Baseline::fit(BaselineKind::LinearWindow, train);
    EXPECT_TRUE(b.used_ridge());
    const std::vector<WindowSample> test = {sample("te", FaultMode::PumpLaser, 3.0)};
    const EvalReport r = evaluate_baseline(b, test);
    ASSERT_EQ(r.warnings.size(), 4u);  // three absent modes and the ridge note
    EXPECT_NE(r.warnings.back().find("ridge"), std::string::npos);
    EXPECT_NEAR(b.predict(test[0]), 4.5, 1e-3);
}

TEST(Baseline, RefusesFittedTrajectories) {
    std::vector<WindowSample> train = {sample("a", FaultMode::PumpLaser, 1.0),
                                       sample("b", FaultMode::PumpLaser, 2.0)};
    const Baseline b = Baseline::fit(BaselineKind::ConstantMean, train);
    const std::vector<WindowSample> leaked = {sample("b", FaultMode::PumpLaser, 1.0)};
    EXPECT_THROW(evaluate_baseline(b, leaked), Error);
    EXPECT_EQ(b.fitted_trajectories().size(), 2u);
}

TEST(Baseline, Names) {
    EXPECT_EQ(parse_baseline("constant-mean"), BaselineKind::ConstantMean);
    EXPECT_EQ(parse_baseline("linear-window"), BaselineKind::LinearWindow);
    EXPECT_FALSE(parse_baseline("bilstm").has_value());
    EXPECT_EQ(baseline_name(BaselineKind::LinearWindow), "linear-window");
}

TEST(Rtf, RowsCoverEveryWindowPosition) {
    const Trajectory t = ramp_traj("r", 50);
    PipelineConfig cfg;
    cfg.n_stw = 8;
    cfg.stride = 4;  // ignored: the sweep is always stride 1
    const std::vector<Trajectory> trajs = {t};
    const NormStats stats = fit_norm_stats(trajs, cfg.n_stw, 1);
    const RtfSeries s = rtf_series([](const WindowSample& w) { return w.rul_target + 1.0; }, t, cfg, stats);
    ASSERT_EQ(s.rows.size(), 50u - 8u + 1u);
    EXPECT_EQ(s.rows.front().t, 7);
    EXPECT_EQ(s.rows.back().t, 49);
    EXPECT_EQ(s.rows.back().true_rul, 0.0);
    for (std::size_t i = 1; i < s.rows.size(); ++i) {
        EXPECT_GT(s.rows[i].t, s.rows[i - 1].t);
        EXPECT_LE(s.rows[i].true_rul, s.rows[i - 1].true_rul);
        EXPECT_EQ(s.rows[i].pred_rul, s.rows[i].true_rul + 1.0);
    }
    const std::string csv = rtf_csv(s);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,true_rul,pred_rul");
    EXPECT_NE(csv.find("\n49,0,1\n"), std::string::npos);
    EXPECT_EQ(csv, rtf_csv(rtf_series([](const WindowSample& w) { return w.rul_target + 1.0; }, t, cfg, stats)));
}

TEST(Rtf, ShortTrajectoryIsError) {
    const Trajectory t = ramp_traj("r", 5);
    PipelineConfig cfg;
    cfg.n_stw = 8;
    const std::vector<Trajectory> trajs = {ramp_traj("x", 20)};
    const NormStats stats = fit_norm_stats(trajs, cfg.n_stw, 1);
    try {
        rtf_series([](const WindowSample&) { return 0.0; }, t, cfg, stats);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTrajectory);
    }
}
