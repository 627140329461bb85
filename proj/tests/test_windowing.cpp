#include "slat/windowing.hpp"

#include <gtest/gtest.h>

#include <vector>

#include "oracles.hpp"

using namespace slat;

namespace {

Trajectory make_traj(const std::string& id, const Matrix& ch) {
    Trajectory t;
    t.id = id;
    t.channels = ch;
    t.failure_index = ch.rows() - 1;
    return t;
}

Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
    return Matrix::NullaryExpr(rows, cols, [&] { return scale * rng.normal(); });
}

}  // namespace

TEST(SlideWindows, CountFormulaExamples) {
    const auto w = slide_windows(6, 3, 1);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_EQ(w[0], (Window{0, 3}));
    EXPECT_EQ(w[3], (Window{3, 6}));

    const auto exact = slide_windows(5, 5, 1);
    ASSERT_EQ(exact.size(), 1u);
    EXPECT_EQ(exact[0], (Window{0, 5}));

    const auto strided = slide_windows(10, 4, 3);
    ASSERT_EQ(strided.size(), 3u);
    EXPECT_EQ(strided[0].start, 0);
    EXPECT_EQ(strided[1].start, 3);
    EXPECT_EQ(strided[2].start, 6);
}

TEST(SlideWindows, MatchesEnumerationOracle) {
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        const Index n = 2 + static_cast<Index>(rng.below(20));
        const Index length = n + static_cast<Index>(rng.below(60));
        const Index stride = 1 + static_cast<Index>(rng.below(12));
        const auto w = slide_windows(length, n, stride);
        ASSERT_EQ(static_cast<long long>(w.size()), oracle::window_count(length, n, stride));
        for (std::size_t k = 0; k < w.size(); ++k) {
            EXPECT_EQ(w[k].start, static_cast<Index>(k) * stride);
            EXPECT_EQ(w[k].end - w[k].start, n);
            EXPECT_LE(w[k].end, length);
        }
    }
}

TEST(SlideWindows, Errors) {
    try {
        slide_windows(4, 5, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyTrajectory);
    }
    try {
        slide_windows(10, 3, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
    EXPECT_THROW(slide_windows(10, 1, 1), Error);
}

TEST(Descriptors, Examples) {
    Matrix ramp(4, 1);
    ramp << 1, 2, 3, 4;
    Vector d = compute_descriptors(ramp);
    EXPECT_DOUBLE_EQ(d(0), 2.5);
    EXPECT_NEAR(d(1), 1.0, 1e-12);

    Matrix flat = Matrix::Constant(3, 1, 5.0);
    d = compute_descriptors(flat);
    EXPECT_DOUBLE_EQ(d(0), 5.0);
    EXPECT_NEAR(d(1), 0.0, 1e-12);

    Matrix quad(3, 1);
    quad << 0, 1, 4;
    d = compute_descriptors(quad);
    EXPECT_NEAR(d(0), 5.0 / 3.0, 1e-12);
    EXPECT_NEAR(d(1), 2.0, 1e-12);
}

TEST(Descriptors, LayoutMeansThenSlopes) {
    Matrix w(3, 2);
    w << 0, 10, 1, 8, 2, 6;
    const Vector d = compute_descriptors(w);
    ASSERT_EQ(d.size(), 4);
    EXPECT_NEAR(d(0), 1.0, 1e-12);
    EXPECT_NEAR(d(1), 8.0, 1e-12);
    EXPECT_NEAR(d(2), 1.0, 1e-12);
    EXPECT_NEAR(d(3), -2.0, 1e-12);
}

TEST(Descriptors, SlopeMatchesNormalEquationOracle) {
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        const Index n = 2 + static_cast<Index>(rng.below(50));
        const Index s = 1 + static_cast<Index>(rng.below(5));
        const Matrix w = random_matrix(rng, n, s, 100.0);
        const Vector d = compute_descriptors(w);
        for (Index c = 0; c < s; ++c) {
            std::vector<double> y(w.col(c).data(), w.col(c).data() + n);
            const double expected = oracle::ls_slope(y);
            EXPECT_NEAR(d(s + c), expected, 1e-10 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST(Descriptors, RejectsNonFinite) {
    Matrix w = Matrix::Zero(3, 1);
    w(1, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        compute_descriptors(w);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    }
}

TEST(Labels, PiecewiseLinear) {
    const Trajectory t = make_traj("a", Matrix::Zero(201, 1));
    const Vector y = label_rul(t, LabelConfig{125.0});
    EXPECT_DOUBLE_EQ(y(200), 0.0);
    EXPECT_DOUBLE_EQ(y(150), 50.0);
    EXPECT_DOUBLE_EQ(y(0), 125.0);
    for (Index i = 1; i < y.size(); ++i) EXPECT_LE(y(i), y(i - 1));
}

TEST(Labels, MatchOracleRandom) {
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const Index length = 2 + static_cast<Index>(rng.below(400));
        const double cap = rng.uniform(1.0, 300.0);
        const Vector y = label_rul(make_traj("r", Matrix::Zero(length, 1)), LabelConfig{cap});
        for (Index t = 0; t < length; ++t) {
            EXPECT_EQ(y(t), oracle::rul_label(length - 1, t, cap));
        }
    }
}

TEST(Trajectory, Validation) {
    Trajectory t = make_traj("x", Matrix::Ones(5, 2));
    EXPECT_NO_THROW(validate_trajectory(t));
    t.failure_index = 3;
    EXPECT_THROW(validate_trajectory(t), Error);
    t = make_traj("x", Matrix::Ones(1, 2));
    EXPECT_THROW(validate_trajectory(t), Error);
    t = make_traj("x", Matrix::Ones(4, 2));
    t.channels(2, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(validate_trajectory(t), Error);
}

TEST(NormStats, PopulationStdAndDegenerateRule) {
    Matrix ch(3, 2);
    ch << 2, 7, 4, 7, 6, 7;
    const std::vector<Trajectory> trajs = {make_traj("a", ch)};
    const NormStats s = fit_norm_stats(trajs, 2, 1);
    EXPECT_NEAR(s.channel_mean(0), 4.0, 1e-12);
    EXPECT_NEAR(s.channel_std(0), std::sqrt(8.0 / 3.0), 1e-12);
    EXPECT_NEAR(s.channel_std(0), 1.63299, 1e-5);
    EXPECT_NEAR(s.channel_mean(1), 7.0, 1e-12);
    EXPECT_EQ(s.channel_std(1), 1.0);
    EXPECT_EQ(s.descriptor_mean.size(), 4);
}

TEST(NormStats, EmptyInputRejected) {
    const std::vector<Trajectory> none;
    try {
        fit_norm_stats(none, 2, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
}

TEST(NormStats, ZScoreIdentityAndInverse) {
    Rng rng(3);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 3; ++i) {
        Matrix ch = random_matrix(rng, 40 + i * 7, 4, 3.0);
        ch.col(1).array() += 50.0;
        trajs.push_back(make_traj("t" + std::to_string(i), ch));
    }
    const NormStats s = fit_norm_stats(trajs, 5, 1);
    Index rows = 0;
    for (const auto& t : trajs) rows += t.length();
    Matrix all(rows, 4);
    Index r = 0;
    for (const auto& t : trajs) {
        all.middleRows(r, t.length()) = s.normalize_channels(t.channels);
        r += t.length();
    }
    for (Index c = 0; c < 4; ++c) {
        const double mean = all.col(c).mean();
        const double var = (all.col(c).array() - mean).square().mean();
        EXPECT_NEAR(mean, 0.0, 1e-9);
        EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9);
    }
    const Matrix back = s.denormalize_channels(s.normalize_channels(trajs[0].channels));
    EXPECT_LT((back - trajs[0].channels).cwiseAbs().maxCoeff(), 1e-9);
    const Vector d = Vector::LinSpaced(8, -3, 4);
    EXPECT_LT((s.denormalize_descriptors(s.normalize_descriptors(d)) - d).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dataset, TargetsAtWindowEnd) {
    Matrix ch(6, 1);
    ch << 1, 2, 3, 4, 5, 6;
    const std::vector<Trajectory> trajs = {make_traj("a", ch)};
    PipelineConfig cfg;
    cfg.n_stw = 3;
    cfg.stride = 1;
    const NormStats stats = fit_norm_stats(trajs, cfg.n_stw, cfg.stride);
    const auto samples = build_dataset(trajs, cfg, stats);
    ASSERT_EQ(samples.size(), 4u);
    const double expected[] = {3, 2, 1, 0};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(samples[i].rul_target, expected[i]);
        EXPECT_EQ(samples[i].end_index, static_cast<Index>(i) + 2);
        EXPECT_EQ(samples[i].trajectory_id, "a");
    }
}

TEST(Dataset, DescriptorsFromRawValues) {
    Rng rng(21);
    Matrix ch = random_matrix(rng, 30, 3, 5.0);
    ch.col(0).array() += 100.0;
    const std::vector<Trajectory> trajs = {make_traj("a", ch)};
    PipelineConfig cfg;
    cfg.n_stw = 8;
    const NormStats stats = fit_norm_stats(trajs, cfg.n_stw, 1);
    const auto samples = build_dataset(trajs, cfg, stats);
    const WindowSample& s = samples[5];
    const Matrix raw = ch.middleRows(s.end_index - cfg.n_stw + 1, cfg.n_stw);
    const Vector desc = stats.denormalize_descriptors(s.descriptors);
    EXPECT_LT((desc - compute_descriptors(raw)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((stats.denormalize_channels(s.values) - raw).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dataset, DisjointWindowsWhenStrideEqualsWindow) {
    const std::vector<Trajectory> trajs = {make_traj("a", Matrix::Random(20, 2))};
    PipelineConfig cfg;
    cfg.n_stw = 5;
    cfg.stride = 5;
    const auto samples = build_dataset(trajs, cfg, fit_norm_stats(trajs, 5, 5));
    ASSERT_EQ(samples.size(), 4u);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        EXPECT_EQ(samples[i].end_index - samples[i - 1].end_index, 5);
    }
}

TEST(Dataset, TestSplitUsesTrainStats) {
    Rng rng(1);
    const std::vector<Trajectory> train = {make_traj("a", random_matrix(rng, 50, 2))};
    Matrix shifted = random_matrix(rng, 50, 2);
    shifted.array() += 3.0;
    const std::vector<Trajectory> test = {make_traj("b", shifted)};
    PipelineConfig cfg;
    cfg.n_stw = 5;
    const NormStats stats = fit_norm_stats(train, 5, 1);
    const auto samples = build_dataset(test, cfg, stats);
    EXPECT_GT(std::abs(stats.normalize_channels(shifted).col(0).mean()), 1.0);
    EXPECT_FALSE(samples.empty());
}

TEST(Dataset, Deterministic) {
    Rng rng(8);
    const std::vector<Trajectory> trajs = {make_traj("a", random_matrix(rng, 40, 3)),
                                           make_traj("b", random_matrix(rng, 33, 3))};
    PipelineConfig cfg;
    cfg.n_stw = 7;
    cfg.stride = 2;
    const NormStats s1 = fit_norm_stats(trajs, 7, 2);
    const NormStats s2 = fit_norm_stats(trajs, 7, 2);
    const auto a = build_dataset(trajs, cfg, s1);
    const auto b = build_dataset(trajs, cfg, s2);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(a[i].values == b[i].values);
        EXPECT_TRUE(a[i].descriptors == b[i].descriptors);
        EXPECT_EQ(a[i].rul_target, b[i].rul_target);
    }
}
