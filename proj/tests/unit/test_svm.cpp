#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "smallgeo/classify.hpp"
#include "smallgeo/errors.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/svm.hpp"

using namespace smallgeo;

namespace {

// Two overlapping Gaussian blobs in d dimensions, labels +1 / -1.
BinaryProblem blobs(int n, int d, double sep, std::uint64_t seed) {
    Rng rng(seed);
    BinaryProblem p;
    p.d = d;
    for (int i = 0; i < n; ++i) {
        const std::int8_t y = i % 2 == 0 ? 1 : -1;
        for (int k = 0; k < d; ++k) p.x.push_back(rng.normal() + (k == 0 ? y * sep : 0.0));
        p.y.push_back(y);
    }
    return p;
}

struct Recomputed {
    std::vector<double> w;
    double bw = 0.0;
};

// w~ = sum alpha_i y_i [x_i, 1], rebuilt from alpha alone.
Recomputed rebuild(const BinaryProblem& p, const std::vector<double>& alpha) {
    Recomputed r;
    r.w.assign(static_cast<std::size_t>(p.d), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (int k = 0; k < p.d; ++k) r.w[k] += alpha[i] * p.y[i] * p.row(i)[k];
        r.bw += alpha[i] * p.y[i];
    }
    return r;
}

double margin(const BinaryProblem& p, const Recomputed& r, std::size_t i) {
    double s = r.bw;
    for (int k = 0; k < p.d; ++k) s += r.w[k] * p.row(i)[k];
    return p.y[i] * s;
}

double primal(const BinaryProblem& p, const Recomputed& r, double C) {
    double v = r.bw * r.bw;
    for (double x : r.w) v += x * x;
    v *= 0.5;
    for (std::size_t i = 0; i < p.size(); ++i) v += C * std::max(0.0, 1.0 - margin(p, r, i));
    return v;
}

double dual(const BinaryProblem& p, const std::vector<double>& alpha) {
    auto r = rebuild(p, alpha);
    double q = r.bw * r.bw;
    for (double x : r.w) q += x * x;
    double s = 0.0;
    for (double a : alpha) s += a;
    return s - 0.5 * q;
}

double kkt_violation(const BinaryProblem& p, const std::vector<double>& alpha, double C) {
    auto r = rebuild(p, alpha);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = margin(p, r, i) - 1.0;
        double pg = g;
        if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
        if (alpha[i] >= C) pg = std::max(g, 0.0);
        worst = std::max(worst, std::abs(pg));
    }
    return worst;
}

SampleSet three_class_samples(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> f;
    std::vector<std::uint8_t> y;
    const double centers[3][2] = {{0, 0}, {6, 0}, {0, 6}};
    for (int i = 0; i < 150; ++i) {
        const int c = i % 3;
        f.push_back(static_cast<float>(100 + centers[c][0] + rng.normal()));
        f.push_back(static_cast<float>(-50 + centers[c][1] + rng.normal()));
        y.push_back(static_cast<std::uint8_t>(2 * c + 1));
    }
    return SampleSet(2, f, y);
}

} // namespace

TEST(BinarySvm, TwoPointClosedForm) {
    BinaryProblem p{1, {1.0, -1.0}, {1, -1}};
    auto s = solve_binary_svm(p, {.C = 1.0, .eps = 1e-9});
    EXPECT_TRUE(s.converged);
    EXPECT_NEAR(s.alpha[0], 0.5, 1e-9);
    EXPECT_NEAR(s.alpha[1], 0.5, 1e-9);
    EXPECT_NEAR(s.w[0], 1.0, 1e-9);
    EXPECT_NEAR(s.bias, 0.0, 1e-9);
}

TEST(BinarySvm, KktHoldsAtConvergence) {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto p = blobs(200, 4, 1.0, seed);
        auto s = solve_binary_svm(p, {.C = 1.0, .eps = 0.01, .seed = seed});
        ASSERT_TRUE(s.converged);
        EXPECT_LE(kkt_violation(p, s.alpha, 1.0), 0.01);
        for (double a : s.alpha) {
            EXPECT_GE(a, 0.0);
            EXPECT_LE(a, 1.0);
        }
    }
}

TEST(BinarySvm, SolutionIsConsistentWithAlpha) {
    auto p = blobs(120, 3, 1.5, 4);
    auto s = solve_binary_svm(p, {.C = 0.5, .eps = 1e-4});
    auto r = rebuild(p, s.alpha);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.w[k], r.w[k], 1e-9);
    EXPECT_NEAR(s.bias_weight, r.bw, 1e-9);
    EXPECT_NEAR(max_projected_gradient(p, s.w, s.bias_weight, s.alpha, 0.5), kkt_violation(p, s.alpha, 0.5), 1e-9);
}

TEST(BinarySvm, DualityGapClosesWithTightEps) {
    auto p = blobs(80, 2, 1.0, 5);
    auto s = solve_binary_svm(p, {.C = 1.0, .eps = 1e-8, .max_iter = 100000});
    ASSERT_TRUE(s.converged);
    const double pr = primal(p, rebuild(p, s.alpha), 1.0);
    const double du = dual(p, s.alpha);
    EXPECT_GE(pr, du - 1e-9);
    EXPECT_LT(pr - du, 1e-5 * std::max(1.0, pr));
}

TEST(BinarySvm, DualObjectiveNeverDecreases) {
    auto p = blobs(200, 8, 0.7, 6);
    auto s = solve_binary_svm(p, {.C = 1.0, .eps = 1e-4, .record_trace = true});
    ASSERT_GE(s.objective_trace.size(), 2u);
    for (std::size_t i = 1; i < s.objective_trace.size(); ++i) {
        EXPECT_GE(s.objective_trace[i], s.objective_trace[i - 1] - 1e-9 * std::abs(s.objective_trace[i - 1]));
    }
    EXPECT_NEAR(s.objective_trace.back(), dual(p, s.alpha), 1e-6);
}

TEST(BinarySvm, IterationCapReportsNonConvergence) {
    auto p = blobs(200, 4, 0.2, 7);
    auto s = solve_binary_svm(p, {.C = 10.0, .eps = 1e-12, .max_iter = 2});
    EXPECT_FALSE(s.converged);
    EXPECT_EQ(s.iterations, 2);
    EXPECT_GT(s.max_violation, 1e-12);
}

TEST(BinarySvm, RejectsBadOptions) {
    auto p = blobs(10, 2, 1.0, 8);
    EXPECT_THROW(solve_binary_svm(p, {.C = 0.0}), ValidationError);
    EXPECT_THROW(solve_binary_svm(p, {.eps = -1.0}), ValidationError);
}

TEST(Svm, OneVsOneSeparatesBlobs) {
    auto train = three_class_samples(1);
    auto test = three_class_samples(2);
    auto detailed = train_linear_svm_detailed(train, SvmConfig{});
    const auto& m = detailed.model;
    ASSERT_EQ(m.pairs().size(), 3u);
    EXPECT_EQ(m.unconverged_pairs(), 0u);
    for (std::size_t k = 0; k < detailed.problems.size(); ++k) {
        EXPECT_LE(kkt_violation(detailed.problems[k], detailed.solutions[k].alpha, 1.0), 0.01);
    }
    std::size_t ok = 0;
    for (std::size_t i = 0; i < test.size(); ++i) ok += svm_predict(m, test.row(i)).class_id == test.label(i);
    EXPECT_GT(static_cast<double>(ok) / static_cast<double>(test.size()), 0.97);
}

TEST(Svm, PairProblemIsStandardized) {
    auto s = three_class_samples(3);
    auto sc = fit_scaler(s);
    auto p = make_pair_problem(s, sc, 1, 5);
    EXPECT_EQ(p.size(), 100u);
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_TRUE(p.y[i] == 1 || p.y[i] == -1);
        EXPECT_LT(std::abs(p.row(i)[0]), 10.0);
    }
}

TEST(Svm, DeterministicAndRoundTrips) {
    auto s = three_class_samples(4);
    auto a = train_linear_svm(s, SvmConfig{});
    EXPECT_EQ(a, train_linear_svm(s, SvmConfig{}));
    std::stringstream ss;
    save_svm(a, ss);
    EXPECT_EQ(load_svm(ss), a);
    std::stringstream bad("SGSVgarbage");
    EXPECT_THROW(load_svm(bad), Error);
}

TEST(Svm, RejectsBadInput) {
    SampleSet one(1, {1.0f, 2.0f}, {4, 4});
    EXPECT_THROW(train_linear_svm(one, SvmConfig{}), DegenerateModelError);
    auto m = train_linear_svm(three_class_samples(5), SvmConfig{});
    std::vector<float> wrong{1.0f};
    EXPECT_THROW(svm_predict(m, wrong), DimensionError);
    std::vector<float> nan{1.0f, std::nanf("")};
    EXPECT_THROW(svm_predict(m, nan), InvalidInputError);
}

TEST(Svm, PredictRaster) {
    auto m = train_linear_svm(three_class_samples(6), SvmConfig{});
    RasterStack r(3, 1, 2, {100.0f, 106.0f, -1.0f, -50.0f, -50.0f, -50.0f}, kIdentityGeoTransform, -1.0f);
    auto out = predict_raster(m, r);
    EXPECT_EQ(out.at(0, 0), 1);
    EXPECT_EQ(out.at(1, 0), 3);
    EXPECT_EQ(out.at(2, 0), 0);
}
