#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "smallgeo/forest.hpp"
#include "smallgeo/vector_labels.hpp"

namespace smallgeo {

struct SvmConfig {
    double C = 1.0;
    double eps = 0.01;   // projected-gradient stopping tolerance
    int max_iter = 1000; // full passes over the coordinates
    std::uint64_t seed = 42;

    friend bool operator==(const SvmConfig&, const SvmConfig&) = default;
};

// One binary L1-loss soft-margin problem: rows of x (n x d, already
// standardized) with labels y in {+1, -1}.
struct BinaryProblem {
    int d = 0;
    std::vector<double> x;
    std::vector<std::int8_t> y;

    std::size_t size() const noexcept { return y.size(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(x).subspan(i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    }
};

// Dual solution of one binary problem.
//
// The bias is carried as an extra constant input of 1 inside the dual, so
// coordinate ascent needs no equality constraint; `bias_weight` is that
// coefficient. `bias` is the reported intercept: the mean of y_i - w.x_i over
// free support vectors (0 < alpha_i < C), or the midpoint of the bounds the
// KKT conditions place on it when there are none.
struct BinarySolution {
    std::vector<double> w;
    double bias_weight = 0.0;
    double bias = 0.0;
    std::vector<double> alpha;
    int iterations = 0;
    bool converged = false;
    double max_violation = 0.0;
    // Dual objective sum(alpha) - |w~|^2 / 2, logged after every pass when requested.
    std::vector<double> objective_trace;
};

struct BinarySolveOptions {
    double C = 1.0;
    double eps = 0.01;
    int max_iter = 1000;
    std::uint64_t seed = 42;
    bool record_trace = false;
};

BinarySolution solve_binary_svm(const BinaryProblem& problem, const BinarySolveOptions& options);

// Largest projected-gradient magnitude of the dual at (w~, alpha), recomputed
// from scratch.
double max_projected_gradient(const BinaryProblem& problem, std::span<const double> w, double bias_weight,
                              std::span<const double> alpha, double C);

double dual_objective(std::span<const double> alpha, std::span<const double> w, double bias_weight);

struct PairwiseClassifier {
    std::uint8_t positive = 0; // class voted for when w.z + b >= 0
    std::uint8_t negative = 0;
    std::vector<double> w;
    double b = 0.0;
    int iterations = 0;
    bool converged = false;
    double max_violation = 0.0;

    double decision(std::span<const float> z) const;

    friend bool operator==(const PairwiseClassifier&, const PairwiseClassifier&) = default;
};

class SvmModel {
  public:
    SvmModel(SvmConfig config, std::vector<std::uint8_t> classes, Scaler scaler, std::vector<PairwiseClassifier> pairs);

    const SvmConfig& config() const noexcept { return config_; }
    const std::vector<std::uint8_t>& classes() const noexcept { return classes_; }
    const Scaler& scaler() const noexcept { return scaler_; }
    const std::vector<PairwiseClassifier>& pairs() const noexcept { return pairs_; }
    int n_features() const noexcept { return static_cast<int>(scaler_.size()); }
    int class_index(std::uint8_t id) const noexcept { return index_of_[id]; }

    // Pairs that hit max_iter before reaching eps.
    std::size_t unconverged_pairs() const;

    friend bool operator==(const SvmModel&, const SvmModel&) = default;

  private:
    std::array<std::int16_t, 256> index_of_{};
    SvmConfig config_;
    std::vector<std::uint8_t> classes_;
    Scaler scaler_;
    std::vector<PairwiseClassifier> pairs_;
};

// Standardized binary problem for the class pair (positive, negative).
BinaryProblem make_pair_problem(const SampleSet& samples, const Scaler& scaler, std::uint8_t positive,
                                std::uint8_t negative);

struct SvmTraining {
    SvmModel model;
    std::vector<BinaryProblem> problems;   // aligned with model.pairs()
    std::vector<BinarySolution> solutions; // aligned with model.pairs()
};

// One-vs-one linear SVM. Features are standardized with a scaler fitted here
// and stored in the model.
SvmModel train_linear_svm(const SampleSet& samples, const SvmConfig& config);
SvmTraining train_linear_svm_detailed(const SampleSet& samples, const SvmConfig& config, bool record_trace = false);

// Applies the model's scaler once, then votes.
VoteResult svm_predict(const SvmModel& model, std::span<const float> features);
// Votes on an already standardized vector.
VoteResult svm_predict_scaled(const SvmModel& model, std::span<const float> scaled);

void save_svm(const SvmModel& model, std::ostream& out);
SvmModel load_svm(std::istream& in);
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

} // namespace smallgeo
