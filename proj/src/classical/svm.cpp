#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "smallgeo/binary_io.hpp"
#include "smallgeo/errors.hpp"
#include "smallgeo/log.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/svm.hpp"

namespace smallgeo {

namespace {

constexpr std::uint32_t kSvmFormatVersion = 1;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Projected gradient of the (minimization form of the) dual at coordinate i.
double projected(double gradient, double alpha, double C) {
    if (alpha <= 0.0) return std::min(gradient, 0.0);
    if (alpha >= C) return std::max(gradient, 0.0);
    return gradient;
}

double intercept(const BinaryProblem& p, std::span<const double> w, std::span<const double> alpha, double C,
                 double fallback) {
    double sum = 0.0;
    std::size_t free = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = dot(w, p.row(i));
        const double y = p.y[i];
        if (alpha[i] > 0.0 && alpha[i] < C) {
            sum += y - r;
            ++free;
        } else if (alpha[i] <= 0.0) {
            // y (r + b) >= 1
            if (y > 0) lower = std::max(lower, 1.0 - r);
            else upper = std::min(upper, -1.0 - r);
        } else {
            // y (r + b) <= 1
            if (y > 0) upper = std::min(upper, 1.0 - r);
            else lower = std::max(lower, -1.0 - r);
        }
    }
    if (free > 0) return sum / static_cast<double>(free);
    if (std::isfinite(lower) && std::isfinite(upper)) return 0.5 * (lower + upper);
    if (std::isfinite(lower)) return lower;
    if (std::isfinite(upper)) return upper;
    return fallback;
}

} // namespace

double max_projected_gradient(const BinaryProblem& problem, std::span<const double> w, double bias_weight,
                              std::span<const double> alpha, double C) {
    double worst = 0.0;
    for (std::size_t i = 0; i < problem.size(); ++i) {
        const double g = problem.y[i] * (dot(w, problem.row(i)) + bias_weight) - 1.0;
        worst = std::max(worst, std::abs(projected(g, alpha[i], C)));
    }
    return worst;
}

double dual_objective(std::span<const double> alpha, std::span<const double> w, double bias_weight) {
    const double sum_alpha = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    return sum_alpha - 0.5 * (dot(w, w) + bias_weight * bias_weight);
}

BinarySolution solve_binary_svm(const BinaryProblem& problem, const BinarySolveOptions& options) {
    const std::size_t n = problem.size();
    const auto d = static_cast<std::size_t>(problem.d);
    if (n == 0 || problem.x.size() != n * d) throw ValidationError("malformed binary SVM problem");
    if (!(options.C > 0.0) || !(options.eps > 0.0) || options.max_iter < 1) {
        throw ValidationError("SVM needs C > 0, eps > 0 and max_iter >= 1");
    }
    const double C = options.C;

    BinarySolution s;
    s.w.assign(d, 0.0);
    s.alpha.assign(n, 0.0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = problem.row(i);
        diag[i] = dot(xi, xi) + 1.0; // +1 for the constant bias input
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(options.seed);

    for (int iter = 0; iter < options.max_iter; ++iter) {
        rng.shuffle(order.begin(), order.end());
        double pass_violation = 0.0;
        for (const auto i : order) {
            const auto xi = problem.row(i);
            const double yi = problem.y[i];
            const double g = yi * (dot(s.w, xi) + s.bias_weight) - 1.0;
            const double pg = projected(g, s.alpha[i], C);
            pass_violation = std::max(pass_violation, std::abs(pg));
            if (pg == 0.0) continue;
            // Exact maximization of the dual along coordinate i, clipped to [0, C].
            const double old = s.alpha[i];
            s.alpha[i] = std::clamp(old - g / diag[i], 0.0, C);
            const double step = (s.alpha[i] - old) * yi;
            for (std::size_t k = 0; k < d; ++k) s.w[k] += step * xi[k];
            s.bias_weight += step;
        }
        s.iterations = iter + 1;
        if (options.record_trace) s.objective_trace.push_back(dual_objective(s.alpha, s.w, s.bias_weight));
        if (pass_violation <= options.eps) {
            // The in-pass maximum mixes gradients taken before later updates;
            // confirm with a fresh audit at the final point.
            s.max_violation = max_projected_gradient(problem, s.w, s.bias_weight, s.alpha, C);
            if (s.max_violation <= options.eps) {
                s.converged = true;
                break;
            }
        }
    }
    if (!s.converged) s.max_violation = max_projected_gradient(problem, s.w, s.bias_weight, s.alpha, C);
    s.bias = intercept(problem, s.w, s.alpha, C, s.bias_weight);
    return s;
}

double PairwiseClassifier::decision(std::span<const float> z) const {
    double s = b;
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * static_cast<double>(z[k]);
    return s;
}

SvmModel::SvmModel(SvmConfig config, std::vector<std::uint8_t> classes, Scaler scaler,
                   std::vector<PairwiseClassifier> pairs)
    : config_(config), classes_(std::move(classes)), scaler_(std::move(scaler)), pairs_(std::move(pairs)) {
    if (classes_.size() < 2 || !std::is_sorted(classes_.begin(), classes_.end()) ||
        std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
        throw ValidationError("SVM classes must be sorted, unique and at least two");
    }
    const std::size_t k = classes_.size();
    if (pairs_.size() != k * (k - 1) / 2) {
        throw ValidationError("SVM needs k(k-1)/2 pairwise classifiers");
    }
    if (scaler_.size() == 0 || scaler_.scale.size() != scaler_.size() || scaler_.passthrough.size() != scaler_.size()) {
        throw ValidationError("SVM scaler is malformed");
    }
    index_of_.fill(-1);
    for (std::size_t i = 0; i < k; ++i) index_of_[classes_[i]] = static_cast<std::int16_t>(i);
    for (const auto& p : pairs_) {
        if (index_of_[p.positive] < 0 || index_of_[p.negative] < 0 || p.positive == p.negative) {
            throw ValidationError("pairwise classifier references an unknown class");
        }
        if (p.w.size() != scaler_.size()) throw ValidationError("pairwise weight vector has the wrong length");
        if (!std::isfinite(p.b) || std::any_of(p.w.begin(), p.w.end(), [](double v) { return !std::isfinite(v); })) {
            throw ValidationError("pairwise classifier has non-finite weights");
        }
    }
}

std::size_t SvmModel::unconverged_pairs() const {
    return static_cast<std::size_t>(
        std::count_if(pairs_.begin(), pairs_.end(), [](const PairwiseClassifier& p) { return !p.converged; }));
}

BinaryProblem make_pair_problem(const SampleSet& samples, const Scaler& scaler, std::uint8_t positive,
                                std::uint8_t negative) {
    BinaryProblem p;
    p.d = samples.n_features();
    std::vector<float> z(static_cast<std::size_t>(p.d));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto id = samples.label(i);
        if (id != positive && id != negative) continue;
        scaler.apply(samples.row(i), z);
        p.x.insert(p.x.end(), z.begin(), z.end());
        p.y.push_back(id == positive ? 1 : -1);
    }
    return p;
}

SvmTraining train_linear_svm_detailed(const SampleSet& samples, const SvmConfig& config, bool record_trace) {
    if (samples.empty()) throw ValidationError("cannot train an SVM on an empty sample set");
    const auto classes = samples.classes();
    if (classes.size() < 2) {
        throw DegenerateModelError("SVM needs at least two classes, got " + std::to_string(classes.size()));
    }
    Scaler scaler = fit_scaler(samples);

    std::vector<PairwiseClassifier> pairs;
    std::vector<BinaryProblem> problems;
    std::vector<BinarySolution> solutions;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            auto problem = make_pair_problem(samples, scaler, classes[i], classes[j]);
            const BinarySolveOptions options{config.C, config.eps, config.max_iter,
                                             derive_seed(config.seed, i * 256 + j), record_trace};
            auto solution = solve_binary_svm(problem, options);
            if (!solution.converged) {
                log::warn("SVM pair (" + std::to_string(classes[i]) + ", " + std::to_string(classes[j]) +
                          ") stopped at max_iter with projected-gradient violation " +
                          std::to_string(solution.max_violation) + " > eps");
            }
            pairs.push_back({classes[i], classes[j], solution.w, solution.bias, solution.iterations,
                             solution.converged, solution.max_violation});
            problems.push_back(std::move(problem));
            solutions.push_back(std::move(solution));
        }
    }
    return {SvmModel(config, classes, std::move(scaler), std::move(pairs)), std::move(problems), std::move(solutions)};
}

SvmModel train_linear_svm(const SampleSet& samples, const SvmConfig& config) {
    return std::move(train_linear_svm_detailed(samples, config).model);
}

VoteResult svm_predict_scaled(const SvmModel& model, std::span<const float> scaled) {
    VoteResult result{0, std::vector<std::uint32_t>(model.classes().size(), 0)};
    for (const auto& p : model.pairs()) {
        const auto winner = p.decision(scaled) >= 0.0 ? p.positive : p.negative;
        ++result.votes[static_cast<std::size_t>(model.class_index(winner))];
    }
    result.class_id = model.classes()[argmax_first(std::span<const std::uint32_t>(result.votes))];
    return result;
}

VoteResult svm_predict(const SvmModel& model, std::span<const float> features) {
    if (features.size() != static_cast<std::size_t>(model.n_features())) {
        throw DimensionError("feature vector has " + std::to_string(features.size()) + " values, model expects " +
                             std::to_string(model.n_features()));
    }
    for (float v : features) {
        if (std::isnan(v)) throw InvalidInputError("NaN in feature vector");
    }
    const auto z = model.scaler().apply(features);
    return svm_predict_scaled(model, z);
}

void save_svm(const SvmModel& model, std::ostream& out) {
    BinaryWriter w(out);
    w.put_magic("SGSV");
    w.put<std::uint32_t>(kSvmFormatVersion);
    const auto& c = model.config();
    w.put(c.C);
    w.put(c.eps);
    w.put<std::int32_t>(c.max_iter);
    w.put<std::uint64_t>(c.seed);
    w.put_vector(model.classes());
    const auto& s = model.scaler();
    w.put_vector(s.mean);
    w.put_vector(s.scale);
    std::vector<std::uint8_t> passthrough(s.passthrough.begin(), s.passthrough.end());
    w.put_vector(passthrough);
    w.put<std::uint64_t>(model.pairs().size());
    for (const auto& p : model.pairs()) {
        w.put(p.positive);
        w.put(p.negative);
        w.put_vector(p.w);
        w.put(p.b);
        w.put<std::int32_t>(p.iterations);
        w.put<std::uint8_t>(p.converged ? 1 : 0);
        w.put(p.max_violation);
    }
    w.check();
}

SvmModel load_svm(std::istream& in) {
    BinaryReader r(in);
    r.expect_magic("SGSV", "linear SVM model");
    const auto version = r.get<std::uint32_t>();
    if (version != kSvmFormatVersion) {
        throw UnsupportedFormatError("unsupported SVM model version " + std::to_string(version));
    }
    SvmConfig c;
    c.C = r.get<double>();
    c.eps = r.get<double>();
    c.max_iter = r.get<std::int32_t>();
    c.seed = r.get<std::uint64_t>();
    auto classes = r.get_vector<std::uint8_t>(255);
    Scaler s;
    s.mean = r.get_vector<double>(1u << 16);
    s.scale = r.get_vector<double>(1u << 16);
    const auto passthrough = r.get_vector<std::uint8_t>(1u << 16);
    s.passthrough.assign(passthrough.begin(), passthrough.end());
    const auto n_pairs = r.get<std::uint64_t>();
    if (n_pairs > 255 * 254 / 2) throw CorruptFileError("pair count out of range");
    std::vector<PairwiseClassifier> pairs(static_cast<std::size_t>(n_pairs));
    for (auto& p : pairs) {
        p.positive = r.get<std::uint8_t>();
        p.negative = r.get<std::uint8_t>();
        p.w = r.get_vector<double>(1u << 16);
        p.b = r.get<double>();
        p.iterations = r.get<std::int32_t>();
        p.converged = r.get<std::uint8_t>() != 0;
        p.max_violation = r.get<double>();
    }
    try {
        return SvmModel(c, std::move(classes), std::move(s), std::move(pairs));
    } catch (const ValidationError& e) {
        throw CorruptFileError(std::string("invalid SVM model: ") + e.what());
    }
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    save_svm(model, out);
}

SvmModel load_svm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_svm(in);
}

} // namespace smallgeo
