#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "smallgeo/binary_io.hpp"
#include "smallgeo/errors.hpp"
#include "smallgeo/forest.hpp"
#include "smallgeo/random.hpp"

namespace smallgeo {

namespace {

constexpr std::uint32_t kForestFormatVersion = 1;

class TreeBuilder {
  public:
    TreeBuilder(const SampleSet& samples, std::span<const int> class_index, std::span<const std::uint8_t> classes,
                const ForestConfig& config, int mtry, Rng& rng)
        : samples_(samples), class_index_(class_index), classes_(classes),
          n_classes_(static_cast<int>(classes.size())), config_(config), mtry_(mtry),
          rng_(rng), features_(static_cast<std::size_t>(samples.n_features())) {
        std::iota(features_.begin(), features_.end(), 0);
    }

    DecisionTree build(std::vector<std::uint32_t> rows) {
        DecisionTree tree;
        rows_ = std::move(rows);
        grow(tree, 0, rows_.size(), 0);
        return tree;
    }

  private:
    struct Split {
        int feature = -1;
        float threshold = 0.0f;
        double score = 0.0;
    };

    float value(std::uint32_t row, int feature) const { return samples_.row(row)[feature]; }

    std::int32_t grow(DecisionTree& tree, std::size_t begin, std::size_t end, int depth) {
        const std::size_t n = end - begin;
        std::vector<std::size_t> counts(n_classes_, 0);
        for (std::size_t i = begin; i < end; ++i) ++counts[class_index_[rows_[i]]];

        const auto node_id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].class_id = classes_of_counts(counts);

        const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
        if (pure || n < 2 * static_cast<std::size_t>(config_.min_leaf) || depth >= config_.max_depth) return node_id;

        const Split split = best_split(begin, end, counts);
        if (split.feature < 0) return node_id;

        const auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                               rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                               [&](std::uint32_t r) { return value(r, split.feature) <= split.threshold; });
        const auto split_at = static_cast<std::size_t>(mid - rows_.begin());

        tree.nodes[node_id].feature = split.feature;
        tree.nodes[node_id].threshold = split.threshold;
        const auto left = grow(tree, begin, split_at, depth + 1);
        const auto right = grow(tree, split_at, end, depth + 1);
        tree.nodes[node_id].left = left;
        tree.nodes[node_id].right = right;
        return node_id;
    }

    std::uint8_t classes_of_counts(const std::vector<std::size_t>& counts) const {
        return classes_[argmax_first(std::span<const std::size_t>(counts))];
    }

    // Minimizing weighted Gini impurity is equivalent to maximizing
    // sum_c L_c^2 / n_L + sum_c R_c^2 / n_R.
    Split best_split(std::size_t begin, std::size_t end, const std::vector<std::size_t>& counts) {
        const std::size_t n = end - begin;
        double parent_sq = 0.0;
        for (auto c : counts) parent_sq += static_cast<double>(c) * static_cast<double>(c);
        const double parent_score = parent_sq / static_cast<double>(n);

        // Draw min(mtry, d) candidate features without replacement.
        const std::size_t d = features_.size();
        for (std::size_t i = 0; i < static_cast<std::size_t>(mtry_); ++i) {
            std::swap(features_[i], features_[i + rng_.uniform_index(d - i)]);
        }

        Split best;
        best.score = parent_score + 1e-9 * std::max(1.0, parent_score);
        const auto min_leaf = static_cast<std::size_t>(config_.min_leaf);
        std::vector<std::size_t> left(n_classes_);
        std::vector<std::size_t> right(n_classes_);
        for (int k = 0; k < mtry_; ++k) {
            const int f = features_[static_cast<std::size_t>(k)];
            column_.clear();
            for (std::size_t i = begin; i < end; ++i) {
                const auto r = rows_[i];
                column_.push_back({value(r, f), class_index_[r]});
            }
            std::sort(column_.begin(), column_.end());
            if (column_.front().first == column_.back().first) continue;

            std::fill(left.begin(), left.end(), 0);
            right = counts;
            double left_sq = 0.0;
            double right_sq = parent_sq;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const int c = column_[i].second;
                left_sq += 2.0 * static_cast<double>(left[c]) + 1.0;
                right_sq -= 2.0 * static_cast<double>(right[c]) - 1.0;
                ++left[c];
                --right[c];
                const float lo = column_[i].first;
                const float hi = column_[i + 1].first;
                if (!(lo < hi)) continue;
                const std::size_t n_left = i + 1;
                const std::size_t n_right = n - n_left;
                if (n_left < min_leaf || n_right < min_leaf) continue;
                const double score =
                    left_sq / static_cast<double>(n_left) + right_sq / static_cast<double>(n_right);
                if (score > best.score) {
                    // Midpoint between consecutive distinct values; if it rounds
                    // up to `hi` in float, fall back to `lo` so the split holds.
                    auto threshold = static_cast<float>((static_cast<double>(lo) + static_cast<double>(hi)) * 0.5);
                    if (!(threshold < hi)) threshold = lo;
                    best = {f, threshold, score};
                }
            }
        }
        return best;
    }

    const SampleSet& samples_;
    std::span<const int> class_index_;
    std::span<const std::uint8_t> classes_;
    int n_classes_;
    const ForestConfig& config_;
    int mtry_;
    Rng& rng_;
    std::vector<int> features_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::pair<float, int>> column_;
};

} // namespace

std::uint8_t DecisionTree::route(std::span<const float> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& node = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                 : node.right);
    }
    return nodes[i].class_id;
}

int DecisionTree::depth() const {
    // Nodes are stored in preorder, so children always follow their parent.
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes[i].is_leaf()) {
            level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

ForestModel::ForestModel(ForestConfig config, std::vector<std::uint8_t> classes, int n_features,
                         std::vector<DecisionTree> trees)
    : config_(config), classes_(std::move(classes)), n_features_(n_features), trees_(std::move(trees)) {
    if (n_features_ < 1) throw ValidationError("forest needs at least one feature");
    if (classes_.empty() || !std::is_sorted(classes_.begin(), classes_.end()) ||
        std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
        throw ValidationError("forest classes must be nonempty, sorted and unique");
    }
    if (trees_.empty()) throw ValidationError("forest needs at least one tree");
    index_of_.fill(-1);
    for (std::size_t k = 0; k < classes_.size(); ++k) index_of_[classes_[k]] = static_cast<std::int16_t>(k);
    for (const auto& tree : trees_) {
        if (tree.nodes.empty()) throw ValidationError("empty decision tree");
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            const auto& node = tree.nodes[i];
            if (node.is_leaf()) {
                if (index_of_[node.class_id] < 0) {
                    throw ValidationError("leaf class id " + std::to_string(node.class_id) + " not in model classes");
                }
                continue;
            }
            if (node.feature >= n_features_) throw ValidationError("split feature index out of range");
            const auto count = static_cast<std::int32_t>(tree.nodes.size());
            if (node.left <= static_cast<std::int32_t>(i) || node.right <= static_cast<std::int32_t>(i) ||
                node.left >= count || node.right >= count) {
                throw ValidationError("malformed tree: child index out of range");
            }
        }
    }
}

int ForestModel::effective_mtry() const noexcept { return std::max(1, std::min(config_.mtry, n_features_)); }

ForestModel train_forest(const SampleSet& samples, const ForestConfig& config) {
    if (samples.empty()) throw ValidationError("cannot train a forest on an empty sample set");
    if (config.n_trees < 1 || config.mtry < 1 || config.min_leaf < 1 || config.max_depth < 0) {
        throw ValidationError("invalid forest configuration");
    }
    const auto classes = samples.classes();
    if (classes.size() < 2) {
        throw DegenerateModelError("random forest needs at least two classes, got " + std::to_string(classes.size()));
    }
    std::array<int, 256> index_of{};
    for (std::size_t k = 0; k < classes.size(); ++k) index_of[classes[k]] = static_cast<int>(k);
    std::vector<int> class_index(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) class_index[i] = index_of[samples.label(i)];

    const int mtry = std::min(config.mtry, samples.n_features());
    const std::size_t n = samples.size();
    std::vector<DecisionTree> trees;
    trees.reserve(static_cast<std::size_t>(config.n_trees));
    for (int t = 0; t < config.n_trees; ++t) {
        // Per-tree stream: results do not depend on the order trees are grown in.
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::uint32_t> rows(n);
        for (auto& r : rows) r = static_cast<std::uint32_t>(rng.uniform_index(n));
        TreeBuilder builder(samples, class_index, classes, config, mtry, rng);
        trees.push_back(builder.build(std::move(rows)));
    }
    return ForestModel(config, classes, samples.n_features(), std::move(trees));
}

VoteResult forest_predict(const ForestModel& model, std::span<const float> features) {
    if (features.size() != static_cast<std::size_t>(model.n_features())) {
        throw DimensionError("feature vector has " + std::to_string(features.size()) + " values, model expects " +
                             std::to_string(model.n_features()));
    }
    for (float v : features) {
        if (std::isnan(v)) throw InvalidInputError("NaN in feature vector");
    }
    VoteResult result{0, std::vector<std::uint32_t>(model.classes().size(), 0)};
    for (const auto& tree : model.trees()) ++result.votes[static_cast<std::size_t>(model.class_index(tree.route(features)))];
    result.class_id = model.classes()[argmax_first(std::span<const std::uint32_t>(result.votes))];
    return result;
}

void save_forest(const ForestModel& model, std::ostream& out) {
    BinaryWriter w(out);
    w.put_magic("SGRF");
    w.put<std::uint32_t>(kForestFormatVersion);
    const auto& c = model.config();
    w.put<std::int32_t>(c.n_trees);
    w.put<std::int32_t>(c.mtry);
    w.put<std::int32_t>(c.min_leaf);
    w.put<std::int32_t>(c.max_depth);
    w.put<std::uint64_t>(c.seed);
    w.put_vector(model.classes());
    w.put<std::int32_t>(model.n_features());
    w.put<std::uint64_t>(model.trees().size());
    for (const auto& tree : model.trees()) {
        w.put<std::uint64_t>(tree.nodes.size());
        for (const auto& node : tree.nodes) {
            w.put(node.feature);
            w.put(node.threshold);
            w.put(node.left);
            w.put(node.right);
            w.put(node.class_id);
        }
    }
    w.check();
}

ForestModel load_forest(std::istream& in) {
    BinaryReader r(in);
    r.expect_magic("SGRF", "random forest model");
    const auto version = r.get<std::uint32_t>();
    if (version != kForestFormatVersion) {
        throw UnsupportedFormatError("unsupported forest model version " + std::to_string(version));
    }
    ForestConfig c;
    c.n_trees = r.get<std::int32_t>();
    c.mtry = r.get<std::int32_t>();
    c.min_leaf = r.get<std::int32_t>();
    c.max_depth = r.get<std::int32_t>();
    c.seed = r.get<std::uint64_t>();
    auto classes = r.get_vector<std::uint8_t>(255);
    const auto n_features = r.get<std::int32_t>();
    const auto n_trees = r.get<std::uint64_t>();
    if (n_trees > (1u << 20)) throw CorruptFileError("tree count out of range");
    std::vector<DecisionTree> trees(static_cast<std::size_t>(n_trees));
    for (auto& tree : trees) {
        const auto count = r.get<std::uint64_t>();
        if (count > (1u << 28)) throw CorruptFileError("node count out of range");
        tree.nodes.resize(static_cast<std::size_t>(count));
        for (auto& node : tree.nodes) {
            node.feature = r.get<std::int32_t>();
            node.threshold = r.get<float>();
            node.left = r.get<std::int32_t>();
            node.right = r.get<std::int32_t>();
            node.class_id = r.get<std::uint8_t>();
        }
    }
    try {
        return ForestModel(c, std::move(classes), n_features, std::move(trees));
    } catch (const ValidationError& e) {
        throw CorruptFileError(std::string("invalid forest model: ") + e.what());
    }
}

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    save_forest(model, out);
}

ForestModel load_forest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_forest(in);
}

} // namespace smallgeo
