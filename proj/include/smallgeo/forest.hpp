#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "smallgeo/vector_labels.hpp"

namespace smallgeo {

struct ForestConfig {
    int n_trees = 100;
    int mtry = 10;      // upper bound; the effective value is min(mtry, d)
    int min_leaf = 1;   // minimum samples per child
    int max_depth = 32; // root has depth 0
    std::uint64_t seed = 42;

    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    float threshold = 0.0f;    // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t class_id = 0; // majority class of the node's training rows

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Flat binary CART tree; node 0 is the root.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    std::uint8_t route(std::span<const float> x) const;
    int depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

class ForestModel {
  public:
    ForestModel(ForestConfig config, std::vector<std::uint8_t> classes, int n_features, std::vector<DecisionTree> trees);

    const ForestConfig& config() const noexcept { return config_; }
    const std::vector<std::uint8_t>& classes() const noexcept { return classes_; }
    int n_features() const noexcept { return n_features_; }
    int effective_mtry() const noexcept;
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    // Position of class id in classes(), -1 when absent.
    int class_index(std::uint8_t id) const noexcept { return index_of_[id]; }

    friend bool operator==(const ForestModel&, const ForestModel&) = default;

  private:
    std::array<std::int16_t, 256> index_of_{};
    ForestConfig config_;
    std::vector<std::uint8_t> classes_;
    int n_features_;
    std::vector<DecisionTree> trees_;
};

// Predicted class and per-class vote counts aligned with the model's classes().
struct VoteResult {
    std::uint8_t class_id = 0;
    std::vector<std::uint32_t> votes;
};

// Index of the largest count; ties go to the lowest index (= smallest class id,
// since class lists are sorted ascending).
template <class T>
std::size_t argmax_first(std::span<const T> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

ForestModel train_forest(const SampleSet& samples, const ForestConfig& config);

VoteResult forest_predict(const ForestModel& model, std::span<const float> features);

void save_forest(const ForestModel& model, std::ostream& out);
ForestModel load_forest(std::istream& in);
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

} // namespace smallgeo
