#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smallgeo/raster_store.hpp"

namespace smallgeo {

// Truth-by-prediction counts over k classes. Column k counts labeled pixels
// predicted as 0 (unclassified).
struct ConfusionMatrix {
    std::vector<std::uint8_t> class_ids;
    std::vector<std::uint64_t> counts; // k x (k + 1), row-major

    std::size_t k() const noexcept { return class_ids.size(); }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * (k() + 1) + pred]; }
    std::uint64_t unclassified(std::size_t truth) const { return at(truth, k()); }
    std::uint64_t support(std::size_t truth) const;
    std::uint64_t total() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Counts pixels where truth != 0. Class ids are those of the schema list;
// a nonzero id outside it raises SchemaMismatchError.
ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& truth, std::span<const std::uint8_t> class_ids);
// Class ids taken as every nonzero id appearing in either raster.
ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& truth);

struct ClassMetric {
    std::uint8_t class_id = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    // Set when the metric's denominator was zero (the value is then 0).
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;

    friend bool operator==(const ClassMetric&, const ClassMetric&) = default;
};

struct ClassMetrics {
    std::vector<ClassMetric> classes;
    // Unweighted means over classes with support > 0.
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::size_t macro_classes = 0;

    const ClassMetric* find(std::uint8_t id) const;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

ClassMetrics metrics(const ConfusionMatrix& cm);

struct ModelReport {
    std::string model;
    ConfusionMatrix confusion;
    ClassMetrics metrics;
};

// JSON document with models[], classes[] and one results entry per model.
std::string report_json(std::span<const ModelReport> models, const ClassSchema& schema);
// Aligned F1 table: one row per schema class, one column per model.
std::string report_table(std::span<const ModelReport> models, const ClassSchema& schema);

// Writes both forms. Every model must have been scored on the schema's ids
// (SchemaMismatchError otherwise).
void write_report(std::span<const ModelReport> models, const ClassSchema& schema,
                  const std::filesystem::path& json_path, const std::filesystem::path& text_path);

} // namespace smallgeo
