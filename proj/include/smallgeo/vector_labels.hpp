#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smallgeo/raster_store.hpp"

namespace smallgeo {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

// Expert-labeled polygon in raster map coordinates. Rings are implicitly closed.
struct LabeledPolygon {
    std::uint8_t class_id = 0;
    std::string class_name;
    Ring exterior;
    std::vector<Ring> holes;

    friend bool operator==(const LabeledPolygon&, const LabeledPolygon&) = default;
};

void validate_polygon(const LabeledPolygon& polygon);

// Even-odd rule over all rings (exterior and holes together), so points in a
// hole are outside.
//
// Boundary convention: crossings are counted for edges whose endpoints lie on
// opposite sides of the horizontal line through the point, using the
// half-open test (y_i > y) != (y_j > y), and only where the edge crosses
// strictly to the right of the point. For an axis-aligned rectangle
// [x0, x1] x [y0, y1] this makes the left and bottom edges inside and the
// right and top edges outside, so polygons sharing an edge never both claim a
// point on it.
bool point_in_polygon(Point pt, const LabeledPolygon& polygon);

struct Rasterization {
    LabelRaster labels;
    // Index of the polygon that labeled each pixel (row-major), -1 where none.
    std::vector<std::int32_t> polygon_index;
    std::size_t overlapping_pixels = 0;
};

// Labels each pixel whose center lies inside a polygon; later polygons
// overwrite earlier ones (a warning is logged when that happens).
Rasterization rasterize_polygons_indexed(std::span<const LabeledPolygon> polygons, int width, int height,
                                         const GeoTransform& geotransform);

LabelRaster rasterize_polygons(std::span<const LabeledPolygon> polygons, int width, int height,
                               const GeoTransform& geotransform);

struct SampleOrigin {
    std::int32_t polygon = -1;
    std::int32_t x = 0;
    std::int32_t y = 0;

    friend bool operator==(const SampleOrigin&, const SampleOrigin&) = default;
};

// n x d feature matrix (row-major) with class labels and pixel provenance.
class SampleSet {
  public:
    SampleSet() = default;
    SampleSet(int n_features, std::vector<float> features, std::vector<std::uint8_t> labels,
              std::vector<std::string> feature_names = {}, std::vector<SampleOrigin> provenance = {});

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    int n_features() const noexcept { return n_features_; }

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(features_).subspan(i * static_cast<std::size_t>(n_features_),
                                                         static_cast<std::size_t>(n_features_));
    }
    std::uint8_t label(std::size_t i) const { return labels_[i]; }

    std::span<const float> features() const noexcept { return features_; }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::vector<SampleOrigin>& provenance() const noexcept { return provenance_; }

    // Sorted distinct class ids.
    std::vector<std::uint8_t> classes() const;

    friend bool operator==(const SampleSet&, const SampleSet&) = default;

  private:
    int n_features_ = 0;
    std::vector<float> features_;
    std::vector<std::uint8_t> labels_;
    std::vector<std::string> feature_names_;
    std::vector<SampleOrigin> provenance_;
};

// Draws min(n_per_class, available) distinct nodata-free pixels per class,
// uniformly without replacement. Classes are emitted in ascending id order.
// polygon_index (optional, row-major) fills the provenance polygon field.
SampleSet sample_pixels(const RasterStack& raster, const LabelRaster& labels, std::size_t n_per_class,
                        std::uint64_t seed, std::span<const std::int32_t> polygon_index = {});

struct ClassStats {
    std::uint8_t class_id = 0;
    std::size_t count = 0;
    std::vector<double> mean;
    std::vector<double> stddev; // population standard deviation
};

struct ClassBandStats {
    std::vector<ClassStats> classes;
};

ClassBandStats class_band_stats(const SampleSet& samples);

// CSV: class_id,class_name,band,mean,std,count
void write_class_stats_csv(const ClassBandStats& stats, const ClassSchema& schema,
                           const std::vector<std::string>& band_names, const std::filesystem::path& path);

struct PolygonSplit {
    std::vector<LabeledPolygon> train;
    std::vector<LabeledPolygon> test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

// Stratified by class: ceil(test_fraction * count) polygons of each class go
// to test. Both outputs keep input order.
PolygonSplit split_polygons(std::span<const LabeledPolygon> polygons, double test_fraction, std::uint64_t seed);

// Per-band standardization fitted on training samples.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> scale; // 1 for zero-variance bands (pass-through)
    std::vector<bool> passthrough;

    std::size_t size() const noexcept { return mean.size(); }
    void apply(std::span<const float> in, std::span<float> out) const;
    std::vector<float> apply(std::span<const float> in) const;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

Scaler fit_scaler(const SampleSet& samples);
// Applies to every row of a row-major n x d matrix.
std::vector<float> apply_scaler(const Scaler& scaler, std::span<const float> features);

// Canonical polygon GeoJSON: FeatureCollection of Polygon features with
// integer "class_id" and text "class_name" properties.
std::vector<LabeledPolygon> read_polygons_geojson(const std::filesystem::path& path);
void write_polygons_geojson(std::span<const LabeledPolygon> polygons, const std::filesystem::path& path);

// Samples CSV: polygon,x,y,class_id,<feature names...>
void write_samples_csv(const SampleSet& samples, const std::filesystem::path& path);
SampleSet read_samples_csv(const std::filesystem::path& path);

} // namespace smallgeo
