#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smallgeo/raster_store.hpp"
#include "smallgeo/vector_labels.hpp"

namespace smallgeo {

struct SpectralClass {
    std::uint8_t class_id = 0;
    std::string name;
    std::vector<double> mean; // per band
    std::vector<double> std;  // per band
    Rgb color;
    bool separable = true; // must be spectrally separated from every other separable class

    friend bool operator==(const SpectralClass&, const SpectralClass&) = default;
};

// Checkerboard of two spectral parents; cells of checker_period x checker_period
// pixels alternate, anchored at each region's top-left corner.
struct TextureClass {
    std::uint8_t class_id = 0;
    std::string name;
    std::uint8_t parent_a = 0;
    std::uint8_t parent_b = 0;
    int checker_period = 2;
    Rgb color;

    friend bool operator==(const TextureClass&, const TextureClass&) = default;
};

struct SceneSpec {
    int width = 256;
    int height = 256;
    int n_bands = 8;
    std::vector<SpectralClass> classes;
    std::vector<TextureClass> texture_classes;
    int regions_per_class = 4;
    double label_fraction = 0.3; // area of each region covered by its training polygon
    GeoTransform geotransform{300000.0, 3.0, 0.0, 9100000.0, 0.0, -3.0};

    // Throws ValidationError on a violated invariant.
    void validate() const;
    std::size_t class_count() const { return classes.size() + texture_classes.size(); }

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

// 256 x 256 x 8 scene with six separable classes; with_texture adds class 7,
// a period-2 checkerboard of classes 3 and 4.
SceneSpec default_scene_spec(bool with_texture = false);

// True when some band separates the two means by at least 4 combined std.
bool spectrally_separable(const SpectralClass& a, const SpectralClass& b);

struct SceneRegion {
    std::uint8_t class_id = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // pixel bounds, half-open
};

struct Scene {
    RasterStack raster;
    LabelRaster truth;
    std::vector<LabeledPolygon> polygons; // one per region, in region order
    std::vector<SceneRegion> regions;
    ClassSchema schema;
};

// Tiles the scene into a grid of rectangular regions (at least
// regions_per_class per class, extra cells cycling through the classes,
// assignment shuffled by the seed), fills each with its class distribution
// and places one centered rectangle polygon per region.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

} // namespace smallgeo
