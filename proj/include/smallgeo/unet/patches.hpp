#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smallgeo/raster_store.hpp"
#include "smallgeo/unet/tensor.hpp"

namespace smallgeo {

struct PatchOrigin {
    int x0 = 0;
    int y0 = 0;

    friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

// Non-overlapping tiles of a raster, row-major by origin. The right and
// bottom edges are padded by reflection up to a multiple of the patch size.
struct PatchSet {
    int patch_size = 16;
    int raster_width = 0;
    int raster_height = 0;
    Tensor4<float> inputs;             // (n, p, p, bands); nodata pixels hold 0
    std::vector<std::uint8_t> targets; // n * p * p class ids, 0 = unlabeled
    std::vector<std::uint8_t> valid;   // 0 on padding and nodata
    std::vector<PatchOrigin> origins;

    std::size_t size() const noexcept { return origins.size(); }
    std::size_t patch_pixels() const noexcept { return static_cast<std::size_t>(patch_size) * patch_size; }
    // True when patch i has at least one valid labeled pixel.
    bool supervised(std::size_t i) const;
};

// labels may be null (inference).
PatchSet extract_patches(const RasterStack& raster, const LabelRaster* labels, int patch_size = 16);

// Reassembles per-patch label grids (n * p * p, in origin order) into a
// width x height raster, dropping padding.
LabelRaster stitch_patches(std::span<const PatchOrigin> origins, std::span<const std::uint8_t> patch_labels,
                           int patch_size, int width, int height, const GeoTransform& geotransform = kIdentityGeoTransform);

// Source index of padded coordinate i on an axis of length n (mirror without
// repeating the edge sample).
int reflect_index(int i, int n);

} // namespace smallgeo
