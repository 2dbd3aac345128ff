#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include "smallgeo/errors.hpp"
#include "smallgeo/raster_store.hpp"

namespace smallgeo {

void validate_geotransform(const GeoTransform& gt) {
    for (double v : gt) {
        if (!std::isfinite(v)) throw ValidationError("geotransform contains a non-finite value");
    }
    if (!(gt[1] > 0.0) || !(gt[5] < 0.0)) {
        throw ValidationError("geotransform must have pixel_width > 0 and pixel_height > 0 (north-up)");
    }
    if (gt[2] != 0.0 || gt[4] != 0.0) {
        throw ValidationError("rotated or skewed geotransforms are not supported");
    }
}

RasterStack::RasterStack(int width, int height, int n_bands, std::vector<float> values, GeoTransform geotransform,
                         std::optional<float> nodata, std::vector<std::string> band_names)
    : width_(width), height_(height), n_bands_(n_bands), values_(std::move(values)), geotransform_(geotransform),
      nodata_(nodata), band_names_(std::move(band_names)) {
    if (width_ < 1 || height_ < 1 || n_bands_ < 1) {
        throw ValidationError("raster dimensions must be positive");
    }
    const std::size_t expected = pixel_count() * static_cast<std::size_t>(n_bands_);
    if (values_.size() != expected) {
        std::ostringstream msg;
        msg << "raster value count " << values_.size() << " != width*height*bands " << expected;
        throw ValidationError(msg.str());
    }
    validate_geotransform(geotransform_);
    if (!band_names_.empty() && band_names_.size() != static_cast<std::size_t>(n_bands_)) {
        throw ValidationError("band_names must have one entry per band");
    }
    for (const auto& name : band_names_) {
        if (name.find_first_of(",\n\r") != std::string::npos) {
            throw ValidationError("band name may not contain commas or newlines: '" + name + "'");
        }
    }
    const bool nodata_is_nan = nodata_ && std::isnan(*nodata_);
    if (!nodata_is_nan) {
        const auto it = std::find_if(values_.begin(), values_.end(), [](float v) { return std::isnan(v); });
        if (it != values_.end()) {
            std::ostringstream msg;
            msg << "raster contains NaN at value index " << (it - values_.begin());
            throw ValidationError(msg.str());
        }
    }
}

std::span<const float> RasterStack::band(int b) const {
    if (b < 0 || b >= n_bands_) throw OutOfBoundsError("band index out of range");
    return std::span<const float>(values_).subspan(static_cast<std::size_t>(b) * pixel_count(), pixel_count());
}

void RasterStack::pixel(int x, int y, std::span<float> out) const {
    const std::size_t offset = static_cast<std::size_t>(y) * width_ + x;
    const std::size_t stride = pixel_count();
    for (int b = 0; b < n_bands_; ++b) out[b] = values_[b * stride + offset];
}

bool RasterStack::is_nodata_value(float v) const {
    if (std::isnan(v)) return true;
    return nodata_ && v == *nodata_;
}

bool RasterStack::is_nodata(int x, int y) const {
    const std::size_t offset = static_cast<std::size_t>(y) * width_ + x;
    const std::size_t stride = pixel_count();
    for (int b = 0; b < n_bands_; ++b) {
        if (is_nodata_value(values_[b * stride + offset])) return true;
    }
    return false;
}

bool operator==(const RasterStack& a, const RasterStack& b) {
    if (a.width_ != b.width_ || a.height_ != b.height_ || a.n_bands_ != b.n_bands_) return false;
    if (a.geotransform_ != b.geotransform_ || a.band_names_ != b.band_names_) return false;
    if (a.nodata_.has_value() != b.nodata_.has_value()) return false;
    if (a.nodata_ && std::bit_cast<std::uint32_t>(*a.nodata_) != std::bit_cast<std::uint32_t>(*b.nodata_)) return false;
    // Bitwise so NaN sentinels compare equal to themselves.
    return std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(), [](float x, float y) {
        return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
    });
}

LabelRaster::LabelRaster(int width, int height, GeoTransform geotransform)
    : LabelRaster(width, height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 0),
                  geotransform) {}

LabelRaster::LabelRaster(int width, int height, std::vector<std::uint8_t> labels, GeoTransform geotransform)
    : width_(width), height_(height), labels_(std::move(labels)), geotransform_(geotransform) {
    if (width_ < 1 || height_ < 1) throw ValidationError("label raster dimensions must be positive");
    if (labels_.size() != static_cast<std::size_t>(width_) * height_) {
        throw ValidationError("label count does not match width*height");
    }
    validate_geotransform(geotransform_);
}

ClassSchema::ClassSchema(std::vector<ClassEntry> entries) : entries_(std::move(entries)) {
    std::set<std::uint8_t> ids;
    std::set<std::string> names;
    for (const auto& e : entries_) {
        if (e.id == 0) throw ValidationError("class id 0 is reserved for unlabeled pixels");
        if (e.name.empty()) throw ValidationError("class names must be nonempty");
        if (e.name.find_first_of(",\n\r\"") != std::string::npos) {
            throw ValidationError("class name may not contain commas, quotes or newlines: '" + e.name + "'");
        }
        if (!ids.insert(e.id).second) throw ValidationError("duplicate class id " + std::to_string(e.id));
        if (!names.insert(e.name).second) throw ValidationError("duplicate class name '" + e.name + "'");
    }
}

bool ClassSchema::contains(std::uint8_t id) const {
    return std::any_of(entries_.begin(), entries_.end(), [id](const ClassEntry& e) { return e.id == id; });
}

const ClassEntry& ClassSchema::at(std::uint8_t id) const {
    for (const auto& e : entries_) {
        if (e.id == id) return e;
    }
    throw SchemaMismatchError("class id " + std::to_string(id) + " not in schema");
}

std::vector<std::uint8_t> ClassSchema::ids() const {
    std::vector<std::uint8_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.id);
    return out;
}

void check_labels_in_schema(const LabelRaster& labels, const ClassSchema& schema) {
    std::array<bool, 256> seen{};
    for (auto id : labels.labels()) seen[id] = true;
    std::string missing;
    for (int id = 1; id < 256; ++id) {
        if (seen[id] && !schema.contains(static_cast<std::uint8_t>(id))) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(id);
        }
    }
    if (!missing.empty()) throw SchemaMismatchError("label ids not in schema: " + missing);
}

RasterStack crop(const RasterStack& raster, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > raster.width() || y0 + h > raster.height()) {
        std::ostringstream msg;
        msg << "crop window (" << x0 << ", " << y0 << ", " << w << ", " << h << ") exceeds raster "
            << raster.width() << "x" << raster.height();
        throw OutOfBoundsError(msg.str());
    }
    std::vector<float> values(static_cast<std::size_t>(w) * h * raster.bands());
    auto out = values.begin();
    for (int b = 0; b < raster.bands(); ++b) {
        const auto band = raster.band(b);
        for (int y = y0; y < y0 + h; ++y) {
            const auto row = band.begin() + static_cast<std::ptrdiff_t>(y) * raster.width() + x0;
            out = std::copy(row, row + w, out);
        }
    }
    GeoTransform gt = raster.geotransform();
    gt[0] = gt[0] + x0 * gt[1];
    gt[3] = gt[3] + y0 * gt[5];
    return RasterStack(w, h, raster.bands(), std::move(values), gt, raster.nodata(), raster.band_names());
}

} // namespace smallgeo
