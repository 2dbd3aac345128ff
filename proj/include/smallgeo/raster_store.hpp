#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace smallgeo {

// Affine pixel-to-map transform: (origin_x, pixel_width, 0, origin_y, 0, -pixel_height).
// Only north-up transforms are supported.
using GeoTransform = std::array<double, 6>;

inline constexpr GeoTransform kIdentityGeoTransform{0.0, 1.0, 0.0, 0.0, 0.0, -1.0};

void validate_geotransform(const GeoTransform& gt);

// Map coordinates of the center of pixel column `col` / row `row`.
inline double pixel_center_x(const GeoTransform& gt, int col) { return gt[0] + (col + 0.5) * gt[1]; }
inline double pixel_center_y(const GeoTransform& gt, int row) { return gt[3] + (row + 0.5) * gt[5]; }

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// W x H x B reflectance image, band-sequential. Immutable once constructed.
class RasterStack {
  public:
    RasterStack(int width, int height, int n_bands, std::vector<float> values,
                GeoTransform geotransform = kIdentityGeoTransform, std::optional<float> nodata = std::nullopt,
                std::vector<std::string> band_names = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int bands() const noexcept { return n_bands_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

    std::span<const float> values() const noexcept { return values_; }
    std::span<const float> band(int b) const;

    float at(int b, int y, int x) const {
        return values_[static_cast<std::size_t>(b) * pixel_count() + static_cast<std::size_t>(y) * width_ + x];
    }

    // Copies the B band values of pixel (x, y) into out (size >= bands()).
    void pixel(int x, int y, std::span<float> out) const;

    // True when any band of pixel (x, y) equals the nodata sentinel (or is NaN).
    bool is_nodata(int x, int y) const;
    bool is_nodata_value(float v) const;

    const GeoTransform& geotransform() const noexcept { return geotransform_; }
    const std::optional<float>& nodata() const noexcept { return nodata_; }
    const std::vector<std::string>& band_names() const noexcept { return band_names_; }

    friend bool operator==(const RasterStack& a, const RasterStack& b);

  private:
    int width_;
    int height_;
    int n_bands_;
    std::vector<float> values_;
    GeoTransform geotransform_;
    std::optional<float> nodata_;
    std::vector<std::string> band_names_;
};

// W x H grid of class ids, 0 = unlabeled.
class LabelRaster {
  public:
    LabelRaster(int width, int height, GeoTransform geotransform = kIdentityGeoTransform);
    LabelRaster(int width, int height, std::vector<std::uint8_t> labels,
                GeoTransform geotransform = kIdentityGeoTransform);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return labels_.size(); }

    std::uint8_t at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, std::uint8_t id) { labels_[static_cast<std::size_t>(y) * width_ + x] = id; }

    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    std::span<std::uint8_t> labels() noexcept { return labels_; }

    const GeoTransform& geotransform() const noexcept { return geotransform_; }

    friend bool operator==(const LabelRaster&, const LabelRaster&) = default;

  private:
    int width_;
    int height_;
    std::vector<std::uint8_t> labels_;
    GeoTransform geotransform_;
};

struct ClassEntry {
    std::uint8_t id = 0;
    std::string name;
    Rgb color;

    friend bool operator==(const ClassEntry&, const ClassEntry&) = default;
};

// Categorical land-cover schema. Ids are unique and nonzero, names unique.
class ClassSchema {
  public:
    ClassSchema() = default;
    explicit ClassSchema(std::vector<ClassEntry> entries);

    const std::vector<ClassEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(std::uint8_t id) const;
    const ClassEntry& at(std::uint8_t id) const;
    std::vector<std::uint8_t> ids() const;

    friend bool operator==(const ClassSchema&, const ClassSchema&) = default;

  private:
    std::vector<ClassEntry> entries_;
};

// Schema file: CSV with header "class_id,name,red,green,blue".
ClassSchema read_schema(const std::filesystem::path& path);
void write_schema(const ClassSchema& schema, const std::filesystem::path& path);

// Band-stack files are "<stem>.hdr" (key = value text) plus "<stem>.bsq"
// (raw little-endian payload). Either file name, or the bare stem, may be passed.
std::filesystem::path header_path(const std::filesystem::path& path);
std::filesystem::path payload_path(const std::filesystem::path& path);

RasterStack read_bandstack(const std::filesystem::path& path);
void write_bandstack(const RasterStack& raster, const std::filesystem::path& path);

// Writes "<stem>.hdr"/"<stem>.bsq" (uint8 ids) and "<stem>.png" (schema colors, id 0 black).
void write_class_map(const LabelRaster& labels, const ClassSchema& schema, const std::filesystem::path& path);
LabelRaster read_class_map(const std::filesystem::path& path);

// Throws SchemaMismatchError listing every nonzero id absent from the schema.
void check_labels_in_schema(const LabelRaster& labels, const ClassSchema& schema);

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;
};

void write_png(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

RasterStack crop(const RasterStack& raster, int x0, int y0, int w, int h);

} // namespace smallgeo
