#include <algorithm>

#include "smallgeo/errors.hpp"
#include "smallgeo/unet/patches.hpp"

namespace smallgeo {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

bool PatchSet::supervised(std::size_t i) const {
    const std::size_t pp = patch_pixels();
    for (std::size_t k = i * pp; k < (i + 1) * pp; ++k) {
        if (valid[k] != 0 && targets[k] != 0) return true;
    }
    return false;
}

PatchSet extract_patches(const RasterStack& raster, const LabelRaster* labels, int patch_size) {
    if (raster.width() < 1 || raster.height() < 1) throw EmptyInputError("raster has no pixels");
    if (patch_size < 1) throw ValidationError("patch size must be >= 1");
    if (labels != nullptr && (labels->width() != raster.width() || labels->height() != raster.height())) {
        throw DimensionError("label raster is " + std::to_string(labels->width()) + "x" +
                             std::to_string(labels->height()) + ", raster is " + std::to_string(raster.width()) +
                             "x" + std::to_string(raster.height()));
    }
    const int W = raster.width();
    const int H = raster.height();
    const int B = raster.bands();
    const int tiles_x = (W + patch_size - 1) / patch_size;
    const int tiles_y = (H + patch_size - 1) / patch_size;

    PatchSet ps;
    ps.patch_size = patch_size;
    ps.raster_width = W;
    ps.raster_height = H;
    ps.inputs = Tensor4<float>(tiles_x * tiles_y, patch_size, patch_size, B);
    ps.targets.assign(static_cast<std::size_t>(tiles_x) * tiles_y * patch_size * patch_size, 0);
    ps.valid.assign(ps.targets.size(), 0);

    std::vector<std::uint8_t> nodata(raster.pixel_count());
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) nodata[static_cast<std::size_t>(y) * W + x] = raster.is_nodata(x, y) ? 1 : 0;
    }

    int n = 0;
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx, ++n) {
            const PatchOrigin o{tx * patch_size, ty * patch_size};
            ps.origins.push_back(o);
            for (int py = 0; py < patch_size; ++py) {
                const int y = o.y0 + py;
                const int sy = y < H ? y : reflect_index(y, H);
                for (int px = 0; px < patch_size; ++px) {
                    const int x = o.x0 + px;
                    const int sx = x < W ? x : reflect_index(x, W);
                    const bool inside = x < W && y < H;
                    const bool masked = nodata[static_cast<std::size_t>(sy) * W + sx] != 0;
                    const std::size_t k = (static_cast<std::size_t>(n) * patch_size + py) * patch_size + px;
                    if (!masked) {
                        for (int b = 0; b < B; ++b) ps.inputs.at(n, py, px, b) = raster.at(b, sy, sx);
                    }
                    if (inside) {
                        ps.valid[k] = masked ? 0 : 1;
                        if (labels != nullptr) ps.targets[k] = labels->at(x, y);
                    }
                }
            }
        }
    }
    return ps;
}

LabelRaster stitch_patches(std::span<const PatchOrigin> origins, std::span<const std::uint8_t> patch_labels,
                           int patch_size, int width, int height, const GeoTransform& geotransform) {
    const std::size_t pp = static_cast<std::size_t>(patch_size) * patch_size;
    if (patch_labels.size() != origins.size() * pp) {
        throw DimensionError("patch label count does not match the number of origins");
    }
    LabelRaster out(width, height, geotransform);
    for (std::size_t i = 0; i < origins.size(); ++i) {
        const auto& o = origins[i];
        for (int py = 0; py < patch_size; ++py) {
            const int y = o.y0 + py;
            if (y < 0 || y >= height) continue;
            for (int px = 0; px < patch_size; ++px) {
                const int x = o.x0 + px;
                if (x < 0 || x >= width) continue;
                out.set(x, y, patch_labels[i * pp + static_cast<std::size_t>(py) * patch_size + px]);
            }
        }
    }
    return out;
}

} // namespace smallgeo
