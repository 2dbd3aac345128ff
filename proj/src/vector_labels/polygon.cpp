#include <algorithm>
#include <cmath>
#include <set>

#include "smallgeo/errors.hpp"
#include "smallgeo/log.hpp"
#include "smallgeo/vector_labels.hpp"

namespace smallgeo {

namespace {

void validate_ring(const Ring& ring, const char* what) {
    std::set<std::pair<double, double>> distinct;
    for (const auto& p : ring) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError(std::string(what) + " ring has a non-finite vertex");
        }
        distinct.emplace(p.x, p.y);
    }
    if (distinct.size() < 3) throw ValidationError(std::string(what) + " ring needs at least 3 distinct vertices");
}

// Crossing of the ring edge (a, b) with the horizontal line through y,
// under the half-open rule. Shared verbatim by the point test and the
// scanline fill so both classify every pixel center identically.
inline bool edge_straddles(const Point& a, const Point& b, double y) { return (a.y > y) != (b.y > y); }

inline double edge_crossing_x(const Point& a, const Point& b, double y) {
    return (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
}

void ring_crossings(const Ring& ring, Point pt, bool& inside) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if (edge_straddles(a, b, pt.y) && pt.x < edge_crossing_x(a, b, pt.y)) inside = !inside;
    }
}

void collect_crossings(const Ring& ring, double y, std::vector<double>& xs) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if (edge_straddles(a, b, y)) xs.push_back(edge_crossing_x(a, b, y));
    }
}

} // namespace

void validate_polygon(const LabeledPolygon& polygon) {
    if (polygon.class_id == 0) throw ValidationError("polygon class_id must be nonzero");
    validate_ring(polygon.exterior, "exterior");
    for (const auto& hole : polygon.holes) validate_ring(hole, "hole");
}

bool point_in_polygon(Point pt, const LabeledPolygon& polygon) {
    bool inside = false;
    ring_crossings(polygon.exterior, pt, inside);
    for (const auto& hole : polygon.holes) ring_crossings(hole, pt, inside);
    return inside;
}

Rasterization rasterize_polygons_indexed(std::span<const LabeledPolygon> polygons, int width, int height,
                                         const GeoTransform& geotransform) {
    validate_geotransform(geotransform);
    Rasterization out{LabelRaster(width, height, geotransform),
                      std::vector<std::int32_t>(static_cast<std::size_t>(width) * height, -1), 0};

    std::vector<double> centers_x(static_cast<std::size_t>(width));
    for (int i = 0; i < width; ++i) centers_x[i] = pixel_center_x(geotransform, i);

    std::vector<double> xs;
    auto labels = out.labels.labels();
    for (std::size_t p = 0; p < polygons.size(); ++p) {
        const auto& poly = polygons[p];
        validate_polygon(poly);
        double min_y = poly.exterior.front().y;
        double max_y = min_y;
        for (const auto& v : poly.exterior) {
            min_y = std::min(min_y, v.y);
            max_y = std::max(max_y, v.y);
        }
        for (int row = 0; row < height; ++row) {
            const double y = pixel_center_y(geotransform, row);
            if (y < min_y || y > max_y) continue;
            xs.clear();
            collect_crossings(poly.exterior, y, xs);
            for (const auto& hole : poly.holes) collect_crossings(hole, y, xs);
            if (xs.empty()) continue;
            std::sort(xs.begin(), xs.end());
            // A center x is inside iff an odd number of crossings lie strictly
            // to its right, i.e. x in [xs[2k], xs[2k+1]).
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                const auto first = std::lower_bound(centers_x.begin(), centers_x.end(), xs[k]);
                const auto last = std::lower_bound(first, centers_x.end(), xs[k + 1]);
                for (auto it = first; it != last; ++it) {
                    const std::size_t idx = static_cast<std::size_t>(row) * width + (it - centers_x.begin());
                    if (labels[idx] != 0) ++out.overlapping_pixels;
                    labels[idx] = poly.class_id;
                    out.polygon_index[idx] = static_cast<std::int32_t>(p);
                }
            }
        }
    }
    if (out.overlapping_pixels > 0) {
        log::warn("rasterize: " + std::to_string(out.overlapping_pixels) +
                  " pixel(s) covered by overlapping polygons; the later polygon wins");
    }
    return out;
}

LabelRaster rasterize_polygons(std::span<const LabeledPolygon> polygons, int width, int height,
                               const GeoTransform& geotransform) {
    return std::move(rasterize_polygons_indexed(polygons, width, height, geotransform).labels);
}

} // namespace smallgeo
