#pragma once

// Reference implementations used to check the library against code that
// shares none of its arithmetic.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "smallgeo/random.hpp"
#include "smallgeo/vector_labels.hpp"

namespace oracle {

// Winding number of a closed ring around pt by summing signed angles.
inline int winding_number(const smallgeo::Ring& ring, smallgeo::Point pt) {
    double total = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % ring.size()];
        const double a0 = std::atan2(a.y - pt.y, a.x - pt.x);
        const double a1 = std::atan2(b.y - pt.y, b.x - pt.x);
        double d = a1 - a0;
        while (d > std::numbers::pi) d -= 2 * std::numbers::pi;
        while (d < -std::numbers::pi) d += 2 * std::numbers::pi;
        total += d;
    }
    return static_cast<int>(std::lround(total / (2 * std::numbers::pi)));
}

// Inside a simple polygon with holes: nonzero winding of the exterior and
// zero winding for every hole.
inline bool inside(const smallgeo::LabeledPolygon& p, smallgeo::Point pt) {
    if (winding_number(p.exterior, pt) == 0) return false;
    for (const auto& h : p.holes) {
        if (winding_number(h, pt) != 0) return false;
    }
    return true;
}

// Star-shaped (generally concave) simple polygon around (cx, cy): one vertex
// at a random angle inside each of n equal sectors, radii in [r_min, r_max].
inline smallgeo::Ring star_ring(smallgeo::Rng& rng, double cx, double cy, double r_min, double r_max, int n) {
    std::vector<double> angles(static_cast<std::size_t>(n));
    const double sector = 2 * std::numbers::pi / n;
    for (int k = 0; k < n; ++k) angles[static_cast<std::size_t>(k)] = sector * (k + rng.uniform(0.05, 0.95));
    smallgeo::Ring ring;
    for (double a : angles) {
        const double r = rng.uniform(r_min, r_max);
        ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return ring;
}

// Labels per pixel center, later polygons winning, one polygon test per pixel.
inline std::vector<std::uint8_t> brute_force_labels(const std::vector<smallgeo::LabeledPolygon>& polys, int w, int h,
                                                    const smallgeo::GeoTransform& gt) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const smallgeo::Point c{smallgeo::pixel_center_x(gt, x), smallgeo::pixel_center_y(gt, y)};
            for (const auto& p : polys) {
                if (inside(p, c)) out[static_cast<std::size_t>(y) * w + x] = p.class_id;
            }
        }
    }
    return out;
}

} // namespace oracle
