#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "smallgeo/errors.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/synth.hpp"

namespace smallgeo {

namespace {

struct Grid {
    int rows = 0;
    int cols = 0;
};

Grid choose_grid(int regions) {
    Grid best{regions, 1};
    int best_cost = -1;
    for (int rows = 1; rows <= regions; ++rows) {
        const int cols = (regions + rows - 1) / rows;
        const int cost = rows * cols - regions + std::abs(rows - cols);
        if (best_cost < 0 || cost < best_cost) {
            best = {rows, cols};
            best_cost = cost;
        }
    }
    return best;
}

} // namespace

bool spectrally_separable(const SpectralClass& a, const SpectralClass& b) {
    for (std::size_t k = 0; k < a.mean.size() && k < b.mean.size(); ++k) {
        const double spread = std::sqrt(a.std[k] * a.std[k] + b.std[k] * b.std[k]);
        if (std::abs(a.mean[k] - b.mean[k]) >= 4.0 * spread) return true;
    }
    return false;
}

void SceneSpec::validate() const {
    if (width < 1 || height < 1) throw ValidationError("scene dimensions must be positive");
    if (n_bands < 1) throw ValidationError("scene needs at least one band");
    if (classes.empty()) throw ValidationError("scene needs at least one spectral class");
    if (regions_per_class < 1) throw ValidationError("regions_per_class must be >= 1");
    if (!(label_fraction > 0.0 && label_fraction <= 1.0)) throw ValidationError("label_fraction must be in (0, 1]");
    validate_geotransform(geotransform);
    std::set<int> ids;
    std::set<std::string> names;
    auto claim = [&](std::uint8_t id, const std::string& name) {
        if (id == 0) throw ValidationError("class id 0 is reserved for unlabeled pixels");
        if (!ids.insert(id).second) throw ValidationError("duplicate scene class id " + std::to_string(id));
        if (name.empty() || !names.insert(name).second) {
            throw ValidationError("scene class names must be nonempty and unique: '" + name + "'");
        }
    };
    for (const auto& c : classes) {
        claim(c.class_id, c.name);
        if (c.mean.size() != static_cast<std::size_t>(n_bands) || c.std.size() != c.mean.size()) {
            throw ValidationError("class " + std::to_string(c.class_id) + " needs " + std::to_string(n_bands) +
                                  " means and stds");
        }
        for (std::size_t k = 0; k < c.mean.size(); ++k) {
            if (!std::isfinite(c.mean[k]) || !std::isfinite(c.std[k]) || c.std[k] < 0.0) {
                throw ValidationError("class " + std::to_string(c.class_id) + " has an invalid mean or std");
            }
        }
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            if (classes[i].separable && classes[j].separable && !spectrally_separable(classes[i], classes[j])) {
                throw ValidationError("classes " + std::to_string(classes[i].class_id) + " and " +
                                      std::to_string(classes[j].class_id) + " are not spectrally separable");
            }
        }
    }
    for (const auto& t : texture_classes) {
        claim(t.class_id, t.name);
        if (t.checker_period < 1) throw ValidationError("checker_period must be >= 1");
        auto defined = [&](std::uint8_t id) {
            return std::any_of(classes.begin(), classes.end(), [&](const SpectralClass& c) { return c.class_id == id; });
        };
        if (!defined(t.parent_a) || !defined(t.parent_b) || t.parent_a == t.parent_b) {
            throw ValidationError("texture class " + std::to_string(t.class_id) +
                                  " must reference two distinct spectral classes");
        }
    }
}

SceneSpec default_scene_spec(bool with_texture) {
    SceneSpec spec;
    auto add = [&](std::uint8_t id, const char* name, std::vector<double> mean, Rgb color) {
        spec.classes.push_back({id, name, std::move(mean), std::vector<double>(8, 0.01), color, true});
    };
    add(1, "water", {0.06, 0.05, 0.04, 0.035, 0.03, 0.025, 0.02, 0.015}, {30, 90, 200});
    add(2, "settlement", {0.18, 0.20, 0.22, 0.23, 0.24, 0.26, 0.27, 0.28}, {200, 60, 60});
    add(3, "mixed forest", {0.03, 0.04, 0.06, 0.07, 0.06, 0.04, 0.20, 0.38}, {20, 110, 40});
    add(4, "rice paddy", {0.05, 0.07, 0.11, 0.12, 0.11, 0.09, 0.22, 0.30}, {170, 210, 90});
    add(5, "bare soil", {0.10, 0.12, 0.15, 0.17, 0.19, 0.22, 0.25, 0.27}, {160, 120, 70});
    add(6, "clove", {0.04, 0.05, 0.08, 0.09, 0.08, 0.06, 0.28, 0.50}, {120, 60, 140});
    if (with_texture) spec.texture_classes.push_back({7, "agroforestry", 3, 4, 2, {240, 180, 30}});
    return spec;
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int n_classes = static_cast<int>(spec.class_count());
    const Grid grid = choose_grid(spec.regions_per_class * n_classes);
    const int min_cell_w = spec.width / grid.cols;
    const int min_cell_h = spec.height / grid.rows;
    if (min_cell_w < 1 || min_cell_h < 1) {
        throw LayoutError(std::to_string(grid.rows * grid.cols) + " regions do not fit a " +
                          std::to_string(spec.width) + "x" + std::to_string(spec.height) + " scene");
    }

    std::vector<std::uint8_t> order;
    for (const auto& c : spec.classes) order.push_back(c.class_id);
    for (const auto& t : spec.texture_classes) order.push_back(t.class_id);
    std::vector<std::uint8_t> cell_class(static_cast<std::size_t>(grid.rows) * grid.cols);
    for (std::size_t i = 0; i < cell_class.size(); ++i) cell_class[i] = order[i % order.size()];
    Rng layout_rng(derive_seed(seed, 0));
    layout_rng.shuffle(cell_class.begin(), cell_class.end());

    std::map<std::uint8_t, const SpectralClass*> spectral;
    for (const auto& c : spec.classes) spectral[c.class_id] = &c;
    std::map<std::uint8_t, const TextureClass*> texture;
    for (const auto& t : spec.texture_classes) texture[t.class_id] = &t;
    std::vector<ClassEntry> entries;
    for (const auto& c : spec.classes) entries.push_back({c.class_id, c.name, c.color});
    for (const auto& t : spec.texture_classes) entries.push_back({t.class_id, t.name, t.color});
    std::sort(entries.begin(), entries.end(), [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });

    const double side = std::sqrt(spec.label_fraction);
    const auto& gt = spec.geotransform;
    std::vector<SceneRegion> regions;
    std::vector<LabeledPolygon> polygons;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            SceneRegion reg;
            reg.class_id = cell_class[static_cast<std::size_t>(r) * grid.cols + c];
            reg.x0 = c * spec.width / grid.cols;
            reg.x1 = (c + 1) * spec.width / grid.cols;
            reg.y0 = r * spec.height / grid.rows;
            reg.y1 = (r + 1) * spec.height / grid.rows;
            const int w = reg.x1 - reg.x0;
            const int h = reg.y1 - reg.y0;
            const int pw = static_cast<int>(std::lround(w * side));
            const int ph = static_cast<int>(std::lround(h * side));
            if (pw < 1 || ph < 1) {
                throw LayoutError("a " + std::to_string(w) + "x" + std::to_string(h) +
                                  " region is too small for a training polygon at label_fraction " +
                                  std::to_string(spec.label_fraction));
            }
            const int px0 = reg.x0 + (w - pw) / 2;
            const int py0 = reg.y0 + (h - ph) / 2;
            const double xa = gt[0] + px0 * gt[1];
            const double xb = gt[0] + (px0 + pw) * gt[1];
            const double ya = gt[3] + py0 * gt[5];
            const double yb = gt[3] + (py0 + ph) * gt[5];
            LabeledPolygon poly;
            poly.class_id = reg.class_id;
            poly.class_name = std::find_if(entries.begin(), entries.end(), [&](const ClassEntry& e) {
                                  return e.id == reg.class_id;
                              })->name;
            poly.exterior = {{xa, yb}, {xb, yb}, {xb, ya}, {xa, ya}};
            polygons.push_back(std::move(poly));
            regions.push_back(reg);
        }
    }

    const std::size_t plane = static_cast<std::size_t>(spec.width) * spec.height;
    std::vector<float> values(plane * static_cast<std::size_t>(spec.n_bands));
    LabelRaster truth(spec.width, spec.height, spec.geotransform);
    Rng pixel_rng(derive_seed(seed, 1));
    for (const auto& reg : regions) {
        const TextureClass* tex = texture.count(reg.class_id) ? texture[reg.class_id] : nullptr;
        for (int y = reg.y0; y < reg.y1; ++y) {
            for (int x = reg.x0; x < reg.x1; ++x) {
                truth.set(x, y, reg.class_id);
                const SpectralClass* src = nullptr;
                if (tex != nullptr) {
                    const int cell = (x - reg.x0) / tex->checker_period + (y - reg.y0) / tex->checker_period;
                    src = spectral[cell % 2 == 0 ? tex->parent_a : tex->parent_b];
                } else {
                    src = spectral[reg.class_id];
                }
                const std::size_t px = static_cast<std::size_t>(y) * spec.width + x;
                for (int b = 0; b < spec.n_bands; ++b) {
                    values[static_cast<std::size_t>(b) * plane + px] =
                        static_cast<float>(src->mean[b] + src->std[b] * pixel_rng.normal());
                }
            }
        }
    }
    return Scene{RasterStack(spec.width, spec.height, spec.n_bands, std::move(values), spec.geotransform),
                 std::move(truth), std::move(polygons), std::move(regions), ClassSchema(std::move(entries))};
}

} // namespace smallgeo
