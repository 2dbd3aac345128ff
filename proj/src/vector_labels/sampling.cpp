#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "smallgeo/errors.hpp"
#include "smallgeo/random.hpp"
#include "smallgeo/text.hpp"
#include "smallgeo/vector_labels.hpp"

namespace smallgeo {

SampleSet::SampleSet(int n_features, std::vector<float> features, std::vector<std::uint8_t> labels,
                     std::vector<std::string> feature_names, std::vector<SampleOrigin> provenance)
    : n_features_(n_features), features_(std::move(features)), labels_(std::move(labels)),
      feature_names_(std::move(feature_names)), provenance_(std::move(provenance)) {
    if (n_features_ < 1) throw ValidationError("sample set needs at least one feature");
    if (features_.size() != labels_.size() * static_cast<std::size_t>(n_features_)) {
        throw ValidationError("feature matrix size does not match label count");
    }
    if (feature_names_.empty()) {
        for (int i = 0; i < n_features_; ++i) feature_names_.push_back("b" + std::to_string(i + 1));
    }
    if (feature_names_.size() != static_cast<std::size_t>(n_features_)) {
        throw ValidationError("feature_names must have one entry per feature");
    }
    if (provenance_.empty()) provenance_.resize(labels_.size());
    if (provenance_.size() != labels_.size()) throw ValidationError("provenance length does not match label count");
    for (auto id : labels_) {
        if (id == 0) throw ValidationError("sample labels must be nonzero");
    }
    for (float v : features_) {
        if (!std::isfinite(v)) throw ValidationError("sample features must be finite");
    }
}

std::vector<std::uint8_t> SampleSet::classes() const {
    std::array<bool, 256> seen{};
    for (auto id : labels_) seen[id] = true;
    std::vector<std::uint8_t> out;
    for (int id = 1; id < 256; ++id) {
        if (seen[id]) out.push_back(static_cast<std::uint8_t>(id));
    }
    return out;
}

SampleSet sample_pixels(const RasterStack& raster, const LabelRaster& labels, std::size_t n_per_class,
                        std::uint64_t seed, std::span<const std::int32_t> polygon_index) {
    if (raster.width() != labels.width() || raster.height() != labels.height()) {
        throw DimensionError("raster and label raster dimensions differ");
    }
    if (!polygon_index.empty() && polygon_index.size() != labels.pixel_count()) {
        throw DimensionError("polygon index grid does not match label raster");
    }

    std::array<std::vector<std::uint32_t>, 256> candidates;
    std::array<bool, 256> present{};
    const int w = labels.width();
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            const auto id = labels.at(x, y);
            if (id == 0) continue;
            present[id] = true;
            if (!raster.is_nodata(x, y)) candidates[id].push_back(static_cast<std::uint32_t>(y * w + x));
        }
    }

    const int d = raster.bands();
    std::vector<float> features;
    std::vector<std::uint8_t> out_labels;
    std::vector<SampleOrigin> provenance;
    std::vector<float> px(static_cast<std::size_t>(d));
    for (int id = 1; id < 256; ++id) {
        if (!present[id]) continue;
        auto& pool = candidates[id];
        if (pool.empty()) {
            throw EmptyClassError("class " + std::to_string(id) + " has no labeled pixels free of nodata");
        }
        // Partial Fisher-Yates: the first `take` entries become a uniform
        // draw without replacement.
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(id)));
        const std::size_t take = std::min(n_per_class, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + rng.uniform_index(pool.size() - i);
            std::swap(pool[i], pool[j]);
            const int x = static_cast<int>(pool[i] % static_cast<std::uint32_t>(w));
            const int y = static_cast<int>(pool[i] / static_cast<std::uint32_t>(w));
            raster.pixel(x, y, px);
            features.insert(features.end(), px.begin(), px.end());
            out_labels.push_back(static_cast<std::uint8_t>(id));
            const std::int32_t poly = polygon_index.empty() ? -1 : polygon_index[pool[i]];
            provenance.push_back({poly, x, y});
        }
    }

    std::vector<std::string> names = raster.band_names();
    return SampleSet(d, std::move(features), std::move(out_labels), std::move(names), std::move(provenance));
}

ClassBandStats class_band_stats(const SampleSet& samples) {
    const int d = samples.n_features();
    std::map<std::uint8_t, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < samples.size(); ++i) rows[samples.label(i)].push_back(i);

    ClassBandStats stats;
    for (const auto& [id, idx] : rows) {
        ClassStats cs{id, idx.size(), std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
        for (auto i : idx) {
            const auto r = samples.row(i);
            for (int b = 0; b < d; ++b) cs.mean[b] += r[b];
        }
        for (int b = 0; b < d; ++b) cs.mean[b] /= static_cast<double>(idx.size());
        // Two-pass variance; population form (divide by n).
        for (auto i : idx) {
            const auto r = samples.row(i);
            for (int b = 0; b < d; ++b) {
                const double dev = r[b] - cs.mean[b];
                cs.stddev[b] += dev * dev;
            }
        }
        for (int b = 0; b < d; ++b) cs.stddev[b] = std::sqrt(cs.stddev[b] / static_cast<double>(idx.size()));
        stats.classes.push_back(std::move(cs));
    }
    return stats;
}

void write_class_stats_csv(const ClassBandStats& stats, const ClassSchema& schema,
                           const std::vector<std::string>& band_names, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "class_id,class_name,band,mean,std,count\n";
    for (const auto& cs : stats.classes) {
        const std::string name = schema.contains(cs.class_id) ? schema.at(cs.class_id).name : "";
        for (std::size_t b = 0; b < cs.mean.size(); ++b) {
            const std::string band = b < band_names.size() ? band_names[b] : "b" + std::to_string(b + 1);
            out << int(cs.class_id) << ',' << name << ',' << band << ',' << text::format_double(cs.mean[b]) << ','
                << text::format_double(cs.stddev[b]) << ',' << cs.count << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

PolygonSplit split_polygons(std::span<const LabeledPolygon> polygons, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw ValidationError("test_fraction must lie in [0, 1]");
    }
    std::map<std::uint8_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < polygons.size(); ++i) by_class[polygons[i].class_id].push_back(i);

    std::vector<bool> is_test(polygons.size(), false);
    for (auto& [id, idx] : by_class) {
        if (idx.size() < 2) {
            throw UnsplittableClassError("class " + std::to_string(id) + " has only " + std::to_string(idx.size()) +
                                         " polygon; at least 2 are needed to split");
        }
        // Guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4.
        const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(idx.size()) - 1e-9));
        Rng rng(derive_seed(seed, id));
        rng.shuffle(idx.begin(), idx.end());
        for (std::size_t k = 0; k < std::min(n_test, idx.size()); ++k) is_test[idx[k]] = true;
    }

    PolygonSplit split;
    for (std::size_t i = 0; i < polygons.size(); ++i) {
        if (is_test[i]) {
            split.test.push_back(polygons[i]);
            split.test_indices.push_back(i);
        } else {
            split.train.push_back(polygons[i]);
            split.train_indices.push_back(i);
        }
    }
    return split;
}

void Scaler::apply(std::span<const float> in, std::span<float> out) const {
    for (std::size_t b = 0; b < mean.size(); ++b) {
        out[b] = passthrough[b] ? in[b] : static_cast<float>((in[b] - mean[b]) / scale[b]);
    }
}

std::vector<float> Scaler::apply(std::span<const float> in) const {
    if (in.size() != mean.size()) throw DimensionError("scaler width does not match feature vector");
    std::vector<float> out(in.size());
    apply(in, out);
    return out;
}

Scaler fit_scaler(const SampleSet& samples) {
    if (samples.empty()) throw ValidationError("cannot fit a scaler on an empty sample set");
    const int d = samples.n_features();
    Scaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), std::vector<bool>(d, false)};
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r = samples.row(i);
        for (int b = 0; b < d; ++b) s.mean[b] += r[b];
    }
    for (int b = 0; b < d; ++b) s.mean[b] /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r = samples.row(i);
        for (int b = 0; b < d; ++b) {
            const double dev = r[b] - s.mean[b];
            var[b] += dev * dev;
        }
    }
    for (int b = 0; b < d; ++b) {
        const double sd = std::sqrt(var[b] / n);
        if (sd > 0.0) {
            s.scale[b] = sd;
        } else {
            s.passthrough[b] = true;
            s.mean[b] = 0.0;
        }
    }
    return s;
}

std::vector<float> apply_scaler(const Scaler& scaler, std::span<const float> features) {
    const std::size_t d = scaler.size();
    if (d == 0 || features.size() % d != 0) throw DimensionError("feature matrix width does not match scaler");
    std::vector<float> out(features.size());
    for (std::size_t off = 0; off < features.size(); off += d) {
        scaler.apply(features.subspan(off, d), std::span<float>(out).subspan(off, d));
    }
    return out;
}

void write_samples_csv(const SampleSet& samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "polygon,x,y,class_id";
    for (const auto& name : samples.feature_names()) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& o = samples.provenance()[i];
        out << o.polygon << ',' << o.x << ',' << o.y << ',' << int(samples.label(i));
        for (float v : samples.row(i)) out << ',' << text::format_float(v);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open samples " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw CorruptFileError(path.string() + ": empty samples file");
    const auto header = text::split(text::trim(line), ',');
    if (header.size() < 5 || header[0] != "polygon" || header[1] != "x" || header[2] != "y" ||
        header[3] != "class_id") {
        throw CorruptFileError(path.string() + ": expected header polygon,x,y,class_id,<features...>");
    }
    const int d = static_cast<int>(header.size() - 4);
    std::vector<std::string> names(header.begin() + 4, header.end());
    std::vector<float> features;
    std::vector<std::uint8_t> labels;
    std::vector<SampleOrigin> provenance;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != header.size()) {
            throw CorruptFileError(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
        }
        try {
            provenance.push_back({static_cast<std::int32_t>(text::parse_int(f[0])),
                                  static_cast<std::int32_t>(text::parse_int(f[1])),
                                  static_cast<std::int32_t>(text::parse_int(f[2]))});
            const auto id = text::parse_int(f[3]);
            if (id < 1 || id > 255) throw ValidationError("class id out of range");
            labels.push_back(static_cast<std::uint8_t>(id));
            for (int b = 0; b < d; ++b) features.push_back(text::parse_float(f[4 + b]));
        } catch (const ValidationError& e) {
            throw CorruptFileError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return SampleSet(d, std::move(features), std::move(labels), std::move(names), std::move(provenance));
}

} // namespace smallgeo
