#include <fstream>

#include <json.hpp>

#include "smallgeo/errors.hpp"
#include "smallgeo/vector_labels.hpp"

namespace smallgeo {

using nlohmann::json;

namespace {

Ring parse_ring(const json& coords, const std::string& where) {
    if (!coords.is_array()) throw CorruptFileError(where + ": ring is not an array");
    Ring ring;
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw CorruptFileError(where + ": position must be [x, y]");
        }
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    // GeoJSON rings repeat the first vertex; ours are implicitly closed.
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
    return ring;
}

json ring_to_json(const Ring& ring) {
    json coords = json::array();
    for (const auto& p : ring) coords.push_back({p.x, p.y});
    if (!ring.empty()) coords.push_back({ring.front().x, ring.front().y});
    return coords;
}

} // namespace

std::vector<LabeledPolygon> read_polygons_geojson(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw CorruptFileError(path.string() + ": " + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") || !doc["features"].is_array()) {
        throw CorruptFileError(path.string() + ": expected a GeoJSON FeatureCollection");
    }
    std::vector<LabeledPolygon> out;
    std::size_t index = 0;
    for (const auto& feature : doc["features"]) {
        const std::string where = path.string() + ": feature " + std::to_string(index++);
        const auto& geom = feature.contains("geometry") ? feature["geometry"] : json();
        if (!geom.is_object() || geom.value("type", "") != "Polygon") {
            throw UnsupportedFormatError(where + ": only Polygon geometries are supported");
        }
        const auto& props = feature.contains("properties") ? feature["properties"] : json();
        if (!props.is_object() || !props.contains("class_id") || !props["class_id"].is_number_integer()) {
            throw CorruptFileError(where + ": missing integer property 'class_id'");
        }
        if (!props.contains("class_name") || !props["class_name"].is_string()) {
            throw CorruptFileError(where + ": missing text property 'class_name'");
        }
        const auto id = props["class_id"].get<long long>();
        if (id < 1 || id > 255) throw CorruptFileError(where + ": class_id must be in 1-255");
        const auto& rings = geom["coordinates"];
        if (!rings.is_array() || rings.empty()) throw CorruptFileError(where + ": polygon has no rings");

        LabeledPolygon poly;
        poly.class_id = static_cast<std::uint8_t>(id);
        poly.class_name = props["class_name"].get<std::string>();
        poly.exterior = parse_ring(rings[0], where);
        for (std::size_t r = 1; r < rings.size(); ++r) poly.holes.push_back(parse_ring(rings[r], where));
        try {
            validate_polygon(poly);
        } catch (const ValidationError& e) {
            throw CorruptFileError(where + ": " + e.what());
        }
        out.push_back(std::move(poly));
    }
    return out;
}

void write_polygons_geojson(std::span<const LabeledPolygon> polygons, const std::filesystem::path& path) {
    json features = json::array();
    for (const auto& poly : polygons) {
        json rings = json::array();
        rings.push_back(ring_to_json(poly.exterior));
        for (const auto& hole : poly.holes) rings.push_back(ring_to_json(hole));
        json feature = {{"type", "Feature"},
                        {"properties", {{"class_id", poly.class_id}, {"class_name", poly.class_name}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}};
        features.push_back(std::move(feature));
    }
    const json doc = {{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace smallgeo
