#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "internal.hpp"
#include "smallgeo/text.hpp"

namespace smallgeo {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) return {};
    fs::path p(value);
    if (p.is_relative()) p = base / p;
    return p.lexically_normal();
}

int int_in(const Config& c, const std::string& section, const std::string& key, long long fallback, long long lo,
           long long hi) {
    const auto v = c.get_int(section, key, fallback);
    if (v < lo || v > hi) {
        throw ValidationError("[" + section + "] " + key + " = " + std::to_string(v) + " is outside " +
                              std::to_string(lo) + "-" + std::to_string(hi));
    }
    return static_cast<int>(v);
}

std::string hex(const unsigned char* data, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += digits[data[i] >> 4];
        out += digits[data[i] & 0xF];
    }
    return out;
}

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

std::vector<double> parse_list(const std::string& s, const std::string& where) {
    std::vector<double> out;
    for (const auto& part : text::split(s, ',')) {
        try {
            out.push_back(text::parse_double(text::trim(part)));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return out;
}

Rgb parse_color(const std::string& s, const std::string& where) {
    const auto v = parse_list(s, where);
    if (v.size() != 3) throw ValidationError(where + ": color must be 'r, g, b'");
    for (double x : v) {
        if (x < 0 || x > 255 || x != static_cast<int>(x)) throw ValidationError(where + ": color components are 0-255");
    }
    return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]), static_cast<std::uint8_t>(v[2])};
}

std::uint8_t section_class_id(const std::string& section, std::size_t prefix) {
    try {
        const auto id = text::parse_int(section.substr(prefix));
        if (id >= 1 && id <= 255) return static_cast<std::uint8_t>(id);
    } catch (const ValidationError&) {
    }
    throw ValidationError("[" + section + "]: the section suffix must be a class id in 1-255");
}

} // namespace

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    return hex(md.data(), len);
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1) {
            throw Error("SHA-256 update failed");
        }
    }
    if (in.bad()) throw IoError("read failed: " + path.string());
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
    return hex(md.data(), len);
}

PipelineConfig load_pipeline_config(const fs::path& path, const Overrides& overrides) {
    PipelineConfig p;
    p.source = Config::load(path);
    const Config& c = p.source;
    p.config_path = fs::absolute(path).lexically_normal();
    const fs::path base = p.config_path.parent_path();

    p.raster = resolve(base, c.get_string("input", "raster", ""));
    if (!p.raster.empty()) p.raster = header_path(p.raster);
    p.polygons = resolve(base, c.get_string("input", "polygons", ""));
    p.schema = resolve(base, c.get_string("input", "schema", ""));
    p.pathway = c.get_string("run", "pathway", "");
    p.output = overrides.out ? fs::absolute(*overrides.out).lexically_normal()
                             : resolve(base, c.get_string("run", "output", "out"));
    p.seed = overrides.seed ? *overrides.seed : c.get_u64("run", "seed", 42);

    p.test_fraction = c.get_double("split", "test_fraction", 0.25);
    p.split_seed = c.get_u64("split", "seed", p.seed);
    p.n_per_class = static_cast<std::size_t>(int_in(c, "samples", "n_per_class", 500, 1, 100000000));
    p.sample_seed = c.get_u64("samples", "seed", p.seed);

    p.rf.n_trees = int_in(c, "rf", "n_trees", p.rf.n_trees, 1, 100000);
    p.rf.mtry = int_in(c, "rf", "mtry", p.rf.mtry, 1, 100000);
    p.rf.min_leaf = int_in(c, "rf", "min_leaf", p.rf.min_leaf, 1, 100000000);
    p.rf.max_depth = int_in(c, "rf", "max_depth", p.rf.max_depth, 0, 1000);
    p.rf.seed = c.get_u64("rf", "seed", p.seed);

    p.svm.C = c.get_double("svm", "C", p.svm.C);
    p.svm.eps = c.get_double("svm", "eps", p.svm.eps);
    p.svm.max_iter = int_in(c, "svm", "max_iter", p.svm.max_iter, 1, 100000000);
    p.svm.seed = c.get_u64("svm", "seed", p.seed);

    auto& u = p.unet;
    u.patch_size = int_in(c, "unet", "patch_size", u.patch_size, 1, 4096);
    u.depth = int_in(c, "unet", "depth", u.depth, 1, 64);
    u.base_channels = int_in(c, "unet", "base_channels", u.base_channels, 1, 4096);
    u.dropout_rate = c.get_double("unet", "dropout_rate", u.dropout_rate);
    u.learning_rate = c.get_double("unet", "learning_rate", u.learning_rate);
    u.momentum = c.get_double("unet", "momentum", u.momentum);
    u.grad_clip = c.get_double("unet", "grad_clip", u.grad_clip);
    u.epochs = int_in(c, "unet", "epochs", u.epochs, 1, 100000000);
    u.batch_size = int_in(c, "unet", "batch_size", u.batch_size, 1, 1000000);
    u.seed = c.get_u64("unet", "seed", p.seed);

    p.expected_hashes = c.entries("input_hashes");
    return p;
}

void validate_pipeline_config(const PipelineConfig& p, bool require_pathway) {
    detail::require_file(p.raster, "[input] raster");
    detail::require_file(payload_path(p.raster), "raster payload");
    detail::require_file(p.polygons, "[input] polygons");
    detail::require_file(p.schema, "[input] schema");
    if (require_pathway && p.pathway.empty()) throw ValidationError("missing [run] pathway (rf, svm or unet)");
    if (!p.pathway.empty() && p.pathway != "rf" && p.pathway != "svm" && p.pathway != "unet") {
        throw ValidationError("unknown pathway '" + p.pathway + "' (expected rf, svm or unet)");
    }
    if (!(p.test_fraction > 0.0 && p.test_fraction < 1.0)) {
        throw ValidationError("[split] test_fraction must be in (0, 1)");
    }
    if (!(p.svm.C > 0.0) || !(p.svm.eps > 0.0)) throw ValidationError("[svm] C and eps must be > 0");
    UNetConfig probe = p.unet;
    probe.in_channels = 1;
    probe.n_classes = 1;
    probe.validate();

    const auto files = detail::input_files(p);
    for (const auto& [name, expected] : p.expected_hashes) {
        const auto it = std::find_if(files.begin(), files.end(), [&](const auto& f) { return f.first == name; });
        if (it == files.end()) throw ValidationError("manifest hashes unknown input '" + name + "'");
        const auto actual = sha256_file(it->second);
        if (actual != expected) {
            throw ValidationError("input " + it->second.string() + " changed since the manifest was written (sha256 " +
                                  actual + ", expected " + expected + ")");
        }
    }
}

SceneSpec scene_spec_from_config(const Config& c) {
    bool custom = false;
    for (const auto& s : c.sections()) custom = custom || s.rfind("class.", 0) == 0;
    SceneSpec spec = default_scene_spec(c.get_bool("scene", "texture", true));
    if (!custom && !spec.texture_classes.empty()) {
        spec.texture_classes[0].checker_period =
            int_in(c, "scene", "checker_period", spec.texture_classes[0].checker_period, 1, 1 << 20);
    }
    spec.width = int_in(c, "scene", "width", spec.width, 1, 1 << 16);
    spec.height = int_in(c, "scene", "height", spec.height, 1, 1 << 16);
    spec.regions_per_class = int_in(c, "scene", "regions_per_class", spec.regions_per_class, 1, 1 << 16);
    spec.label_fraction = c.get_double("scene", "label_fraction", spec.label_fraction);
    spec.geotransform[0] = c.get_double("scene", "origin_x", spec.geotransform[0]);
    spec.geotransform[3] = c.get_double("scene", "origin_y", spec.geotransform[3]);
    const double pixel = c.get_double("scene", "pixel_size", spec.geotransform[1]);
    spec.geotransform[1] = pixel;
    spec.geotransform[5] = -pixel;
    if (!custom) return spec;

    spec.classes.clear();
    spec.texture_classes.clear();
    spec.n_bands = int_in(c, "scene", "bands", 0, 0, 4096);
    for (const auto& section : c.sections()) {
        const bool is_class = section.rfind("class.", 0) == 0;
        const bool is_texture = section.rfind("texture.", 0) == 0;
        if (!is_class && !is_texture) continue;
        const std::string where = "[" + section + "]";
        if (is_class) {
            SpectralClass sc;
            sc.class_id = section_class_id(section, 6);
            sc.name = c.require_string(section, "name");
            sc.mean = parse_list(c.require_string(section, "mean"), where + " mean");
            sc.std = parse_list(c.require_string(section, "std"), where + " std");
            if (sc.std.size() == 1) sc.std.assign(sc.mean.size(), sc.std[0]);
            sc.color = parse_color(c.get_string(section, "color", "128, 128, 128"), where + " color");
            sc.separable = c.get_bool(section, "separable", true);
            if (spec.n_bands == 0) spec.n_bands = static_cast<int>(sc.mean.size());
            spec.classes.push_back(std::move(sc));
        } else {
            TextureClass tc;
            tc.class_id = section_class_id(section, 8);
            tc.name = c.require_string(section, "name");
            const auto parents = parse_list(c.require_string(section, "parents"), where + " parents");
            if (parents.size() != 2) throw ValidationError(where + ": parents must list two class ids");
            tc.parent_a = static_cast<std::uint8_t>(parents[0]);
            tc.parent_b = static_cast<std::uint8_t>(parents[1]);
            tc.checker_period = int_in(c, section, "period", 2, 1, 1 << 20);
            tc.color = parse_color(c.get_string(section, "color", "128, 128, 128"), where + " color");
            spec.texture_classes.push_back(std::move(tc));
        }
    }
    return spec;
}

namespace detail {

void require_file(const fs::path& path, const std::string& what) {
    if (path.empty()) throw ValidationError("missing " + what);
    if (!fs::is_regular_file(path)) throw ValidationError(what + " not found: " + path.string());
}

std::vector<std::pair<std::string, fs::path>> input_files(const PipelineConfig& p) {
    return {{"raster_header", p.raster},
            {"raster_payload", payload_path(p.raster)},
            {"polygons", p.polygons},
            {"schema", p.schema}};
}

Inputs load_inputs(const PipelineConfig& p, bool with_polygons) {
    Inputs in{read_bandstack(p.raster), read_schema(p.schema), {}};
    if (with_polygons) {
        in.polygons = read_polygons_geojson(p.polygons);
        for (const auto& poly : in.polygons) {
            if (!in.schema.contains(poly.class_id)) {
                throw SchemaMismatchError("polygon class " + std::to_string(poly.class_id) + " ('" + poly.class_name +
                                          "') is not in the schema");
            }
        }
    }
    return in;
}

fs::path prepare_output(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    return dir;
}

Config build_manifest(const PipelineConfig& p, const std::string& command, const std::vector<fs::path>& artifacts,
                      const std::vector<StageTiming>& timings) {
    using text::format_double;
    Config m;
    m.set("run", "command", command);
    if (!p.pathway.empty()) m.set("run", "pathway", p.pathway);
    m.set("run", "output", p.output.string());
    m.set("run", "seed", std::to_string(p.seed));
    m.set("input", "raster", p.raster.string());
    m.set("input", "polygons", p.polygons.string());
    m.set("input", "schema", p.schema.string());
    m.set("split", "test_fraction", format_double(p.test_fraction));
    m.set("split", "seed", std::to_string(p.split_seed));
    m.set("samples", "n_per_class", std::to_string(p.n_per_class));
    m.set("samples", "seed", std::to_string(p.sample_seed));
    m.set("rf", "n_trees", std::to_string(p.rf.n_trees));
    m.set("rf", "mtry", std::to_string(p.rf.mtry));
    m.set("rf", "min_leaf", std::to_string(p.rf.min_leaf));
    m.set("rf", "max_depth", std::to_string(p.rf.max_depth));
    m.set("rf", "seed", std::to_string(p.rf.seed));
    m.set("svm", "C", format_double(p.svm.C));
    m.set("svm", "eps", format_double(p.svm.eps));
    m.set("svm", "max_iter", std::to_string(p.svm.max_iter));
    m.set("svm", "seed", std::to_string(p.svm.seed));
    const auto& u = p.unet;
    m.set("unet", "patch_size", std::to_string(u.patch_size));
    m.set("unet", "depth", std::to_string(u.depth));
    m.set("unet", "base_channels", std::to_string(u.base_channels));
    m.set("unet", "dropout_rate", format_double(u.dropout_rate));
    m.set("unet", "learning_rate", format_double(u.learning_rate));
    m.set("unet", "momentum", format_double(u.momentum));
    m.set("unet", "grad_clip", format_double(u.grad_clip));
    m.set("unet", "epochs", std::to_string(u.epochs));
    m.set("unet", "batch_size", std::to_string(u.batch_size));
    m.set("unet", "seed", std::to_string(u.seed));
    m.set("manifest", "hash_algorithm", "sha256");
    for (const auto& [name, path] : input_files(p)) m.set("input_hashes", name, sha256_file(path));
    for (const auto& a : artifacts) m.set("artifacts", a.filename().string(), sha256_file(a));
    for (const auto& t : timings) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", t.seconds);
        m.set("timings", t.stage + "_seconds", buf);
    }
    return m;
}

UNetConfig unet_config_for(const PipelineConfig& p, const RasterStack& raster, const ClassSchema& schema) {
    UNetConfig u = p.unet;
    u.in_channels = raster.bands();
    u.n_classes = static_cast<int>(schema.size());
    u.validate();
    return u;
}

} // namespace detail
} // namespace smallgeo
