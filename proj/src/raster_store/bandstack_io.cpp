#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "smallgeo/errors.hpp"
#include "smallgeo/raster_store.hpp"
#include "smallgeo/text.hpp"

namespace smallgeo {

namespace fs = std::filesystem;

namespace {

fs::path stem_of(const fs::path& path) {
    const auto ext = path.extension();
    if (ext == ".hdr" || ext == ".bsq" || ext == ".png") {
        auto p = path;
        p.replace_extension();
        return p;
    }
    return path;
}

enum class DType { float32, uint8 };

std::size_t dtype_size(DType t) { return t == DType::float32 ? 4 : 1; }

struct Header {
    int ncols = 0;
    int nrows = 0;
    int nbands = 0;
    DType dtype = DType::float32;
    GeoTransform geotransform = kIdentityGeoTransform;
    std::optional<float> nodata;
    std::vector<std::string> band_names;
};

Header parse_header(const fs::path& hdr) {
    std::ifstream in(hdr);
    if (!in) throw IoError("cannot open header " + hdr.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw CorruptFileError(hdr.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        kv[std::string(text::trim(t.substr(0, eq)))] = std::string(text::trim(t.substr(eq + 1)));
    }
    auto require = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw CorruptFileError(hdr.string() + ": missing header field '" + key + "'");
        return it->second;
    };

    Header h;
    try {
        h.ncols = static_cast<int>(text::parse_int(require("ncols")));
        h.nrows = static_cast<int>(text::parse_int(require("nrows")));
        h.nbands = static_cast<int>(text::parse_int(require("nbands")));
        const auto gt = text::split(require("geotransform"), ',');
        if (gt.size() != 6) throw CorruptFileError(hdr.string() + ": geotransform needs 6 numbers");
        for (std::size_t i = 0; i < 6; ++i) h.geotransform[i] = text::parse_double(gt[i]);
        if (const auto it = kv.find("nodata"); it != kv.end() && !it->second.empty()) {
            h.nodata = text::parse_float(it->second);
        }
    } catch (const ValidationError& e) {
        throw CorruptFileError(hdr.string() + ": " + e.what());
    }
    const auto& dtype = require("dtype");
    if (dtype == "float32") {
        h.dtype = DType::float32;
    } else if (dtype == "uint8") {
        h.dtype = DType::uint8;
    } else {
        throw UnsupportedFormatError(hdr.string() + ": unsupported dtype '" + dtype + "'");
    }
    if (const auto it = kv.find("interleave"); it != kv.end() && it->second != "bsq") {
        throw UnsupportedFormatError(hdr.string() + ": unsupported interleave '" + it->second + "'");
    }
    if (const auto it = kv.find("band_names"); it != kv.end() && !it->second.empty()) {
        h.band_names = text::split(it->second, ',');
    }
    if (h.ncols < 1 || h.nrows < 1 || h.nbands < 1) {
        throw CorruptFileError(hdr.string() + ": dimensions must be positive");
    }
    return h;
}

void write_header(const fs::path& hdr, int ncols, int nrows, int nbands, const char* dtype, const GeoTransform& gt,
                  const std::optional<float>& nodata, const std::vector<std::string>& band_names) {
    std::ostringstream out;
    out << "ncols = " << ncols << '\n';
    out << "nrows = " << nrows << '\n';
    out << "nbands = " << nbands << '\n';
    out << "dtype = " << dtype << '\n';
    out << "interleave = bsq\n";
    out << "geotransform = ";
    for (std::size_t i = 0; i < gt.size(); ++i) out << (i ? ", " : "") << text::format_double(gt[i]);
    out << '\n';
    if (nodata) out << "nodata = " << text::format_float(*nodata) << '\n';
    if (!band_names.empty()) out << "band_names = " << text::join(band_names, ", ") << '\n';

    std::ofstream f(hdr, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + hdr.string());
    f << out.str();
    if (!f) throw IoError("write failed: " + hdr.string());
}

void write_payload(const fs::path& bsq, const void* data, std::size_t bytes) {
    std::ofstream f(bsq, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + bsq.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!f) throw IoError("write failed: " + bsq.string());
}

std::vector<char> read_payload(const fs::path& bsq, std::size_t expected_bytes) {
    std::error_code ec;
    const auto actual = fs::file_size(bsq, ec);
    if (ec) throw CorruptFileError("missing payload " + bsq.string() + " (expected " +
                                   std::to_string(expected_bytes) + " bytes)");
    if (actual != expected_bytes) {
        throw CorruptFileError("payload " + bsq.string() + " has " + std::to_string(actual) + " bytes, expected " +
                               std::to_string(expected_bytes));
    }
    std::vector<char> buf(expected_bytes);
    std::ifstream f(bsq, std::ios::binary);
    if (!f) throw IoError("cannot open " + bsq.string());
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(f.gcount()) != expected_bytes) {
        throw CorruptFileError("short read on " + bsq.string());
    }
    return buf;
}

} // namespace

fs::path header_path(const fs::path& path) {
    auto p = stem_of(path);
    p += ".hdr";
    return p;
}

fs::path payload_path(const fs::path& path) {
    auto p = stem_of(path);
    p += ".bsq";
    return p;
}

RasterStack read_bandstack(const fs::path& path) {
    const Header h = parse_header(header_path(path));
    const std::size_t count = static_cast<std::size_t>(h.ncols) * h.nrows * h.nbands;
    const auto buf = read_payload(payload_path(path), count * dtype_size(h.dtype));
    std::vector<float> values(count);
    if (h.dtype == DType::float32) {
        std::memcpy(values.data(), buf.data(), buf.size());
    } else {
        for (std::size_t i = 0; i < count; ++i) values[i] = static_cast<unsigned char>(buf[i]);
    }
    try {
        return RasterStack(h.ncols, h.nrows, h.nbands, std::move(values), h.geotransform, h.nodata, h.band_names);
    } catch (const ValidationError& e) {
        throw CorruptFileError(header_path(path).string() + ": " + e.what());
    }
}

void write_bandstack(const RasterStack& raster, const fs::path& path) {
    const auto values = raster.values();
    write_payload(payload_path(path), values.data(), values.size_bytes());
    write_header(header_path(path), raster.width(), raster.height(), raster.bands(), "float32",
                 raster.geotransform(), raster.nodata(), raster.band_names());
}

void write_class_map(const LabelRaster& labels, const ClassSchema& schema, const fs::path& path) {
    check_labels_in_schema(labels, schema);

    std::array<Rgb, 256> palette{};
    for (const auto& e : schema.entries()) palette[e.id] = e.color;
    RgbImage image{labels.width(), labels.height(), {}};
    image.pixels.reserve(labels.pixel_count());
    for (auto id : labels.labels()) image.pixels.push_back(palette[id]);

    const auto ids = labels.labels();
    write_payload(payload_path(path), ids.data(), ids.size());
    write_header(header_path(path), labels.width(), labels.height(), 1, "uint8", labels.geotransform(), std::nullopt,
                 {"class_id"});
    auto png = stem_of(path);
    png += ".png";
    write_png(image, png);
}

LabelRaster read_class_map(const fs::path& path) {
    const Header h = parse_header(header_path(path));
    if (h.dtype != DType::uint8 || h.nbands != 1) {
        throw UnsupportedFormatError(header_path(path).string() + ": class maps must be single-band uint8");
    }
    const std::size_t count = static_cast<std::size_t>(h.ncols) * h.nrows;
    const auto buf = read_payload(payload_path(path), count);
    std::vector<std::uint8_t> ids(buf.begin(), buf.end());
    return LabelRaster(h.ncols, h.nrows, std::move(ids), h.geotransform);
}

ClassSchema read_schema(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema " + path.string());
    std::vector<ClassEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = text::split(t, ',');
        if (line_no == 1 && !fields.empty() && fields[0] == "class_id") continue;
        if (fields.size() != 5) {
            throw CorruptFileError(path.string() + ":" + std::to_string(line_no) +
                                   ": expected class_id,name,red,green,blue");
        }
        try {
            auto channel = [](const std::string& s) {
                const auto v = text::parse_int(s);
                if (v < 0 || v > 255) throw ValidationError("color channel out of range: " + s);
                return static_cast<std::uint8_t>(v);
            };
            const auto id = text::parse_int(fields[0]);
            if (id < 1 || id > 255) throw ValidationError("class id out of range 1-255: " + fields[0]);
            entries.push_back(
                {static_cast<std::uint8_t>(id), fields[1], {channel(fields[2]), channel(fields[3]), channel(fields[4])}});
        } catch (const ValidationError& e) {
            throw CorruptFileError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ClassSchema(std::move(entries));
}

void write_schema(const ClassSchema& schema, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "class_id,name,red,green,blue\n";
    for (const auto& e : schema.entries()) {
        out << int(e.id) << ',' << e.name << ',' << int(e.color.r) << ',' << int(e.color.g) << ',' << int(e.color.b)
            << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace smallgeo
