#include <algorithm>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "smallgeo/errors.hpp"
#include "smallgeo/pipeline/config.hpp"
#include "smallgeo/text.hpp"

namespace smallgeo {

namespace pt = boost::property_tree;

Config Config::parse(const std::string& text, const std::string& origin) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    Config c;
    c.origin_ = origin;
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            throw ValidationError(origin + ": key '" + name + "' must appear inside a [section]");
        }
        Entries entries;
        for (const auto& [key, value] : node) {
            entries.emplace_back(key, std::string(text::trim(value.data())));
        }
        c.sections_.emplace_back(name, std::move(entries));
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

bool Config::has_section(const std::string& section) const {
    return std::any_of(sections_.begin(), sections_.end(), [&](const auto& s) { return s.first == section; });
}

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key).has_value(); }

std::optional<std::string> Config::find(const std::string& section, const std::string& key) const {
    for (const auto& [name, entries] : sections_) {
        if (name != section) continue;
        for (const auto& [k, v] : entries) {
            if (k == key) return v;
        }
    }
    return std::nullopt;
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& s : sections_) out.push_back(s.first);
    return out;
}

const Config::Entries& Config::entries(const std::string& section) const {
    static const Entries empty;
    for (const auto& s : sections_) {
        if (s.first == section) return s.second;
    }
    return empty;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
    return find(section, key).value_or(fallback);
}

std::string Config::require_string(const std::string& section, const std::string& key) const {
    auto v = find(section, key);
    if (!v || v->empty()) throw ValidationError(origin_ + ": missing [" + section + "] " + key);
    return *v;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    try {
        return text::parse_double(*v);
    } catch (const ValidationError& e) {
        throw ValidationError(origin_ + ": [" + section + "] " + key + ": " + e.what());
    }
}

long long Config::get_int(const std::string& section, const std::string& key, long long fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    try {
        return text::parse_int(*v);
    } catch (const ValidationError& e) {
        throw ValidationError(origin_ + ": [" + section + "] " + key + ": " + e.what());
    }
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        if (v->empty() || (*v)[0] == '-') throw std::invalid_argument("negative");
        const auto value = std::stoull(*v, &used, 10);
        if (used != v->size()) throw std::invalid_argument("trailing text");
        return value;
    } catch (const std::exception&) {
        throw ValidationError(origin_ + ": [" + section + "] " + key + ": expected an unsigned integer, got '" + *v +
                              "'");
    }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw ValidationError(origin_ + ": [" + section + "] " + key + ": expected true or false, got '" + *v + "'");
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    auto it = std::find_if(sections_.begin(), sections_.end(), [&](const auto& s) { return s.first == section; });
    if (it == sections_.end()) {
        sections_.emplace_back(section, Entries{});
        it = std::prev(sections_.end());
    }
    for (auto& [k, v] : it->second) {
        if (k == key) {
            v = value;
            return;
        }
    }
    it->second.emplace_back(key, value);
}

void Config::remove_section(const std::string& section) {
    sections_.erase(std::remove_if(sections_.begin(), sections_.end(), [&](const auto& s) { return s.first == section; }),
                    sections_.end());
}

std::string Config::to_string() const {
    std::string out;
    for (const auto& [name, entries] : sections_) {
        if (!out.empty()) out += "\n";
        out += "[" + name + "]\n";
        for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
    }
    return out;
}

void Config::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_string();
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace smallgeo
