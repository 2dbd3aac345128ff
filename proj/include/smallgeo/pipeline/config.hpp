#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace smallgeo {

// Flat "key = value" text with [section] headers; '#' and ';' start comments.
// Section and key order is preserved.
class Config {
  public:
    using Entries = std::vector<std::pair<std::string, std::string>>;

    static Config parse(const std::string& text, const std::string& origin = "<config>");
    static Config load(const std::filesystem::path& path);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    std::optional<std::string> find(const std::string& section, const std::string& key) const;
    std::vector<std::string> sections() const;
    const Entries& entries(const std::string& section) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    // Adds or replaces a value, appending new sections and keys at the end.
    void set(const std::string& section, const std::string& key, const std::string& value);
    void remove_section(const std::string& section);

    std::string to_string() const;
    void save(const std::filesystem::path& path) const;

  private:
    std::vector<std::pair<std::string, Entries>> sections_;
    std::string origin_;
};

} // namespace smallgeo
