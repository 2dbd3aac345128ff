#include "smallgeo/text.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include "smallgeo/errors.hpp"

namespace smallgeo::text {

namespace {

template <class T>
std::string format_shortest(T value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) throw ValidationError("cannot format number");
    return std::string(buf.data(), end);
}

template <class T>
T parse_real(std::string_view s) {
    s = trim(s);
    if (s == "nan" || s == "NaN" || s == "NAN") return std::numeric_limits<T>::quiet_NaN();
    if (s == "inf" || s == "+inf") return std::numeric_limits<T>::infinity();
    if (s == "-inf") return -std::numeric_limits<T>::infinity();
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ValidationError("not a number: '" + std::string(s) + "'");
    }
    return value;
}

} // namespace

std::string format_double(double value) { return format_shortest(value); }
std::string format_float(float value) { return format_shortest(value); }

double parse_double(std::string_view s) { return parse_real<double>(s); }
float parse_float(std::string_view s) { return parse_real<float>(s); }

long long parse_int(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ValidationError("not an integer: '" + std::string(s) + "'");
    }
    return value;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(delim, start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view delim) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += delim;
        out += parts[i];
    }
    return out;
}

} // namespace smallgeo::text
