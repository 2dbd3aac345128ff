#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "smallgeo/errors.hpp"

namespace smallgeo {

static_assert(std::endian::native == std::endian::little,
              "model containers and band-stack payloads are little-endian");

// Little-endian writer for the versioned model containers.
class BinaryWriter {
  public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    void put_vector(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    }

    void put_magic(const char (&magic)[5]) { out_.write(magic, 4); }

    void check() const {
        if (!out_) throw IoError("write failed");
    }

  private:
    std::ostream& out_;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get() {
        T value{};
        read_bytes(&value, sizeof(T));
        return value;
    }

    std::string get_string() {
        const auto n = get<std::uint32_t>();
        if (n > (1u << 24)) throw CorruptFileError("string length out of range");
        std::string s(n, '\0');
        read_bytes(s.data(), n);
        return s;
    }

    template <class T>
        requires std::is_arithmetic_v<T>
    std::vector<T> get_vector(std::uint64_t max_len = (1ull << 32)) {
        const auto n = get<std::uint64_t>();
        if (n > max_len) throw CorruptFileError("vector length out of range");
        std::vector<T> v(static_cast<std::size_t>(n));
        read_bytes(v.data(), v.size() * sizeof(T));
        return v;
    }

    void expect_magic(const char (&magic)[5], const std::string& what) {
        char buf[4];
        read_bytes(buf, 4);
        if (std::memcmp(buf, magic, 4) != 0) throw UnsupportedFormatError("not a " + what + " file");
    }

  private:
    void read_bytes(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw CorruptFileError("unexpected end of file");
    }

    std::istream& in_;
};

} // namespace smallgeo
