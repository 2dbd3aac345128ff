#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "smallgeo/errors.hpp"
#include "smallgeo/raster_store.hpp"

namespace smallgeo {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void quiet_warning(png_structp, png_const_charp) {}

// libpng reports failures by longjmp; these helpers keep every object with a
// destructor outside the frame that calls setjmp.
bool write_rows(std::FILE* file, const RgbImage& image) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, file);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
        png_write_row(png,
                      reinterpret_cast<png_const_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

enum class ReadStatus { ok, failed, unsupported };

ReadStatus read_rows(std::FILE* file, RgbImage& image) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
    if (!png) return ReadStatus::failed;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return ReadStatus::failed;
    }
    png_init_io(png, file);
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        return ReadStatus::unsupported;
    }
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    if (static_cast<std::size_t>(width) * height != image.pixels.size()) {
        image.width = static_cast<int>(width);
        image.height = static_cast<int>(height);
        png_destroy_read_struct(&png, &info, nullptr);
        return ReadStatus::failed;
    }
    for (png_uint_32 y = 0; y < height; ++y) {
        png_read_row(png, reinterpret_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * width),
                     nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return ReadStatus::ok;
}

bool peek_size(std::FILE* file, int& width, int& height, bool& rgb8) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, file);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    rgb8 = png_get_color_type(png, info) == PNG_COLOR_TYPE_RGB && png_get_bit_depth(png, info) == 8;
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

} // namespace

void write_png(const RgbImage& image, const std::filesystem::path& path) {
    static_assert(sizeof(Rgb) == 3);
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw ValidationError("PNG image dimensions do not match pixel count");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write " + path.string());
    if (!write_rows(file.get(), image)) throw IoError("PNG encoding failed: " + path.string());
    if (std::fflush(file.get()) != 0) throw IoError("write failed: " + path.string());
}

RgbImage read_png(const std::filesystem::path& path) {
    int width = 0;
    int height = 0;
    bool rgb8 = false;
    {
        FilePtr file(std::fopen(path.c_str(), "rb"));
        if (!file) throw IoError("cannot open " + path.string());
        if (!peek_size(file.get(), width, height, rgb8)) throw CorruptFileError("invalid PNG: " + path.string());
    }
    if (!rgb8) throw UnsupportedFormatError(path.string() + ": only 8-bit RGB PNG is supported");

    RgbImage image{width, height, std::vector<Rgb>(static_cast<std::size_t>(width) * height)};
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open " + path.string());
    switch (read_rows(file.get(), image)) {
    case ReadStatus::ok: return image;
    case ReadStatus::unsupported: throw UnsupportedFormatError(path.string() + ": only 8-bit RGB PNG is supported");
    case ReadStatus::failed: break;
    }
    throw CorruptFileError("invalid PNG: " + path.string());
}

} // namespace smallgeo
