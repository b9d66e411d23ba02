#include "dmnet/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "dmnet/error.hpp"

namespace dmnet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// Decodes to either RGB (3 channels) or gray (1 channel).
void read_png(const std::string& path, int want_channels, int& width, int& height,
              std::vector<std::uint8_t>& out) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("cannot open PNG: " + path);

    PngRead ctx;
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw DataError("png_create_read_struct failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw DataError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw DataError("corrupt PNG: " + path);

    png_init_io(ctx.png, f.get());
    png_read_info(ctx.png, ctx.info);

    png_set_strip_16(ctx.png);
    png_set_packing(ctx.png);
    const int color = png_get_color_type(ctx.png, ctx.info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (want_channels == 3) {
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(ctx.png);
        png_set_strip_alpha(ctx.png);
    } else {
        // masks carry class ids, so any color conversion would corrupt them
        if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA)
            throw DataError("mask PNG must be grayscale: " + path);
        png_set_strip_alpha(ctx.png);
    }
    png_read_update_info(ctx.png, ctx.info);

    width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
    height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
    const int channels = png_get_channels(ctx.png, ctx.info);
    if (channels != want_channels)
        throw DataError("PNG " + path + ": expected " + std::to_string(want_channels) +
                        " channels after conversion, got " + std::to_string(channels));

    out.assign(static_cast<size_t>(width) * height * want_channels, 0);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = out.data() + static_cast<size_t>(y) * width * want_channels;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
    if (static_cast<size_t>(width) * height * channels != pixels.size())
        throw ShapeError("write_png: pixel buffer size mismatch");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("cannot create PNG: " + path);

    PngWrite ctx;
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw DataError("png_create_write_struct failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw DataError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw DataError("PNG write failed: " + path);

    png_init_io(ctx.png, f.get());
    // pinned filter + compression level keep output byte-stable across runs
    png_set_filter(ctx.png, 0, PNG_FILTER_NONE);
    png_set_compression_level(ctx.png, 6);
    png_set_IHDR(ctx.png, ctx.info, width, height, 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * width * channels);
    png_write_image(ctx.png, rows.data());
    png_write_end(ctx.png, nullptr);
}

}  // namespace

ImageU8 read_image_png(const std::string& path) {
    ImageU8 img;
    read_png(path, 3, img.width, img.height, img.pixels);
    return img;
}

MaskU8 read_mask_png(const std::string& path) {
    MaskU8 m;
    read_png(path, 1, m.width, m.height, m.pixels);
    return m;
}

void write_image_png(const std::string& path, const ImageU8& img) {
    write_png(path, img.width, img.height, 3, img.pixels);
}

void write_mask_png(const std::string& path, const MaskU8& mask) {
    write_png(path, mask.width, mask.height, 1, mask.pixels);
}

}  // namespace dmnet
