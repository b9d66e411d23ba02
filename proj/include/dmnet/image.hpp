#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmnet {

// 8-bit RGB image, row-major, interleaved channels.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // height*width*3

    std::uint8_t& at(int y, int x, int c) { return pixels[(y * width + x) * 3 + c]; }
    std::uint8_t at(int y, int x, int c) const { return pixels[(y * width + x) * 3 + c]; }
};

// Single-channel 8-bit image; mask files store the class id per pixel.
struct MaskU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // height*width

    std::uint8_t& at(int y, int x) { return pixels[y * width + x]; }
    std::uint8_t at(int y, int x) const { return pixels[y * width + x]; }
};

ImageU8 read_image_png(const std::string& path);
MaskU8 read_mask_png(const std::string& path);

// Writers use fixed encoder settings so identical pixels give identical bytes.
void write_image_png(const std::string& path, const ImageU8& img);
void write_mask_png(const std::string& path, const MaskU8& mask);

}  // namespace dmnet
