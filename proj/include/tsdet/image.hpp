#ifndef TSDET_IMAGE_HPP
#define TSDET_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsdet/raster.hpp"

namespace tsd {

// 8-bit RGB image, interleaved row-major.
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // size = width*height*3

    Image8() = default;
    Image8(int w, int h, uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

    bool empty() const { return width == 0 || height == 0; }

    const uint8_t* px(int x, int y) const {
        return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    uint8_t* px(int x, int y) {
        return pixels.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        uint8_t* p = px(x, y);
        p[0] = r; p[1] = g; p[2] = b;
    }
};

// Decoders for binary PPM (P6), PGM (P5), and 8-bit PNG. Grayscale and
// paletted/alpha PNGs are expanded to RGB. Format sniffed from content.
Image8 read_image(const std::string& path);

void write_ppm(const std::string& path, const Image8& img);
void write_png(const std::string& path, const Image8& img);

// 8-bit PGM dump of a single channel, min/max normalized.
void write_pgm_normalized(const std::string& path, const Raster& r);
// Little-endian PFM (grayscale float) dump, exact values.
void write_pfm(const std::string& path, const Raster& r);

// Bilinear resize. Throws InvalidInput on empty input or non-positive dims.
Image8 resize_bilinear(const Image8& img, int out_w, int out_h);

// Crop [left,left+w) x [top,top+h); pixels outside the image replicate the
// nearest edge pixel.
Image8 crop_replicate(const Image8& img, int left, int top, int w, int h);

// Rotate about the crop center by `degrees` (counter-clockwise), sampling the
// source with bilinear interpolation and edge replication, then crop the same
// geometry. A zero angle reproduces crop_replicate exactly.
Image8 crop_rotated(const Image8& img, int left, int top, int w, int h, double degrees);

Image8 flip_horizontal(const Image8& img);

}  // namespace tsd

#endif
