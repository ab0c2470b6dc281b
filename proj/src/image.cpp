#include "tsdet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "tsdet/errors.hpp"

namespace tsd {

namespace {

void skip_pnm_space(std::istream& in) {
    int c = in.peek();
    while (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '#') {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            in.get();
        }
        c = in.peek();
    }
}

int read_pnm_int(std::istream& in, const std::string& path) {
    skip_pnm_space(in);
    int v = -1;
    in >> v;
    if (!in || v < 0) throw DataError("bad PNM header in " + path);
    return v;
}

Image8 read_pnm(std::istream& in, const std::string& path) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw DataError("unsupported PNM magic in " + path);
    const bool gray = magic[1] == '5';
    const int w = read_pnm_int(in, path);
    const int h = read_pnm_int(in, path);
    const int maxval = read_pnm_int(in, path);
    if (maxval <= 0 || maxval > 255) throw DataError("unsupported PNM maxval in " + path);
    in.get();  // single whitespace before raster data
    Image8 img(w, h);
    const size_t n = static_cast<size_t>(w) * h;
    std::vector<uint8_t> buf(gray ? n : n * 3);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(in.gcount()) != buf.size())
        throw DataError("truncated PNM data in " + path);
    if (gray) {
        for (size_t i = 0; i < n; ++i) {
            img.pixels[i * 3 + 0] = buf[i];
            img.pixels[i * 3 + 1] = buf[i];
            img.pixels[i * 3 + 2] = buf[i];
        }
    } else {
        img.pixels = std::move(buf);
    }
    return img;
}

Image8 read_png_file(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw DataError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw DataError("PNG decode failed for " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    Image8 img(w, h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace

Image8 read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.seekg(0);
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return read_pnm(in, path);
    if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
        in.close();
        return read_png_file(path);
    }
    throw DataError("unrecognized image format: " + path);
}

void write_ppm(const std::string& path, const Image8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw DataError("short write to " + path);
}

void write_png(const std::string& path, const Image8& img) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw DataError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw DataError("PNG encode failed for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void write_pgm_normalized(const std::string& path, const Raster& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    float lo = 0.f, hi = 0.f;
    if (!r.empty()) {
        lo = hi = r.data()[0];
        for (size_t i = 1; i < r.size(); ++i) {
            lo = std::min(lo, r.data()[i]);
            hi = std::max(hi, r.data()[i]);
        }
    }
    const float scale = hi > lo ? 255.f / (hi - lo) : 0.f;
    out << "P5\n" << r.width() << " " << r.height() << "\n255\n";
    for (size_t i = 0; i < r.size(); ++i) {
        const int v = static_cast<int>(std::lround((r.data()[i] - lo) * scale));
        out.put(static_cast<char>(std::clamp(v, 0, 255)));
    }
}

void write_pfm(const std::string& path, const Raster& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "Pf\n" << r.width() << " " << r.height() << "\n-1.0\n";
    // PFM stores rows bottom-to-top.
    for (int y = r.height() - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char*>(r.row(y)),
                  static_cast<std::streamsize>(sizeof(float)) * r.width());
}

Image8 resize_bilinear(const Image8& img, int out_w, int out_h) {
    if (img.empty()) throw InvalidInput("resize_bilinear: empty image");
    if (out_w < 1 || out_h < 1) throw InvalidInput("resize_bilinear: non-positive dims");
    Image8 out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        // Map output pixel centers to source pixel centers.
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int y1 = std::clamp(y0 + 1, 0, img.height - 1);
        y0 = std::clamp(y0, 0, img.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int x1 = std::clamp(x0 + 1, 0, img.width - 1);
            x0 = std::clamp(x0, 0, img.width - 1);
            const uint8_t* p00 = img.px(x0, y0);
            const uint8_t* p10 = img.px(x1, y0);
            const uint8_t* p01 = img.px(x0, y1);
            const uint8_t* p11 = img.px(x1, y1);
            uint8_t* q = out.px(x, y);
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - wy) * ((1 - wx) * p00[c] + wx * p10[c]) +
                                 wy * ((1 - wx) * p01[c] + wx * p11[c]);
                q[c] = static_cast<uint8_t>(std::clamp(static_cast<int>(std::lround(v)), 0, 255));
            }
        }
    }
    return out;
}

Image8 crop_replicate(const Image8& img, int left, int top, int w, int h) {
    if (img.empty()) throw InvalidInput("crop_replicate: empty image");
    if (w < 1 || h < 1) throw InvalidInput("crop_replicate: non-positive dims");
    Image8 out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = std::clamp(top + y, 0, img.height - 1);
        for (int x = 0; x < w; ++x) {
            const int sx = std::clamp(left + x, 0, img.width - 1);
            std::memcpy(out.px(x, y), img.px(sx, sy), 3);
        }
    }
    return out;
}

Image8 crop_rotated(const Image8& img, int left, int top, int w, int h, double degrees) {
    if (degrees == 0.0) return crop_replicate(img, left, top, w, h);
    if (img.empty()) throw InvalidInput("crop_rotated: empty image");
    if (w < 1 || h < 1) throw InvalidInput("crop_rotated: non-positive dims");
    const double rad = degrees * M_PI / 180.0;
    const double ca = std::cos(rad), sa = std::sin(rad);
    const double cx = left + (w - 1) / 2.0, cy = top + (h - 1) / 2.0;
    Image8 out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = left + x - cx, dy = top + y - cy;
            // Inverse map: rotate the sampling grid by -angle.
            const double sxf = cx + ca * dx + sa * dy;
            const double syf = cy - sa * dx + ca * dy;
            int x0 = static_cast<int>(std::floor(sxf));
            int y0 = static_cast<int>(std::floor(syf));
            const double wx = sxf - x0, wy = syf - y0;
            const int x1 = std::clamp(x0 + 1, 0, img.width - 1);
            const int y1 = std::clamp(y0 + 1, 0, img.height - 1);
            x0 = std::clamp(x0, 0, img.width - 1);
            y0 = std::clamp(y0, 0, img.height - 1);
            const uint8_t* p00 = img.px(x0, y0);
            const uint8_t* p10 = img.px(x1, y0);
            const uint8_t* p01 = img.px(x0, y1);
            const uint8_t* p11 = img.px(x1, y1);
            uint8_t* q = out.px(x, y);
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - wy) * ((1 - wx) * p00[c] + wx * p10[c]) +
                                 wy * ((1 - wx) * p01[c] + wx * p11[c]);
                q[c] = static_cast<uint8_t>(std::clamp(static_cast<int>(std::lround(v)), 0, 255));
            }
        }
    }
    return out;
}

Image8 flip_horizontal(const Image8& img) {
    Image8 out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            std::memcpy(out.px(x, y), img.px(img.width - 1 - x, y), 3);
    return out;
}

}  // namespace tsd
