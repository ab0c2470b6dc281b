#include "tsdet/channels.hpp"

#include <array>
#include <cmath>

#include "tsdet/errors.hpp"

namespace tsd {

namespace {

// D65 white point (2-degree observer).
constexpr double kXn = 0.950456;
constexpr double kYn = 1.0;
constexpr double kZn = 1.088754;

inline void luv_from_rgb(double r, double g, double b, double& L, double& U, double& V) {
    const double x = 0.412453 * r + 0.357580 * g + 0.180423 * b;
    const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
    const double z = 0.019334 * r + 0.119193 * g + 0.950227 * b;
    const double t = y / kYn;
    const double lstar = t > 0.008856 ? 116.0 * std::cbrt(t) - 16.0 : 903.2963 * t;
    const double denom = x + 15.0 * y + 3.0 * z;
    const double un = 4.0 * kXn / (kXn + 15.0 * kYn + 3.0 * kZn);
    const double vn = 9.0 * kYn / (kXn + 15.0 * kYn + 3.0 * kZn);
    const double up = denom > 0 ? 4.0 * x / denom : 0.0;
    const double vp = denom > 0 ? 9.0 * y / denom : 0.0;
    const double ustar = 13.0 * lstar * (up - un);
    const double vstar = 13.0 * lstar * (vp - vn);
    L = lstar / 100.0;
    U = (ustar + 134.0) / 354.0;
    V = (vstar + 140.0) / 262.0;
}

Raster smooth_raster(const Raster& in) {
    const int w = in.width(), h = in.height();
    Raster tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            tmp.at(x, y) = 0.25f * (in.at_clamped(x - 1, y) + 2.f * in.at(x, y) + in.at_clamped(x + 1, y));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = 0.25f * (tmp.at_clamped(x, y - 1) + 2.f * tmp.at(x, y) + tmp.at_clamped(x, y + 1));
    return out;
}

// 11x11 box mean with edge replication, via running row/column sums.
Raster box_mean_11(const Raster& in) {
    const int w = in.width(), h = in.height();
    const int r = 5;
    Raster rows(w, h), out(w, h);
    for (int y = 0; y < h; ++y) {
        double s = 0;
        for (int k = -r; k <= r; ++k) s += in.at_clamped(k, y);
        rows.at(0, y) = static_cast<float>(s / 11.0);
        for (int x = 1; x < w; ++x) {
            s += in.at_clamped(x + r, y) - in.at_clamped(x - r - 1, y);
            rows.at(x, y) = static_cast<float>(s / 11.0);
        }
    }
    for (int x = 0; x < w; ++x) {
        double s = 0;
        for (int k = -r; k <= r; ++k) s += rows.at_clamped(x, k);
        out.at(x, 0) = static_cast<float>(s / 11.0);
        for (int y = 1; y < h; ++y) {
            s += rows.at_clamped(x, y + r) - rows.at_clamped(x, y - r - 1);
            out.at(x, y) = static_cast<float>(s / 11.0);
        }
    }
    return out;
}

}  // namespace

namespace {

ChannelStack luv_from_planes(const Raster& r, const Raster& g, const Raster& b) {
    const int w = r.width(), h = r.height();
    Raster L(w, h), U(w, h), V(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double l, u, v;
            luv_from_rgb(r.at(x, y), g.at(x, y), b.at(x, y), l, u, v);
            L.at(x, y) = static_cast<float>(l);
            U.at(x, y) = static_cast<float>(u);
            V.at(x, y) = static_cast<float>(v);
        }
    }
    ChannelStack out;
    out.push("L", std::move(L));
    out.push("U", std::move(U));
    out.push("V", std::move(V));
    return out;
}

std::array<Raster, 3> planes_from_image(const Image8& image) {
    const int w = image.width, h = image.height;
    std::array<Raster, 3> rgb = {Raster(w, h), Raster(w, h), Raster(w, h)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const uint8_t* p = image.px(x, y);
            for (int c = 0; c < 3; ++c) rgb[c].at(x, y) = p[c] / 255.f;
        }
    }
    return rgb;
}

}  // namespace

ChannelStack rgb_to_luv(const Image8& image) {
    if (image.empty()) throw InvalidInput("rgb_to_luv: zero-sized image");
    const auto rgb = planes_from_image(image);
    return luv_from_planes(rgb[0], rgb[1], rgb[2]);
}

Raster smooth(const Raster& channel) { return smooth_raster(channel); }

GradientField gradient_field(const ChannelStack& luv) {
    if (luv.channel_count() != 3) throw InvalidInput("gradient_field: expected 3 channels");
    const int w = luv.width, h = luv.height;
    GradientField g;
    g.magnitude = Raster(w, h);
    g.orientation_bin.assign(static_cast<size_t>(w) * h, 0);
    constexpr float kBinWidth = static_cast<float>(M_PI) / kOrientationBins;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float best = -1.f, best_gx = 0.f, best_gy = 0.f;
            for (int c = 0; c < 3; ++c) {
                const Raster& ch = luv.channels[c];
                const float gx = ch.at_clamped(x + 1, y) - ch.at_clamped(x - 1, y);
                const float gy = ch.at_clamped(x, y + 1) - ch.at_clamped(x, y - 1);
                const float m = std::sqrt(gx * gx + gy * gy);
                if (m > best) {
                    best = m;
                    best_gx = gx;
                    best_gy = gy;
                }
            }
            g.magnitude.at(x, y) = best;
            float theta = std::atan2(best_gy, best_gx);
            if (theta < 0) theta += static_cast<float>(M_PI);
            if (theta >= static_cast<float>(M_PI)) theta = 0.f;
            int bin = static_cast<int>(theta / kBinWidth);
            if (bin >= kOrientationBins) bin = kOrientationBins - 1;
            g.orientation_bin[static_cast<size_t>(y) * w + x] = static_cast<uint8_t>(bin);
        }
    }
    const Raster mean = box_mean_11(g.magnitude);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            g.magnitude.at(x, y) = g.magnitude.at(x, y) / (mean.at(x, y) + 0.005f);
    return g;
}

ChannelStack orientation_histogram(const GradientField& g) {
    const int w = g.width(), h = g.height();
    ChannelStack out;
    for (int b = 0; b < kOrientationBins; ++b) out.push("O" + std::to_string(b), Raster(w, h));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.channels[g.bin_at(x, y)].at(x, y) = g.magnitude.at(x, y);
    return out;
}

ChannelStack aggregate(const ChannelStack& stack, int block) {
    if (block < 1) throw InvalidInput("aggregate: block must be >= 1");
    const int w = stack.width, h = stack.height;
    const int ow = (w + block - 1) / block;
    const int oh = (h + block - 1) / block;
    ChannelStack out;
    out.shrink = stack.shrink * block;
    const double inv = 1.0 / (block * block);
    for (int c = 0; c < stack.channel_count(); ++c) {
        const Raster& src = stack.channels[c];
        Raster dst(ow, oh);
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double s = 0;
                for (int dy = 0; dy < block; ++dy)
                    for (int dx = 0; dx < block; ++dx)
                        s += src.at_clamped(ox * block + dx, oy * block + dy);
                dst.at(ox, oy) = static_cast<float>(s * inv);
            }
        }
        out.push(stack.names[c], std::move(dst));
    }
    return out;
}

ChannelStack compute_acf(const Image8& image) {
    if (image.empty()) throw InvalidInput("compute_acf: zero-sized image");
    auto rgb = planes_from_image(image);
    for (auto& plane : rgb) plane = smooth_raster(plane);
    ChannelStack luv = luv_from_planes(rgb[0], rgb[1], rgb[2]);
    const GradientField g = gradient_field(luv);
    ChannelStack full = std::move(luv);
    Raster mag = g.magnitude;
    full.push("M", std::move(mag));
    full.append(orientation_histogram(g));
    ChannelStack agg = aggregate(full, kAcfShrink);
    for (auto& ch : agg.channels) ch = smooth_raster(ch);
    return agg;
}

}  // namespace tsd
