#include "tsdet/pooled.hpp"

#include <algorithm>
#include <cmath>

#include "tsdet/channels.hpp"
#include "tsdet/errors.hpp"

namespace tsd {

namespace {

const char* kVariateNames[kVariates] = {"x", "y", "|Ix|", "|Iy|", "|Ixx|", "|Iyy|", "M", "O1", "O2"};

// Neighbour offsets clockwise from top-left; index 0 is the MSB.
const int kLbpDx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
const int kLbpDy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};

struct IntegralImage {
    int w = 0, h = 0;
    std::vector<double> sums;  // (w+1) x (h+1)

    void build(const Raster& a, const Raster& b, bool product) {
        w = a.width();
        h = a.height();
        sums.assign(static_cast<size_t>(w + 1) * (h + 1), 0.0);
        for (int y = 0; y < h; ++y) {
            double row = 0;
            const float* pa = a.row(y);
            const float* pb = b.row(y);
            double* out = sums.data() + static_cast<size_t>(y + 1) * (w + 1);
            const double* prev = sums.data() + static_cast<size_t>(y) * (w + 1);
            for (int x = 0; x < w; ++x) {
                row += product ? static_cast<double>(pa[x]) * pb[x] : static_cast<double>(pa[x]);
                out[x + 1] = prev[x + 1] + row;
            }
        }
    }

    double region(int left, int top, int width, int height) const {
        const size_t stride = w + 1;
        const double* s = sums.data();
        return s[(top + height) * stride + left + width] - s[top * stride + left + width] -
               s[(top + height) * stride + left] + s[top * stride + left];
    }
};

ChannelStack max_pool(const ChannelStack& dense, int valid_w, int valid_h, int pool, int stride) {
    const int ow = (dense.width + stride - 1) / stride;
    const int oh = (dense.height + stride - 1) / stride;
    ChannelStack out;
    out.shrink = dense.shrink * stride;
    for (int c = 0; c < dense.channel_count(); ++c) {
        const Raster& src = dense.channels[c];
        Raster dst(ow, oh, 0.f);
        for (int oy = 0; oy < oh; ++oy) {
            const int y0 = oy * stride;
            const int y1 = std::min(y0 + pool, valid_h);
            for (int ox = 0; ox < ow; ++ox) {
                const int x0 = ox * stride;
                const int x1 = std::min(x0 + pool, valid_w);
                float m = 0.f;
                bool any = false;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) {
                        const float v = src.at(x, y);
                        m = any ? std::max(m, v) : v;
                        any = true;
                    }
                dst.at(ox, oy) = any ? m : 0.f;
            }
        }
        out.push(dense.names[c], std::move(dst));
    }
    return out;
}

}  // namespace

const std::array<std::pair<int, int>, kCovValues>& cov_entry_pairs() {
    static const auto pairs = [] {
        std::array<std::pair<int, int>, kCovValues> p{};
        int k = 0;
        for (int i = 0; i < kVariates; ++i)
            for (int j = i; j < kVariates; ++j) {
                const bool excluded = (i == 0 && j == 0) || (i == 0 && j == 1) || (i == 1 && j == 1);
                if (!excluded) p[k++] = {i, j};
            }
        return p;
    }();
    return pairs;
}

VariateStack variate_image(const Raster& lum) {
    if (lum.width() < 3 || lum.height() < 3) throw InvalidInput("variate_image: raster below 3x3");
    const int w = lum.width(), h = lum.height();
    VariateStack vs;
    for (int i = 0; i < kVariates; ++i) vs.channels.push(kVariateNames[i], Raster(w, h));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float ix = lum.at_clamped(x + 1, y) - lum.at_clamped(x - 1, y);
            const float iy = lum.at_clamped(x, y + 1) - lum.at_clamped(x, y - 1);
            const float ixx = lum.at_clamped(x + 1, y) - 2.f * lum.at(x, y) + lum.at_clamped(x - 1, y);
            const float iyy = lum.at_clamped(x, y + 1) - 2.f * lum.at(x, y) + lum.at_clamped(x, y - 1);
            vs.channels.channels[0].at(x, y) = static_cast<float>(x);
            vs.channels.channels[1].at(x, y) = static_cast<float>(y);
            vs.channels.channels[2].at(x, y) = std::fabs(ix);
            vs.channels.channels[3].at(x, y) = std::fabs(iy);
            vs.channels.channels[4].at(x, y) = std::fabs(ixx);
            vs.channels.channels[5].at(x, y) = std::fabs(iyy);
            vs.channels.channels[6].at(x, y) = std::sqrt(ix * ix + iy * iy);
            vs.channels.channels[7].at(x, y) = std::atan2(std::fabs(ix), std::fabs(iy));
            float o2 = 0.f;
            if (ix != 0.f || iy != 0.f) {
                const float z = std::atan2(iy, ix);
                o2 = z > 0.f ? z : z + static_cast<float>(M_PI);
            }
            vs.channels.channels[8].at(x, y) = o2;
        }
    }
    return vs;
}

CovDescriptor covariance_descriptor(const VariateStack& vs, const RegionRect& region) {
    const int W = vs.width(), H = vs.height();
    if (region.left < 0 || region.top < 0 || region.width < 2 || region.height < 2 ||
        region.left + region.width > W || region.top + region.height > H)
        throw InvalidInput("covariance_descriptor: region outside raster or below 2x2");
    const int n = region.width * region.height;
    double s[kVariates] = {0};
    double sp[kVariates][kVariates] = {{0}};
    std::array<double, kVariates> v{};
    for (int y = 0; y < region.height; ++y) {
        for (int x = 0; x < region.width; ++x) {
            v[0] = x;  // region-local coordinates
            v[1] = y;
            for (int c = 2; c < kVariates; ++c)
                v[c] = vs.channels.channels[c].at(region.left + x, region.top + y);
            for (int i = 0; i < kVariates; ++i) {
                s[i] += v[i];
                for (int j = i; j < kVariates; ++j) sp[i][j] += v[i] * v[j];
            }
        }
    }
    CovDescriptor out{};
    const auto& pairs = cov_entry_pairs();
    for (int k = 0; k < kCovValues; ++k) {
        const auto [i, j] = pairs[k];
        out[k] = (sp[i][j] - s[i] * s[j] / n) / (n - 1);
    }
    return out;
}

SpCovResult sp_cov(const Raster& lum) {
    if (lum.width() < 3 || lum.height() < 3) throw InvalidInput("sp_cov: raster below 3x3");
    const VariateStack vs = variate_image(lum);
    const int W = lum.width(), H = lum.height();

    std::array<IntegralImage, kVariates> sums;
    for (int i = 0; i < kVariates; ++i)
        sums[i].build(vs.channels.channels[i], vs.channels.channels[i], false);

    SpCovResult result;
    const auto& pairs = cov_entry_pairs();
    IntegralImage prod;
    for (int si = 0; si < static_cast<int>(kCovPatchSizes.size()); ++si)
        result.scale_empty[si] = W < kCovPatchSizes[si] || H < kCovPatchSizes[si];

    for (int k = 0; k < kCovValues; ++k) {
        const auto [i, j] = pairs[k];
        prod.build(vs.channels.channels[i], vs.channels.channels[j], true);
        for (int si = 0; si < static_cast<int>(kCovPatchSizes.size()); ++si) {
            const int p = kCovPatchSizes[si];
            const std::string name = "cov" + std::to_string(p) + "_" + std::to_string(k);
            ChannelStack dense;
            Raster map(W, H, 0.f);
            if (!result.scale_empty[si]) {
                const int n = p * p;
                for (int y = 0; y + p <= H; ++y) {
                    for (int x = 0; x + p <= W; ++x) {
                        const double sij = prod.region(x, y, p, p);
                        const double si_ = sums[i].region(x, y, p, p);
                        const double sj_ = sums[j].region(x, y, p, p);
                        map.at(x, y) = static_cast<float>((sij - si_ * sj_ / n) / (n - 1));
                    }
                }
            }
            dense.push(name, std::move(map));
            ChannelStack pooled = max_pool(dense, std::max(W - p + 1, 0), std::max(H - p + 1, 0),
                                           kCovPoolSize, kPoolStride);
            if (result.stack.channels.empty() && k == 0 && si == 0)
                result.stack.shrink = pooled.shrink;
            result.stack.push(pooled.names[0], std::move(pooled.channels[0]));
        }
    }
    // Reorder so all 42 entries of one scale are contiguous: scale-major.
    ChannelStack ordered;
    ordered.shrink = result.stack.shrink;
    for (int si = 0; si < static_cast<int>(kCovPatchSizes.size()); ++si)
        for (int k = 0; k < kCovValues; ++k) {
            const int idx = k * static_cast<int>(kCovPatchSizes.size()) + si;
            ordered.push(result.stack.names[idx], std::move(result.stack.channels[idx]));
        }
    result.stack = std::move(ordered);
    return result;
}

bool lbp_is_uniform(uint8_t code) {
    int transitions = 0;
    for (int b = 0; b < 8; ++b) {
        const int cur = (code >> b) & 1;
        const int next = (code >> ((b + 1) % 8)) & 1;
        if (cur != next) ++transitions;
    }
    return transitions <= 2;
}

int lbp_uniform_bin(uint8_t code) {
    static const auto table = [] {
        std::array<int, 256> t{};
        t.fill(-1);
        int bin = 0;
        for (int c = 0; c < 256; ++c)
            if (lbp_is_uniform(static_cast<uint8_t>(c))) t[c] = bin++;
        return t;
    }();
    return table[code];
}

std::vector<int16_t> lbp_code_map(const Raster& lum) {
    if (lum.width() < 3 || lum.height() < 3) throw InvalidInput("lbp_code_map: raster below 3x3");
    const int w = lum.width(), h = lum.height();
    std::vector<int16_t> codes(static_cast<size_t>(w) * h, -1);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const float c = lum.at(x, y);
            int code = 0;
            for (int b = 0; b < 8; ++b) {
                code <<= 1;
                if (lum.at(x + kLbpDx[b], y + kLbpDy[b]) >= c) code |= 1;
            }
            codes[static_cast<size_t>(y) * w + x] = static_cast<int16_t>(code);
        }
    }
    return codes;
}

ChannelStack lbp_histogram_map(const Raster& lum) {
    const std::vector<int16_t> codes = lbp_code_map(lum);
    const int w = lum.width(), h = lum.height();
    ChannelStack out;
    for (int b = 0; b < kLbpBins; ++b) out.push("lbp_" + std::to_string(b), Raster(w, h, 0.f));
    const int p = kLbpPatchSize;
    std::array<float, kLbpBins> hist{};
    for (int y = 0; y + p <= h; ++y) {
        for (int x = 0; x + p <= w; ++x) {
            hist.fill(0.f);
            for (int dy = 0; dy < p; ++dy)
                for (int dx = 0; dx < p; ++dx) {
                    const int16_t code = codes[static_cast<size_t>(y + dy) * w + (x + dx)];
                    if (code < 0) continue;
                    const int bin = lbp_uniform_bin(static_cast<uint8_t>(code));
                    if (bin >= 0) hist[bin] += 1.f;
                }
            for (int b = 0; b < kLbpBins; ++b)
                if (hist[b] != 0.f) out.channels[b].at(x, y) = hist[b];
        }
    }
    return out;
}

ChannelStack sp_lbp(const Raster& lum) {
    const ChannelStack dense = lbp_histogram_map(lum);
    const int w = dense.width, h = dense.height;
    const int valid_w = std::max(w - kLbpPatchSize + 1, 0);
    const int valid_h = std::max(h - kLbpPatchSize + 1, 0);
    ChannelStack pooled = max_pool(dense, valid_w, valid_h, kLbpPoolSize, kPoolStride);
    for (auto& n : pooled.names) n = "sp_" + n;
    ChannelStack aggregated = aggregate(dense, kPoolStride);
    pooled.append(aggregated);
    return pooled;
}

}  // namespace tsd
