#ifndef TSDET_POOLED_HPP
#define TSDET_POOLED_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "tsdet/raster.hpp"

namespace tsd {

// Spatially pooled covariance and LBP feature maps, computed densely on
// the luminance raster and emitted on the same shrink-4 grid as the
// aggregated channels.

// Nine per-pixel variates in fixed order:
//   x, y, |Ix|, |Iy|, |Ixx|, |Iyy|, M, O1, O2
// x,y are raster coordinates; first derivatives use [-1,0,1], second
// derivatives [1,-2,1], both with edge replication. O1 = arctan(|Ix|/|Iy|)
// in [0,pi/2] with 0/0 -> 0. O2 folds atan2(Iy,Ix) into (0,pi] by adding
// pi to non-positive angles; the (0,0) case maps to 0.
struct VariateStack {
    ChannelStack channels;

    int width() const { return channels.width; }
    int height() const { return channels.height; }
};

constexpr int kVariates = 9;
constexpr int kCovValues = 42;
constexpr int kLbpBins = 58;
constexpr std::array<int, 3> kCovPatchSizes = {4, 8, 16};
constexpr int kCovPoolSize = 4;
constexpr int kLbpPatchSize = 4;
constexpr int kLbpPoolSize = 8;
constexpr int kPoolStride = 4;
constexpr int kSpCovChannels = kCovValues * static_cast<int>(kCovPatchSizes.size());
constexpr int kSpLbpChannels = 2 * kLbpBins;

struct RegionRect {
    int left = 0, top = 0, width = 0, height = 0;
};

// Upper triangle of the 9x9 sample covariance matrix (n-1 denominator)
// minus var(x), var(y), cov(x,y): 42 values, ordered by row-major upper
// triangle scan of the variate indices.
using CovDescriptor = std::array<double, kCovValues>;

VariateStack variate_image(const Raster& luminance);

// Covariance over the region's pixels; x,y are taken region-local (the
// descriptor is shift-invariant either way). Throws InvalidInput when the
// region leaves the raster or has fewer than 2x2 pixels.
CovDescriptor covariance_descriptor(const VariateStack& variates, const RegionRect& region);

// Index pairs (i,j), i <= j, for the 42 retained covariance entries.
const std::array<std::pair<int, int>, kCovValues>& cov_entry_pairs();

struct SpCovResult {
    // 126 channels at shrink 4: per patch scale (4, 8, 16), the 42
    // descriptor entries max-pooled over 4x4 regions at stride 4.
    ChannelStack stack;
    std::array<bool, 3> scale_empty = {false, false, false};
};

SpCovResult sp_cov(const Raster& luminance);

// 8-bit LBP codes from thresholding each interior pixel's 3x3 neighbours
// (neighbour >= centre sets the bit), clockwise from top-left with the
// top-left neighbour as the most significant bit. Border pixels hold -1.
std::vector<int16_t> lbp_code_map(const Raster& luminance);

// True iff the circular 8-bit pattern has at most 2 transitions.
bool lbp_is_uniform(uint8_t code);
// Bin in [0,58) for uniform codes (ascending code order), -1 otherwise.
int lbp_uniform_bin(uint8_t code);

// Dense 58-channel histogram map: channel b at (x,y) counts codes in bin
// b over the 4x4 patch anchored at (x,y); anchors that do not fit hold 0.
ChannelStack lbp_histogram_map(const Raster& luminance);

// 116 channels at shrink 4: the histogram map max-pooled over 8x8 regions
// at stride 4 (58 channels) followed by the same map mean-aggregated in
// 4x4 blocks (58 channels).
ChannelStack sp_lbp(const Raster& luminance);

}  // namespace tsd

#endif
