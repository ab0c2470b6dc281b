#ifndef TSDET_CHANNELS_HPP
#define TSDET_CHANNELS_HPP

#include "tsdet/image.hpp"
#include "tsdet/raster.hpp"

namespace tsd {

// Aggregated channel features: 10 channels in fixed order
// L,U,V,M,O0..O5, computed once per image by translationally
// invariant transforms.

// CIE-LUV conversion under the D65 white point, each channel rescaled
// to [0,1]: L = L*/100, U = (u*+134)/354, V = (v*+140)/262. Input RGB
// is treated as linear (no gamma expansion). Throws InvalidInput on a
// zero-sized image.
ChannelStack rgb_to_luv(const Image8& image);

// Separable binomial [1,2,1]/4 filter, radius 1, edge replication.
Raster smooth(const Raster& channel);

// Per pixel, M = max over the three LUV channels of sqrt(Ix^2+Iy^2)
// using the centered-difference kernel [-1,0,1] with edge replication;
// the orientation comes from the channel achieving the max (ties go to
// the lowest channel index) and is quantized to 6 bins over [0,pi).
// M is then normalized by an 11x11 box mean: M <- M / (mean + 0.005).
GradientField gradient_field(const ChannelStack& luv);

// Channel theta holds M(x,y) where the orientation bin matches theta,
// zero elsewhere; exactly one bin is nonzero per pixel with M > 0.
ChannelStack orientation_histogram(const GradientField& g);

// Block-mean aggregation. Input is padded by edge replication to a
// multiple of `block`; each output cell is the mean of its block x block
// source cells. Output shrink = input shrink * block.
ChannelStack aggregate(const ChannelStack& stack, int block);

// Full 10-channel pipeline: smooth RGB planes, convert to LUV, gradient
// field, orientation histogram, aggregate 4x4, smooth each aggregated
// channel once. Output dims are ceil(input/4), shrink 4.
ChannelStack compute_acf(const Image8& image);

constexpr int kAcfChannels = 10;
constexpr int kAcfShrink = 4;
constexpr int kOrientationBins = 6;

}  // namespace tsd

#endif
