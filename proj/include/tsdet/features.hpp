#ifndef TSDET_FEATURES_HPP
#define TSDET_FEATURES_HPP

#include <string>
#include <vector>

#include "tsdet/channels.hpp"
#include "tsdet/image.hpp"
#include "tsdet/pooled.hpp"

namespace tsd {

// Feature combinations a detector bank can scan. Channel counts on the
// shared quarter-resolution grid: acf 10, acf+splbp 126, acf+spcov 136,
// all 252 (order acf, splbp, spcov).
enum class FeatureCombo { Acf, AcfLbp, AcfCov, All };

FeatureCombo parse_combo(const std::string& name);
std::string combo_name(FeatureCombo combo);
int combo_channels(FeatureCombo combo);

// One shared stack per image; the pooled families run on the L channel.
ChannelStack build_channels(const Image8& image, FeatureCombo combo);

// Channel names build_channels emits for the combo, in order. A model
// trained on a sub-combination locates its channels inside a richer shared
// stack by these names.
std::vector<std::string> combo_channel_names(FeatureCombo combo);

}  // namespace tsd

#endif
