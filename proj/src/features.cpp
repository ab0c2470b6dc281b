#include "tsdet/features.hpp"

#include "tsdet/errors.hpp"

namespace tsd {

FeatureCombo parse_combo(const std::string& name) {
    if (name == "acf") return FeatureCombo::Acf;
    if (name == "acf+splbp") return FeatureCombo::AcfLbp;
    if (name == "acf+spcov") return FeatureCombo::AcfCov;
    if (name == "all") return FeatureCombo::All;
    throw ConfigError("unknown feature combination: " + name);
}

std::string combo_name(FeatureCombo combo) {
    switch (combo) {
        case FeatureCombo::Acf: return "acf";
        case FeatureCombo::AcfLbp: return "acf+splbp";
        case FeatureCombo::AcfCov: return "acf+spcov";
        case FeatureCombo::All: return "all";
    }
    return "acf";
}

int combo_channels(FeatureCombo combo) {
    switch (combo) {
        case FeatureCombo::Acf: return kAcfChannels;
        case FeatureCombo::AcfLbp: return kAcfChannels + 2 * kLbpBins;
        case FeatureCombo::AcfCov: return kAcfChannels + kSpCovChannels;
        case FeatureCombo::All: return kAcfChannels + 2 * kLbpBins + kSpCovChannels;
    }
    return kAcfChannels;
}

std::vector<std::string> combo_channel_names(FeatureCombo combo) {
    std::vector<std::string> names = {"L", "U", "V", "M"};
    for (int b = 0; b < kOrientationBins; ++b) names.push_back("O" + std::to_string(b));
    if (combo == FeatureCombo::AcfLbp || combo == FeatureCombo::All) {
        for (int b = 0; b < kLbpBins; ++b) names.push_back("sp_lbp_" + std::to_string(b));
        for (int b = 0; b < kLbpBins; ++b) names.push_back("lbp_" + std::to_string(b));
    }
    if (combo == FeatureCombo::AcfCov || combo == FeatureCombo::All)
        for (int p : kCovPatchSizes)
            for (int k = 0; k < kCovValues; ++k)
                names.push_back("cov" + std::to_string(p) + "_" + std::to_string(k));
    return names;
}

ChannelStack build_channels(const Image8& image, FeatureCombo combo) {
    ChannelStack stack = compute_acf(image);
    if (combo == FeatureCombo::Acf) return stack;
    const ChannelStack luv = rgb_to_luv(image);
    const Raster& lum = luv.channels[0];
    if (combo == FeatureCombo::AcfLbp || combo == FeatureCombo::All) stack.append(sp_lbp(lum));
    if (combo == FeatureCombo::AcfCov || combo == FeatureCombo::All)
        stack.append(sp_cov(lum).stack);
    return stack;
}

}  // namespace tsd
