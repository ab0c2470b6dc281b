#ifndef TSDET_RASTER_HPP
#define TSDET_RASTER_HPP

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsd {

// Single-channel real-valued image, row-major.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, float fill = 0.f)
        : w_(width), h_(height), data_(static_cast<size_t>(width) * height, fill) {
        if (width < 0 || height < 0)
            throw std::invalid_argument("Raster: negative dimensions");
    }

    int width() const { return w_; }
    int height() const { return h_; }
    bool empty() const { return w_ == 0 || h_ == 0; }
    size_t size() const { return data_.size(); }

    float at(int x, int y) const {
        assert(x >= 0 && x < w_ && y >= 0 && y < h_);
        return data_[static_cast<size_t>(y) * w_ + x];
    }
    float& at(int x, int y) {
        assert(x >= 0 && x < w_ && y >= 0 && y < h_);
        return data_[static_cast<size_t>(y) * w_ + x];
    }
    // Reads with edge replication outside the raster.
    float at_clamped(int x, int y) const {
        if (x < 0) x = 0;
        if (x >= w_) x = w_ - 1;
        if (y < 0) y = 0;
        if (y >= h_) y = h_ - 1;
        return data_[static_cast<size_t>(y) * w_ + x];
    }

    const float* row(int y) const { return data_.data() + static_cast<size_t>(y) * w_; }
    float* row(int y) { return data_.data() + static_cast<size_t>(y) * w_; }
    const float* data() const { return data_.data(); }
    float* data() { return data_.data(); }

private:
    int w_ = 0, h_ = 0;
    std::vector<float> data_;
};

// Ordered list of named single-channel rasters sharing one grid.
// `shrink` is the aggregation factor relative to the source image
// (1 = unaggregated, 4 after 4x4 block aggregation).
struct ChannelStack {
    int width = 0;
    int height = 0;
    int shrink = 1;
    std::vector<std::string> names;
    std::vector<Raster> channels;

    int channel_count() const { return static_cast<int>(channels.size()); }

    void push(std::string name, Raster r) {
        if (!channels.empty() && (r.width() != width || r.height() != height))
            throw std::invalid_argument("ChannelStack: channel dims mismatch");
        if (channels.empty()) {
            width = r.width();
            height = r.height();
        }
        names.push_back(std::move(name));
        channels.push_back(std::move(r));
    }

    void append(const ChannelStack& other) {
        if (other.channels.empty()) return;
        if (channels.empty()) {
            *this = other;
            return;
        }
        if (other.width != width || other.height != height || other.shrink != shrink)
            throw std::invalid_argument("ChannelStack: append grid mismatch");
        for (size_t i = 0; i < other.channels.size(); ++i) {
            names.push_back(other.names[i]);
            channels.push_back(other.channels[i]);
        }
    }
};

// Per-pixel gradient magnitude plus quantized orientation.
// `orientation_bin` holds values in [0,6); it is meaningful wherever
// magnitude > 0 (bin 0 is stored for flat pixels).
struct GradientField {
    Raster magnitude;
    std::vector<uint8_t> orientation_bin;  // row-major, magnitude dims

    int width() const { return magnitude.width(); }
    int height() const { return magnitude.height(); }
    uint8_t bin_at(int x, int y) const {
        return orientation_bin[static_cast<size_t>(y) * magnitude.width() + x];
    }
};

}  // namespace tsd

#endif
