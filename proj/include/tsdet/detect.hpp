#ifndef TSDET_DETECT_HPP
#define TSDET_DETECT_HPP

#include <functional>
#include <string>
#include <vector>

#include "tsdet/boosting.hpp"
#include "tsdet/geometry.hpp"
#include "tsdet/image.hpp"
#include "tsdet/raster.hpp"

namespace tsd {

struct Detection {
    BoundingBox box;
    int class_id = 0;
    std::string class_name;
    int subcategory = 0;
    double raw_score = 0;
    double calibrated_score = 0;
};

struct ClassDetectors {
    std::string name;
    std::vector<BoostedModel> models;  // one per subcategory, calibrated
    double nms_threshold = 0.5;
};

struct DetectorBank {
    std::vector<ClassDetectors> classes;
};

struct PyramidLevel {
    double scale = 1.0;  // image px * scale = level px
    ChannelStack stack;
};

using ChannelBuilder = std::function<ChannelStack(const Image8&)>;

// Times the channel pipeline ran since process start; build_pyramid bumps it
// once per call no matter how many levels it computes.
int64_t pyramid_build_count();

// Geometric ladder, factor 2^(-1/8) per level, from full resolution down to
// the smallest scale still fitting a min_w x min_h model window. Images
// smaller than the window give an empty pyramid and set *too_small.
std::vector<PyramidLevel> build_pyramid(const Image8& image, const ChannelBuilder& builder,
                                        int min_w, int min_h, int threads = 1,
                                        bool* too_small = nullptr);

struct RawDetection {
    int level = 0, cell_y = 0, cell_x = 0, model = 0;
    Detection det;
};

// Slide the model's padded window over every level at one-cell stride,
// through the soft cascade; accepted windows come back with content boxes
// mapped to image coordinates and clipped. Ordered by (level, row, column).
std::vector<RawDetection> scan(const BoostedModel& model, const std::vector<PyramidLevel>& pyramid,
                               int image_w, int image_h, int threads = 1);

// Greedy: descending calibrated score, ties to the earlier list index; keep a
// detection iff overlap with every kept one is <= threshold.
std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold);

// Step 1: NMS inside each class across its subcategory detectors and scales.
// Step 2: concatenate classes in order, no cross-class suppression.
std::vector<Detection> fuse(const std::vector<std::vector<Detection>>& per_class,
                            const std::vector<double>& thresholds);

struct DetectStats {
    int pyramids_built = 0;
    int levels = 0;
    int64_t windows_evaluated = 0;
};

// One shared pyramid, every model of every class scans it, raw scores
// calibrated, then fuse. Raw detections merge in (level, row, column, model)
// order before NMS so output is reproducible at any thread count.
std::vector<Detection> detect_all(const Image8& image, const DetectorBank& bank,
                                  const ChannelBuilder& builder, int threads = 1,
                                  DetectStats* stats = nullptr);

}  // namespace tsd

#endif
