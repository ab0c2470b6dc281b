#ifndef TSDET_DATASET_HPP
#define TSDET_DATASET_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsdet/geometry.hpp"
#include "tsdet/image.hpp"

namespace tsd {

// Difficulty tags follow the usual cumulative convention: 0 easy, 1 moderate,
// 2 hard; 3 means the sample fails even the hard gate and is ignored by every
// difficulty filter.
constexpr int kDifficultyIgnored = 3;

struct AnnotatedSample {
    std::string image_path;
    BoundingBox box;
    std::string class_name;
    double orientation = 0;  // radians
    double truncation = 0;
    int occlusion_index = 0;  // 0 none, 1 partial, 2 large, 3 unknown
    bool has_orientation = false;
    bool has_truncation = false;
    bool has_occlusion = false;
    int difficulty = 0;

    double aspect_ratio() const { return box.width() / box.height(); }
};

struct DatasetReport {
    int skipped_unknown_type = 0;
    int skipped_unreadable = 0;
    std::vector<std::string> notes;
};

// Height / occlusion / truncation gates per difficulty level, most permissive
// last. Defaults are the published KITTI rule.
struct DifficultyRule {
    double min_height[3] = {40, 25, 25};
    int max_occlusion[3] = {0, 1, 2};
    double max_truncation[3] = {0.15, 0.30, 0.50};

    int classify(double height, int occlusion, double truncation) const;
};

// KITTI label files: one `<stem>.txt` per `<stem>.png`, space-separated
// fields (type, truncated, occluded, alpha, left, top, right, bottom, 3-D
// tail). Types outside `keep_types` are skipped and counted; an empty
// keep_types keeps everything. Malformed lines raise DataError with the file
// and line number.
std::vector<AnnotatedSample> load_kitti_labels(const std::string& label_dir,
                                               const std::string& image_dir,
                                               const std::vector<std::string>& keep_types,
                                               const DifficultyRule& rule = {},
                                               DatasetReport* report = nullptr);

// Sidecar class map: lines of `<numeric id> <class name>`, '#' comments.
std::map<int, std::string> load_class_map(const std::string& path);

// Semicolon-separated annotation rows `image;left;top;right;bottom;class_id`.
// Numeric ids are mapped to names through `class_map`; ids absent from the map
// raise DataError, as do malformed rows and empty boxes.
std::vector<AnnotatedSample> load_csv_annotations(const std::string& path,
                                                  const std::map<int, std::string>& class_map,
                                                  bool header_row = false);

void write_csv_annotations(const std::string& path,
                           const std::vector<AnnotatedSample>& samples,
                           const std::map<int, std::string>& class_map);

struct JitterParams {
    int copies = 1;  // total crops per sample; copy 0 is the unperturbed crop
    double max_translate = 0;  // px at model scale
    double min_scale = 1, max_scale = 1;
    double max_rotate_deg = 0;
    bool allow_flip = false;
};

// Crop the padded model window around `box` (height anchored to win_h content
// pixels) and emit `copies` seeded perturbations of it, each pad_w x pad_h.
std::vector<Image8> jitter(const Image8& image, const BoundingBox& box, int win_h, int pad_w,
                           int pad_h, const JitterParams& params, uint64_t seed);

// Uniform random windows overlapping every annotation by at most 0.1,
// resized to out_w x out_h. Fewer than `count` crops sets *saturated;
// rects_out receives the source window of each crop.
std::vector<Image8> sample_negatives(const Image8& image, const std::vector<BoundingBox>& boxes,
                                     int count, int out_w, int out_h, uint64_t seed,
                                     bool* saturated = nullptr,
                                     std::vector<BoundingBox>* rects_out = nullptr);

}  // namespace tsd

#endif
