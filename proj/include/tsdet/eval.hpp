#ifndef TSDET_EVAL_HPP
#define TSDET_EVAL_HPP

#include <string>
#include <utility>
#include <vector>

#include "tsdet/dataset.hpp"
#include "tsdet/detect.hpp"

namespace tsd {

// What happens to detections beyond the first match on a ground truth:
// Gtsdb ignores them, Kitti counts them as false positives.
enum class MatchProtocol { Gtsdb, Kitti };

enum class DetLabel { TP, FP, Ignored };

struct MatchOptions {
    double min_overlap = 0.5;
    MatchProtocol protocol = MatchProtocol::Gtsdb;
    // Ground truth with difficulty above this level is ignored: it never
    // enters the GT count and detections landing on it are not penalized.
    int max_difficulty = 2;
    // Alternate matcher (UIUC style): a detection matches when every box
    // edge lies within 25% of the ground-truth dimension.
    bool uiuc_tolerance = false;
};

struct MatchResult {
    std::vector<DetLabel> labels;  // one per detection, input order
    int n_gt = 0;                  // eligible ground truths
    int matched_gt = 0;
};

// Greedy matching over one image's detections of one class, which must come
// sorted by descending calibrated score. Each detection takes the unmatched
// eligible GT of maximal overlap meeting the match criterion; each GT matches
// at most once; ignored GT absorbs detections without being consumed.
MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<AnnotatedSample>& gts,
                             const MatchOptions& options);

struct PRPoint {
    double recall = 0, precision = 0, threshold = 0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // one per distinct score, descending score
    int n_gt = 0;
};

// Threshold sweep over every distinct score. Ignored entries drop out.
PRCurve pr_curve(const std::vector<std::pair<double, DetLabel>>& labeled, int n_gt);

// Trapezoidal area over recall in [0, max recall], entered at (0, p_first).
double auc(const PRCurve& curve);

// Mean over 11 recall levels {0, 0.1, ..., 1} of the interpolated precision
// max{p_i : r_i >= r}, zero where no point reaches the level.
double average_precision(const PRCurve& curve);

}  // namespace tsd

#endif
