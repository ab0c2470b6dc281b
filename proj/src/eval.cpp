#include "tsdet/eval.hpp"

#include <algorithm>
#include <cmath>

#include "tsdet/errors.hpp"

namespace tsd {

namespace {

bool uiuc_match(const BoundingBox& det, const BoundingBox& gt) {
    const double tw = 0.25 * gt.width();
    const double th = 0.25 * gt.height();
    return std::abs(det.left - gt.left) <= tw && std::abs(det.right - gt.right) <= tw &&
           std::abs(det.top - gt.top) <= th && std::abs(det.bottom - gt.bottom) <= th;
}

}  // namespace

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<AnnotatedSample>& gts,
                             const MatchOptions& options) {
    for (size_t i = 1; i < dets.size(); ++i)
        if (dets[i].calibrated_score > dets[i - 1].calibrated_score)
            throw InvalidInput("match_detections: detections not sorted by descending score");

    std::vector<bool> eligible(gts.size()), taken(gts.size(), false);
    MatchResult res;
    for (size_t g = 0; g < gts.size(); ++g) {
        eligible[g] = gts[g].difficulty <= options.max_difficulty;
        if (eligible[g]) ++res.n_gt;
    }

    res.labels.reserve(dets.size());
    for (const Detection& det : dets) {
        const auto accepts = [&](size_t g) {
            return options.uiuc_tolerance
                       ? uiuc_match(det.box, gts[g].box)
                       : pascal_overlap(det.box, gts[g].box) >= options.min_overlap;
        };
        // Best unmatched eligible GT first (a true positive), then ignored
        // regions, then already-matched GT under the protocol rule.
        int best = -1;
        double best_ov = -1;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (!eligible[g] || taken[g] || !accepts(g)) continue;
            const double ov = pascal_overlap(det.box, gts[g].box);
            if (ov > best_ov) {
                best_ov = ov;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            taken[best] = true;
            ++res.matched_gt;
            res.labels.push_back(DetLabel::TP);
            continue;
        }
        bool on_ignored = false, on_taken = false;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (!accepts(g)) continue;
            if (!eligible[g]) on_ignored = true;
            else if (taken[g]) on_taken = true;
        }
        if (on_ignored)
            res.labels.push_back(DetLabel::Ignored);
        else if (on_taken && options.protocol == MatchProtocol::Gtsdb)
            res.labels.push_back(DetLabel::Ignored);
        else
            res.labels.push_back(DetLabel::FP);
    }
    return res;
}

PRCurve pr_curve(const std::vector<std::pair<double, DetLabel>>& labeled, int n_gt) {
    if (n_gt < 1) throw InvalidInput("pr_curve: n_gt must be >= 1");
    std::vector<std::pair<double, DetLabel>> kept;
    for (const auto& e : labeled)
        if (e.second != DetLabel::Ignored) kept.push_back(e);
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    PRCurve curve;
    curve.n_gt = n_gt;
    int tp = 0, fp = 0;
    size_t i = 0;
    while (i < kept.size()) {
        const double score = kept[i].first;
        while (i < kept.size() && kept[i].first == score) {
            (kept[i].second == DetLabel::TP ? tp : fp)++;
            ++i;
        }
        PRPoint p;
        p.threshold = score;
        p.recall = static_cast<double>(tp) / n_gt;
        p.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        curve.points.push_back(p);
    }
    return curve;
}

double auc(const PRCurve& curve) {
    if (curve.points.empty()) return 0.0;
    double area = 0;
    double prev_r = 0, prev_p = curve.points.front().precision;
    for (const PRPoint& p : curve.points) {
        area += (p.recall - prev_r) * (p.precision + prev_p) / 2;
        prev_r = p.recall;
        prev_p = p.precision;
    }
    return area;
}

double average_precision(const PRCurve& curve) {
    double sum = 0;
    for (int level = 0; level <= 10; ++level) {
        const double r = level / 10.0;
        double best = 0;
        for (const PRPoint& p : curve.points)
            if (p.recall >= r - 1e-12) best = std::max(best, p.precision);
        sum += best;
    }
    return sum / 11.0;
}

}  // namespace tsd
