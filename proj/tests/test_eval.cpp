#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "tsdet/errors.hpp"
#include "tsdet/eval.hpp"

using namespace tsd;

namespace {

Detection det(double l, double t, double w, double h, double score) {
    Detection d;
    d.box = {l, t, l + w, t + h};
    d.calibrated_score = score;
    return d;
}

AnnotatedSample gt(double l, double t, double w, double h, int difficulty = 0) {
    AnnotatedSample s;
    s.box = {l, t, l + w, t + h};
    s.difficulty = difficulty;
    return s;
}

// The worked 3-detection example: two ground truths, detections scoring
// 0.9 (TP), 0.8 (FP), 0.7 (TP on the second object).
std::vector<std::pair<double, DetLabel>> hand_case() {
    return {{0.9, DetLabel::TP}, {0.8, DetLabel::FP}, {0.7, DetLabel::TP}};
}

}  // namespace

TEST_CASE("pascal overlap on the worked half-shift case") {
    const BoundingBox a{0, 0, 10, 10};
    const BoundingBox b{5, 0, 15, 10};
    CHECK(pascal_overlap(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(pascal_overlap(a, a) == 1.0);
    CHECK(pascal_overlap(a, BoundingBox{20, 0, 30, 10}) == 0.0);
}

TEST_CASE("matching takes the maximal-overlap unmatched ground truth") {
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 20, 20), gt(14, 0, 20, 20)};
    // overlaps the second GT more than the first
    const std::vector<Detection> dets = {det(12, 0, 20, 20, 0.9), det(0, 0, 20, 20, 0.8)};
    MatchOptions options;
    options.min_overlap = 0.3;
    const MatchResult r = match_detections(dets, gts, options);
    CHECK(r.labels[0] == DetLabel::TP);
    CHECK(r.labels[1] == DetLabel::TP);
    CHECK(r.matched_gt == 2);
    CHECK(r.n_gt == 2);
}

TEST_CASE("second match on a taken ground truth splits by protocol") {
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 20, 20)};
    const std::vector<Detection> dets = {det(0, 0, 20, 20, 0.9), det(1, 1, 20, 20, 0.8)};
    MatchOptions options;
    options.protocol = MatchProtocol::Gtsdb;
    MatchResult r = match_detections(dets, gts, options);
    CHECK(r.labels[0] == DetLabel::TP);
    CHECK(r.labels[1] == DetLabel::Ignored);
    options.protocol = MatchProtocol::Kitti;
    r = match_detections(dets, gts, options);
    CHECK(r.labels[0] == DetLabel::TP);
    CHECK(r.labels[1] == DetLabel::FP);
}

TEST_CASE("hard ground truth absorbs without counting") {
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 20, 20, 0), gt(50, 50, 20, 20, 2)};
    const std::vector<Detection> dets = {det(0, 0, 20, 20, 0.9), det(50, 50, 20, 20, 0.8)};
    MatchOptions options;
    options.max_difficulty = 1;  // difficulty-2 GT becomes ignore territory
    options.protocol = MatchProtocol::Kitti;
    const MatchResult r = match_detections(dets, gts, options);
    CHECK(r.n_gt == 1);
    CHECK(r.labels[0] == DetLabel::TP);
    CHECK(r.labels[1] == DetLabel::Ignored);
}

TEST_CASE("an ignored ground truth absorbs any number of detections") {
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 20, 20, 3)};
    const std::vector<Detection> dets = {det(0, 0, 20, 20, 0.9), det(2, 2, 20, 20, 0.8),
                                         det(1, 0, 20, 20, 0.7)};
    MatchOptions options;
    options.protocol = MatchProtocol::Kitti;
    const MatchResult r = match_detections(dets, gts, options);
    CHECK(r.n_gt == 0);
    for (DetLabel l : r.labels) CHECK(l == DetLabel::Ignored);
}

TEST_CASE("eligible match wins over ignore absorption") {
    // a detection overlapping both an eligible and an ignored GT is a TP
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 20, 20, 0), gt(4, 4, 20, 20, 3)};
    const std::vector<Detection> dets = {det(1, 1, 20, 20, 0.9)};
    const MatchResult r = match_detections(dets, gts, MatchOptions{});
    CHECK(r.labels[0] == DetLabel::TP);
    CHECK(r.n_gt == 1);
}

TEST_CASE("below-threshold overlap is a false positive") {
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 10, 10)};
    const std::vector<Detection> dets = {det(5, 0, 10, 10, 0.9)};  // IoU 1/3
    MatchOptions options;
    options.min_overlap = 0.5;
    const MatchResult r = match_detections(dets, gts, options);
    CHECK(r.labels[0] == DetLabel::FP);
}

TEST_CASE("unsorted detections are rejected") {
    const std::vector<AnnotatedSample> gts = {gt(0, 0, 10, 10)};
    const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.5), det(1, 1, 10, 10, 0.9)};
    CHECK_THROWS_AS(match_detections(dets, gts, MatchOptions{}), InvalidInput);
}

TEST_CASE("uiuc tolerance accepts per-edge deviations") {
    const std::vector<AnnotatedSample> gts = {gt(100, 100, 40, 20)};
    MatchOptions options;
    options.uiuc_tolerance = true;
    options.min_overlap = 0.99;  // ranking only; the criterion is the edges
    // each edge within 25% of the matching GT dimension (10 in x, 5 in y)
    std::vector<Detection> dets = {det(91, 96, 40, 20, 0.9)};
    MatchResult r = match_detections(dets, gts, options);
    CHECK(r.labels[0] == DetLabel::TP);
    dets = {det(89, 100, 40, 20, 0.9)};  // left edge off by 11 > 10
    r = match_detections(dets, gts, options);
    CHECK(r.labels[0] == DetLabel::FP);
}

TEST_CASE("pr curve reproduces the worked points") {
    const PRCurve curve = pr_curve(hand_case(), 2);
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[0].recall == doctest::Approx(0.5));
    CHECK(curve.points[0].precision == doctest::Approx(1.0));
    CHECK(curve.points[1].recall == doctest::Approx(0.5));
    CHECK(curve.points[1].precision == doctest::Approx(0.5));
    CHECK(curve.points[2].recall == doctest::Approx(1.0));
    CHECK(curve.points[2].precision == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("equal scores collapse into one sweep point") {
    const std::vector<std::pair<double, DetLabel>> labeled = {
        {0.9, DetLabel::TP}, {0.9, DetLabel::FP}, {0.5, DetLabel::TP}};
    const PRCurve curve = pr_curve(labeled, 2);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[0].recall == doctest::Approx(0.5));
    CHECK(curve.points[0].precision == doctest::Approx(0.5));
    CHECK(curve.points[1].recall == doctest::Approx(1.0));
    CHECK(curve.points[1].precision == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ignored labels drop out of the sweep") {
    const std::vector<std::pair<double, DetLabel>> labeled = {
        {0.9, DetLabel::TP}, {0.8, DetLabel::Ignored}, {0.7, DetLabel::TP}};
    const PRCurve curve = pr_curve(labeled, 2);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[1].recall == doctest::Approx(1.0));
    CHECK(curve.points[1].precision == doctest::Approx(1.0));
}

TEST_CASE("auc of the worked case is 19/24") {
    CHECK(auc(pr_curve(hand_case(), 2)) == doctest::Approx(19.0 / 24.0).epsilon(1e-12));
}

TEST_CASE("average precision of the worked case is 28/33") {
    CHECK(average_precision(pr_curve(hand_case(), 2)) ==
          doctest::Approx(28.0 / 33.0).epsilon(1e-12));
}

TEST_CASE("a perfect detector scores 1 on both metrics") {
    const std::vector<std::pair<double, DetLabel>> labeled = {
        {0.9, DetLabel::TP}, {0.8, DetLabel::TP}, {0.7, DetLabel::TP}};
    const PRCurve curve = pr_curve(labeled, 3);
    CHECK(auc(curve) == doctest::Approx(1.0));
    CHECK(average_precision(curve) == doctest::Approx(1.0));
}

TEST_CASE("an empty detector scores 0 on both metrics") {
    const PRCurve curve = pr_curve({}, 5);
    CHECK(curve.points.empty());
    CHECK(auc(curve) == 0.0);
    CHECK(average_precision(curve) == 0.0);
}

TEST_CASE("recall levels interpolate with the epsilon guard") {
    // a single TP at recall exactly 0.5 must satisfy levels 0 .. 0.5
    const std::vector<std::pair<double, DetLabel>> labeled = {{0.9, DetLabel::TP}};
    const PRCurve curve = pr_curve(labeled, 2);
    CHECK(average_precision(curve) == doctest::Approx(6.0 / 11.0).epsilon(1e-12));
}
