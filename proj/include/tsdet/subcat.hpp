#ifndef TSDET_SUBCAT_HPP
#define TSDET_SUBCAT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsdet/dataset.hpp"
#include "tsdet/image.hpp"

namespace tsd {

struct DoubleMatrix {
    int rows = 0, cols = 0;
    std::vector<double> data;

    DoubleMatrix() = default;
    DoubleMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
};

struct GeometricFeatureResult {
    DoubleMatrix features;
    std::vector<std::string> columns;  // subset actually present across all samples
    bool has_orientation = false;
    bool has_truncation = false;
    bool has_occlusion = false;
};

// Geometric clustering space: orientation as a (sin, cos) pair, aspect ratio,
// and truncation / occlusion where every sample carries them. Columns are
// z-scored with the n-1 standard deviation; constant columns are centered only.
GeometricFeatureResult geometric_features(const std::vector<AnnotatedSample>& samples);

// Visual clustering space: each crop resized to the median object size,
// 10-channel aggregate features flattened channel-major.
DoubleMatrix visual_features(const std::vector<Image8>& crops, int median_w, int median_h,
                             DatasetReport* report = nullptr);

// Lower median of widths and heights over the sample boxes.
void median_box_size(const std::vector<AnnotatedSample>& samples, int* w, int* h);

// Normalized spectral clustering on a precomputed symmetric nonnegative
// affinity with zero diagonal: rows of the top-K eigenvectors of
// D^(-1/2) A D^(-1/2), renormalized to unit length, clustered by k-means
// (k-means++ seeding, 50 restarts, best inertia, ties to the lowest restart).
std::vector<int> spectral_cluster_affinity(const DoubleMatrix& affinity, int K, uint64_t seed);

// As above with a Gaussian affinity exp(-d^2 / (2 sigma^2)) built from the
// points; sigma is the median pairwise distance.
std::vector<int> spectral_cluster(const DoubleMatrix& points, int K, uint64_t seed);

enum class SubcatSpace { Geometric, Visual, AspectOnly };

// Model window derivation. Fixed windows (signs) keep their configured
// content and padded dims; aspect-derived windows (cars, cyclists) get
// width = base_height x median cluster aspect ratio rounded to a multiple of
// 4, plus `margin` px of context all round. Padded dims are rounded up to the
// aggregation multiple of 4.
struct WindowPolicy {
    bool fixed = false;
    int fixed_w = 20, fixed_h = 20;
    int fixed_padded_w = 30, fixed_padded_h = 30;
    int base_height = 52;
    int margin = 4;
};

struct SubcatOptions {
    int K = 1;
    SubcatSpace space = SubcatSpace::Geometric;
    WindowPolicy window;
    int min_cluster = 20;
    uint64_t seed = 1;
};

struct SubcategoryWindow {
    int window_w = 0, window_h = 0;
    int padded_w = 0, padded_h = 0;
    int margin_x = 0, margin_y = 0;
    int size = 0;    // samples assigned
    int medoid = 0;  // sample index minimizing summed in-cluster distance
};

struct SubcategoryLayout {
    std::string class_name;
    int K = 0;
    std::vector<int> assignments;
    std::vector<SubcategoryWindow> windows;
    bool merged_small = false;
    std::vector<std::string> notes;
};

// Cluster a class's samples and derive per-subcategory windows. Clusters
// smaller than min_cluster are merged into the nearest surviving centroid and
// flagged. Visual space requires `crops` (one per sample).
SubcategoryLayout subcategorize(const std::vector<AnnotatedSample>& samples,
                                const SubcatOptions& options,
                                const std::vector<Image8>* crops = nullptr);

// Structured text block: per-cluster size, window dims, medoid sample id.
std::string cluster_report(const SubcategoryLayout& layout);

}  // namespace tsd

#endif
