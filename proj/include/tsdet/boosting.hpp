#ifndef TSDET_BOOSTING_HPP
#define TSDET_BOOSTING_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsdet/calibrate.hpp"

namespace tsd {

// Row-major sample-by-feature matrix.
struct FeatureMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    FeatureMatrix() = default;
    FeatureMatrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.f) {}

    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }

    void append_rows(const FeatureMatrix& other);
};

// Maps a flat feature index onto (channel, cell_y, cell_x) of a model
// window: index = channel * cell_w * cell_h + cell_y * cell_w + cell_x.
struct FeatureLayout {
    int cell_w = 0;
    int cell_h = 0;
    int channels = 0;
    std::string family;  // feature combination name, e.g. "acf"

    int count() const { return cell_w * cell_h * channels; }
};

struct TreeNode {
    int32_t feature = 0;
    float threshold = 0.f;  // value < threshold goes left
};

// Complete binary decision tree in heap order: nodes[i] has children
// 2i+1 and 2i+2; leaves (2^depth of them) vote -1 or +1.
struct DecisionTree {
    int depth = 1;
    std::vector<TreeNode> nodes;
    std::vector<int8_t> leaves;

    int predict(const float* features) const {
        return predict_fn([features](int f) { return features[f]; });
    }

    template <class Lookup>
    int predict_fn(Lookup&& lookup) const {
        int i = 0;
        for (int d = 0; d < depth; ++d) {
            const TreeNode& n = nodes[i];
            i = 2 * i + 1 + (lookup(n.feature) < n.threshold ? 0 : 1);
        }
        return leaves[i - (static_cast<int>(nodes.size()))];
    }
};

struct BoostedModel {
    std::string class_name;
    int subcategory = 0;
    FeatureLayout layout;
    int window_w = 0, window_h = 0;  // object box, px
    int padded_w = 0, padded_h = 0;  // scan window, px, multiples of the shrink
    int margin_x = 0, margin_y = 0;
    double nu = 1.0;
    int depth = 2;
    std::vector<DecisionTree> trees;
    std::vector<double> coeffs;   // shrunk coefficients a_t
    std::vector<double> rejects;  // soft-cascade thresholds r_t

    CalibrationParams calibration;

    size_t rounds() const { return trees.size(); }
};

struct RoundStats {
    double error = 0;  // e_t on the round's distribution
    double z = 0;      // normalizer Z_t
};

struct TrainingReport {
    std::vector<RoundStats> rounds;
    bool stopped_zero_error = false;
    bool stopped_half_error = false;
    bool degenerate_labels = false;
    std::vector<int> harvest_counts;
    bool harvest_empty_round = false;
    int seed_negative_rows = 0;
};

// Mutable per-round boosting state; weights stay a distribution.
struct TrainingState {
    std::vector<double> weights;
    int round = 0;
    double last_error = 0;
    double last_z = 1;
};

// Greedy top-down tree minimizing weighted misclassification, split
// search over 256-bin quantized thresholds per feature (bounds fit on the
// given data). All-equal labels produce a constant-vote tree and set
// *degenerate when provided.
DecisionTree train_tree(const FeatureMatrix& features, const std::vector<int8_t>& labels,
                        const std::vector<double>& weights, int depth, int threads = 1,
                        bool* degenerate = nullptr);

// Algorithm: per round, fit a tree on the weighted distribution, compute
// e_t, set w_t = 0.5*log((1-e_t)/e_t), a_t = nu*w_t, reweight by
// exp(-a_t y h)/Z_t. Stops early on e_t = 0 (the perfect tree is kept
// with e_t clamped to 1/(2N)) or e_t >= 0.5 (round truncated); both are
// flagged in the report.
BoostedModel adaboost_train(const FeatureMatrix& features, const std::vector<int8_t>& labels,
                            int rounds, double nu, int depth, int threads = 1,
                            TrainingReport* report = nullptr, TrainingState* state = nullptr);

double boosted_score(const BoostedModel& model, const float* features);

struct CascadeResult {
    bool accepted = false;
    double score = 0;
    int rejected_at = -1;  // round index of the first failed threshold
};

// Accumulates partial sums H_t, rejecting at the first t with H_t < r_t.
// An empty rejects vector (or all -inf) never rejects.
template <class Lookup>
CascadeResult cascade_evaluate_fn(const BoostedModel& model, Lookup&& lookup) {
    CascadeResult res;
    double h = 0;
    const bool gated = !model.rejects.empty();
    for (size_t t = 0; t < model.trees.size(); ++t) {
        h += model.coeffs[t] * model.trees[t].predict_fn(lookup);
        if (gated && h < model.rejects[t]) {
            res.score = h;
            res.rejected_at = static_cast<int>(t);
            return res;
        }
    }
    res.accepted = true;
    res.score = h;
    return res;
}

CascadeResult cascade_evaluate(const BoostedModel& model, const float* features);

// Per-round partial sums H_t for each positive sample.
std::vector<std::vector<double>> positive_traces(const BoostedModel& model,
                                                 const FeatureMatrix& positives);

// r_t = (min over traces of H_t) - 1e-6, so no calibration positive is
// rejected. Throws InvalidInput on empty traces.
std::vector<double> compute_reject_thresholds(const std::vector<std::vector<double>>& traces);

// Feature rows a bootstrap round can draw from.
class TrainingSource {
public:
    virtual ~TrainingSource() = default;
    virtual const FeatureMatrix& positives() = 0;
    virtual FeatureMatrix seed_negatives(int count, uint64_t seed) = 0;
    // Scans with the current cascade and returns top-scoring false
    // positives, best first, at most `cap` rows.
    virtual FeatureMatrix harvest_negatives(const BoostedModel& model, int cap, uint64_t seed) = 0;
};

struct BootstrapOptions {
    std::vector<int> schedule = {64, 256, 1024, 2048};
    double nu = 0.1;
    int depth = 2;
    int neg_seed_count = 5000;
    int hard_neg_cap = 10000;
    int threads = 1;
    uint64_t seed = 1;
};

// Round 1 trains on positives plus seeded random negatives; each later
// round harvests hard negatives with the current cascade and retrains
// from scratch at the next weak-learner count. The final negative pool
// (seeds first, then harvests in round order) is returned through
// pool_out for downstream calibration.
BoostedModel bootstrap_train(TrainingSource& source, const BootstrapOptions& options,
                             TrainingReport* report = nullptr,
                             FeatureMatrix* pool_out = nullptr);

}  // namespace tsd

#endif
