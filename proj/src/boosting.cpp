#include "tsdet/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tsdet/errors.hpp"
#include "tsdet/parallel.hpp"

namespace tsd {

void FeatureMatrix::append_rows(const FeatureMatrix& other) {
    if (other.rows == 0) return;
    if (rows == 0) {
        *this = other;
        return;
    }
    if (other.cols != cols) throw InvalidInput("FeatureMatrix: column mismatch on append");
    data.insert(data.end(), other.data.begin(), other.data.end());
    rows += other.rows;
}

namespace {

constexpr int kBins = 256;

// Column-major 256-bin quantization of a feature matrix; bounds are fit
// on the data handed to training.
struct QuantizedFeatures {
    int rows = 0, cols = 0;
    std::vector<uint8_t> codes;  // codes[f * rows + i]
    std::vector<float> lo;
    std::vector<float> step;  // 0 for constant features

    float boundary(int f, int bin) const { return lo[f] + (bin + 1) * step[f]; }
};

QuantizedFeatures quantize(const FeatureMatrix& features) {
    QuantizedFeatures q;
    q.rows = features.rows;
    q.cols = features.cols;
    q.codes.resize(static_cast<size_t>(features.rows) * features.cols);
    q.lo.resize(features.cols);
    q.step.resize(features.cols);
    for (int f = 0; f < features.cols; ++f) {
        float lo = std::numeric_limits<float>::infinity();
        float hi = -std::numeric_limits<float>::infinity();
        for (int i = 0; i < features.rows; ++i) {
            const float v = features.row(i)[f];
            if (!std::isfinite(v)) throw InvalidInput("non-finite feature value");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        q.lo[f] = lo;
        q.step[f] = hi > lo ? (hi - lo) / kBins : 0.f;
        uint8_t* col = q.codes.data() + static_cast<size_t>(f) * features.rows;
        if (q.step[f] == 0.f) {
            std::fill(col, col + features.rows, 0);
            continue;
        }
        const float inv = 1.f / q.step[f];
        for (int i = 0; i < features.rows; ++i) {
            const int bin = static_cast<int>((features.row(i)[f] - lo) * inv);
            col[i] = static_cast<uint8_t>(std::clamp(bin, 0, kBins - 1));
        }
    }
    return q;
}

struct SplitChoice {
    double error = std::numeric_limits<double>::infinity();
    int feature = -1;
    int bin = -1;

    bool better_than(const SplitChoice& o) const {
        if (error != o.error) return error < o.error;
        if (feature != o.feature) return feature < o.feature;
        return bin < o.bin;
    }
};

SplitChoice search_split(const QuantizedFeatures& q, const std::vector<int8_t>& labels,
                         const std::vector<double>& weights, const std::vector<int>& samples,
                         int threads) {
    const int cols = q.cols;
    const int blocks = std::min(std::max(threads, 1), std::max(cols, 1));
    std::vector<SplitChoice> best_per_block(blocks);
    parallel_for(blocks, threads, [&](int blk) {
        SplitChoice best;
        std::vector<double> wpos(kBins), wneg(kBins);
        const int f_begin = static_cast<int>(static_cast<int64_t>(blk) * cols / blocks);
        const int f_end = static_cast<int>(static_cast<int64_t>(blk + 1) * cols / blocks);
        for (int f = f_begin; f < f_end; ++f) {
            if (q.step[f] == 0.f) continue;
            std::fill(wpos.begin(), wpos.end(), 0.0);
            std::fill(wneg.begin(), wneg.end(), 0.0);
            const uint8_t* col = q.codes.data() + static_cast<size_t>(f) * q.rows;
            double tot_pos = 0, tot_neg = 0;
            for (int idx : samples) {
                const double w = weights[idx];
                if (labels[idx] > 0) {
                    wpos[col[idx]] += w;
                    tot_pos += w;
                } else {
                    wneg[col[idx]] += w;
                    tot_neg += w;
                }
            }
            double pos_left = 0, neg_left = 0;
            for (int b = 0; b < kBins - 1; ++b) {
                pos_left += wpos[b];
                neg_left += wneg[b];
                const double err = std::min(pos_left, neg_left) +
                                   std::min(tot_pos - pos_left, tot_neg - neg_left);
                const SplitChoice cand{err, f, b};
                if (cand.better_than(best)) best = cand;
            }
        }
        best_per_block[blk] = best;
    });
    SplitChoice best;
    for (const SplitChoice& c : best_per_block)
        if (c.feature >= 0 && c.better_than(best)) best = c;
    return best;
}

struct TreeBuilder {
    const QuantizedFeatures& q;
    const FeatureMatrix& features;
    const std::vector<int8_t>& labels;
    const std::vector<double>& weights;
    int threads;
    DecisionTree& tree;

    void build(int node, int level, std::vector<int>& samples, int8_t inherited_vote) {
        double wpos = 0, wneg = 0;
        for (int idx : samples) (labels[idx] > 0 ? wpos : wneg) += weights[idx];
        const int8_t vote = samples.empty() ? inherited_vote : (wpos > wneg ? int8_t{1} : int8_t{-1});
        if (level == tree.depth) {
            tree.leaves[node - (static_cast<int>(tree.nodes.size()))] = vote;
            return;
        }
        SplitChoice split;
        if (!samples.empty() && wpos > 0 && wneg > 0)
            split = search_split(q, labels, weights, samples, threads);
        if (split.feature < 0) {
            // Pure or unsplittable node: every leaf below votes the same,
            // so the routing is moot and the threshold just has to be a
            // finite value the model file can carry.
            tree.nodes[node] = {0, 0.f};
            std::vector<int> empty;
            build(2 * node + 1, level + 1, samples, vote);
            build(2 * node + 2, level + 1, empty, vote);
            return;
        }
        const float threshold = q.boundary(split.feature, split.bin);
        tree.nodes[node] = {split.feature, threshold};
        std::vector<int> left, right;
        left.reserve(samples.size());
        right.reserve(samples.size());
        for (int idx : samples)
            (features.row(idx)[split.feature] < threshold ? left : right).push_back(idx);
        samples.clear();
        samples.shrink_to_fit();
        build(2 * node + 1, level + 1, left, vote);
        build(2 * node + 2, level + 1, right, vote);
    }
};

DecisionTree train_tree_quantized(const QuantizedFeatures& q, const FeatureMatrix& features,
                                  const std::vector<int8_t>& labels,
                                  const std::vector<double>& weights, int depth, int threads,
                                  bool* degenerate) {
    DecisionTree tree;
    tree.depth = depth;
    tree.nodes.assign((1u << depth) - 1, TreeNode{});
    tree.leaves.assign(1u << depth, -1);
    bool has_pos = false, has_neg = false;
    for (int8_t y : labels) (y > 0 ? has_pos : has_neg) = true;
    if (degenerate) *degenerate = !(has_pos && has_neg);
    std::vector<int> all(features.rows);
    std::iota(all.begin(), all.end(), 0);
    TreeBuilder builder{q, features, labels, weights, threads, tree};
    builder.build(0, 0, all, -1);
    return tree;
}

}  // namespace

DecisionTree train_tree(const FeatureMatrix& features, const std::vector<int8_t>& labels,
                        const std::vector<double>& weights, int depth, int threads,
                        bool* degenerate) {
    if (features.rows == 0 || features.cols == 0) throw InvalidInput("train_tree: empty data");
    if (static_cast<int>(labels.size()) != features.rows ||
        static_cast<int>(weights.size()) != features.rows)
        throw InvalidInput("train_tree: size mismatch");
    if (depth < 1 || depth > 5) throw InvalidInput("train_tree: depth must be in 1..5");
    const QuantizedFeatures q = quantize(features);
    return train_tree_quantized(q, features, labels, weights, depth, threads, degenerate);
}

BoostedModel adaboost_train(const FeatureMatrix& features, const std::vector<int8_t>& labels,
                            int rounds, double nu, int depth, int threads,
                            TrainingReport* report, TrainingState* state_out) {
    if (features.rows == 0 || features.cols == 0) throw InvalidInput("adaboost_train: empty data");
    if (rounds < 1) throw InvalidInput("adaboost_train: rounds must be >= 1");
    if (!(nu > 0.0 && nu <= 1.0)) throw InvalidInput("adaboost_train: nu must be in (0,1]");
    const int n = features.rows;
    const QuantizedFeatures q = quantize(features);

    BoostedModel model;
    model.nu = nu;
    model.depth = depth;
    TrainingState state;
    state.weights.assign(n, 1.0 / n);

    std::vector<int8_t> preds(n);
    for (int t = 0; t < rounds; ++t) {
        bool degenerate = false;
        DecisionTree tree =
            train_tree_quantized(q, features, labels, state.weights, depth, threads, &degenerate);
        if (degenerate && report) report->degenerate_labels = true;
        double err = 0;
        for (int i = 0; i < n; ++i) {
            preds[i] = static_cast<int8_t>(tree.predict(features.row(i)));
            if (preds[i] != labels[i]) err += state.weights[i];
        }
        state.round = t + 1;
        state.last_error = err;
        if (err >= 0.5) {
            if (report) report->stopped_half_error = true;
            break;
        }
        const double clamped = err > 0 ? err : 1.0 / (2.0 * n);
        const double wt = 0.5 * std::log((1.0 - clamped) / clamped);
        const double at = nu * wt;
        model.trees.push_back(std::move(tree));
        model.coeffs.push_back(at);
        if (err == 0) {
            if (report) {
                report->rounds.push_back({0.0, 1.0});
                report->stopped_zero_error = true;
            }
            state.last_z = 1.0;
            break;
        }
        double z = 0;
        for (int i = 0; i < n; ++i) {
            state.weights[i] *= std::exp(-at * labels[i] * preds[i]);
            z += state.weights[i];
        }
        for (int i = 0; i < n; ++i) state.weights[i] /= z;
        state.last_z = z;
        if (report) report->rounds.push_back({err, z});
    }
    if (state_out) *state_out = std::move(state);
    return model;
}

double boosted_score(const BoostedModel& model, const float* features) {
    double h = 0;
    for (size_t t = 0; t < model.trees.size(); ++t)
        h += model.coeffs[t] * model.trees[t].predict(features);
    return h;
}

CascadeResult cascade_evaluate(const BoostedModel& model, const float* features) {
    return cascade_evaluate_fn(model, [features](int f) { return features[f]; });
}

std::vector<std::vector<double>> positive_traces(const BoostedModel& model,
                                                 const FeatureMatrix& positives) {
    std::vector<std::vector<double>> traces(positives.rows);
    for (int i = 0; i < positives.rows; ++i) {
        traces[i].resize(model.trees.size());
        double h = 0;
        for (size_t t = 0; t < model.trees.size(); ++t) {
            h += model.coeffs[t] * model.trees[t].predict(positives.row(i));
            traces[i][t] = h;
        }
    }
    return traces;
}

std::vector<double> compute_reject_thresholds(const std::vector<std::vector<double>>& traces) {
    if (traces.empty()) throw InvalidInput("compute_reject_thresholds: no positive traces");
    const size_t rounds = traces.front().size();
    constexpr double kSlack = 1e-6;
    std::vector<double> thresholds(rounds, std::numeric_limits<double>::infinity());
    for (const auto& trace : traces) {
        if (trace.size() != rounds) throw InvalidInput("compute_reject_thresholds: ragged traces");
        for (size_t t = 0; t < rounds; ++t) thresholds[t] = std::min(thresholds[t], trace[t]);
    }
    for (double& r : thresholds) r -= kSlack;
    return thresholds;
}

BoostedModel bootstrap_train(TrainingSource& source, const BootstrapOptions& options,
                             TrainingReport* report, FeatureMatrix* pool_out) {
    if (options.schedule.empty()) throw InvalidInput("bootstrap_train: empty schedule");
    const FeatureMatrix& pos = source.positives();
    if (pos.rows == 0) throw InvalidInput("bootstrap_train: no positives");
    FeatureMatrix pool = source.seed_negatives(options.neg_seed_count, options.seed);
    if (report) report->seed_negative_rows = pool.rows;

    BoostedModel model;
    for (size_t round = 0; round < options.schedule.size(); ++round) {
        FeatureMatrix data = pos;
        data.append_rows(pool);
        std::vector<int8_t> labels(data.rows, -1);
        std::fill(labels.begin(), labels.begin() + pos.rows, int8_t{1});
        TrainingReport local;
        model = adaboost_train(data, labels, options.schedule[round], options.nu, options.depth,
                               options.threads, &local);
        if (!model.trees.empty())
            model.rejects = compute_reject_thresholds(positive_traces(model, pos));
        if (report && round + 1 == options.schedule.size()) {
            report->rounds = local.rounds;
            report->stopped_zero_error = local.stopped_zero_error;
            report->stopped_half_error = local.stopped_half_error;
            report->degenerate_labels = local.degenerate_labels;
        }
        if (round + 1 < options.schedule.size()) {
            FeatureMatrix harvested =
                source.harvest_negatives(model, options.hard_neg_cap, options.seed + round + 1);
            if (report) report->harvest_counts.push_back(harvested.rows);
            if (harvested.rows == 0) {
                if (report) report->harvest_empty_round = true;
            } else {
                pool.append_rows(harvested);
            }
        }
    }
    if (pool_out) *pool_out = std::move(pool);
    return model;
}

}  // namespace tsd
