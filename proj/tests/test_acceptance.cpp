// Acceptance gate: runs every release criterion in order and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "synthetic.hpp"
#include "tsdet/boosting.hpp"
#include "tsdet/calibrate.hpp"
#include "tsdet/channels.hpp"
#include "tsdet/config.hpp"
#include "tsdet/dataset.hpp"
#include "tsdet/detect.hpp"
#include "tsdet/errors.hpp"
#include "tsdet/eval.hpp"
#include "tsdet/features.hpp"
#include "tsdet/geometry.hpp"
#include "tsdet/image.hpp"
#include "tsdet/io.hpp"
#include "tsdet/pipeline.hpp"
#include "tsdet/pooled.hpp"
#include "tsdet/rng.hpp"
#include "tsdet/subcat.hpp"

using namespace tsd;
namespace fs = std::filesystem;

namespace {

struct Gate {
    int failures = 0;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            notes.push_back(what);
        }
    }
};

Image8 random_image(int w, int h, uint64_t seed) {
    std::mt19937_64 g = seeded_stream(seed, 0);
    Image8 img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.set(x, y, static_cast<uint8_t>(uniform_index(g, 256)),
                    static_cast<uint8_t>(uniform_index(g, 256)),
                    static_cast<uint8_t>(uniform_index(g, 256)));
    return img;
}

Raster random_raster(int w, int h, uint64_t seed) {
    std::mt19937_64 g = seeded_stream(seed, 1);
    Raster r(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) r.at(x, y) = static_cast<float>(100.0 * unit_double(g));
    return r;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const size_t n = a.size();
    std::map<std::pair<int, int>, long long> joint;
    std::map<int, long long> ca, cb;
    for (size_t i = 0; i < n; ++i) {
        ++joint[{a[i], b[i]}];
        ++ca[a[i]];
        ++cb[b[i]];
    }
    const auto c2 = [](long long m) { return m * (m - 1) / 2.0; };
    double sum_ij = 0, sum_a = 0, sum_b = 0;
    for (const auto& [k, v] : joint) sum_ij += c2(v);
    for (const auto& [k, v] : ca) sum_a += c2(v);
    for (const auto& [k, v] : cb) sum_b += c2(v);
    const double all = c2(static_cast<long long>(n));
    const double expected = sum_a * sum_b / all;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) return 1.0;
    return (sum_ij - expected) / (maximum - expected);
}

// ---------------------------------------------------------------- criterion 1

void criterion_channels(Gate& g) {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const ChannelStack stack = compute_acf(random_image(64, 64, 700 + seed));
        const Raster& m = stack.channels[3];
        float worst = 0.f;
        for (int y = 0; y < stack.height; ++y)
            for (int x = 0; x < stack.width; ++x) {
                float sum = 0.f;
                for (int b = 0; b < kOrientationBins; ++b) sum += stack.channels[4 + b].at(x, y);
                worst = std::max(worst, std::fabs(sum - m.at(x, y)));
            }
        g.check(worst < 1e-6f, "orientation sum drifts from M by " + std::to_string(worst) +
                                   " on image " + std::to_string(seed));
        if (g.failures) return;
    }
}

// ---------------------------------------------------------------- criterion 2

using VariateRow = std::array<double, kVariates>;

std::array<double, 45> two_pass_cov(const std::vector<VariateRow>& rows) {
    const size_t n = rows.size();
    VariateRow mean{};
    for (const VariateRow& v : rows)
        for (int i = 0; i < kVariates; ++i) mean[i] += v[i];
    for (int i = 0; i < kVariates; ++i) mean[i] /= static_cast<double>(n);
    std::array<double, 45> out{};
    int k = 0;
    for (int i = 0; i < kVariates; ++i)
        for (int j = i; j < kVariates; ++j, ++k)
            for (const VariateRow& v : rows)
                out[k] += (v[i] - mean[i]) * (v[j] - mean[j]) / static_cast<double>(n - 1);
    return out;
}

void criterion_covariance(Gate& g) {
    const auto tri = [](int i, int j) {  // upper-triangle flat index
        return i * kVariates - i * (i - 1) / 2 + (j - i);
    };
    const auto& pairs = cov_entry_pairs();
    int regions = 0;
    for (uint64_t stack_seed = 0; stack_seed < 5 && !g.failures; ++stack_seed) {
        const VariateStack vs = variate_image(random_raster(48, 40, 40 + stack_seed));
        std::mt19937_64 rg = seeded_stream(300 + stack_seed, 2);
        for (int trial = 0; trial < 200; ++trial, ++regions) {
            RegionRect r;
            r.width = 2 + uniform_index(rg, 15);
            r.height = 2 + uniform_index(rg, 15);
            r.left = uniform_index(rg, 48 - r.width + 1);
            r.top = uniform_index(rg, 40 - r.height + 1);

            std::vector<VariateRow> rows;
            for (int y = 0; y < r.height; ++y)
                for (int x = 0; x < r.width; ++x) {
                    VariateRow v{};
                    v[0] = x;
                    v[1] = y;
                    for (int c = 2; c < kVariates; ++c)
                        v[c] = vs.channels.channels[c].at(r.left + x, r.top + y);
                    rows.push_back(v);
                }
            const std::array<double, 45> full = two_pass_cov(rows);
            const CovDescriptor lib = covariance_descriptor(vs, r);

            for (int k = 0; k < kCovValues; ++k) {
                const auto [i, j] = pairs[k];
                const double oracle = full[tri(i, j)];
                const double sig = std::sqrt(std::max(full[tri(i, i)], 0.0) *
                                             std::max(full[tri(j, j)], 0.0));
                const double scale = std::max({std::fabs(lib[k]), std::fabs(oracle), sig, 1e-12});
                if (std::fabs(lib[k] - oracle) / scale >= 1e-10) {
                    g.check(false, "entry " + std::to_string(k) + " off by " +
                                       std::to_string(std::fabs(lib[k] - oracle)) + " in region " +
                                       std::to_string(regions));
                    return;
                }
            }

            Eigen::Matrix<double, kVariates, kVariates> cov;
            for (int i = 0; i < kVariates; ++i)
                for (int j = i; j < kVariates; ++j) cov(i, j) = cov(j, i) = full[tri(i, j)];
            for (int k = 0; k < kCovValues; ++k) {
                const auto [i, j] = pairs[k];
                cov(i, j) = cov(j, i) = lib[k];
            }
            const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kVariates, kVariates>>
                eigen(cov, Eigen::EigenvaluesOnly);
            if (eigen.eigenvalues().minCoeff() < -1e-8) {
                g.check(false, "reconstructed matrix not PSD: min eigenvalue " +
                                   std::to_string(eigen.eigenvalues().minCoeff()));
                return;
            }
        }
    }
    g.check(regions == 1000, "expected 1000 regions, covered " + std::to_string(regions));
}

// ---------------------------------------------------------------- criterion 3

void criterion_lbp(Gate& g) {
    int uniform = 0;
    std::set<int> bins;
    for (int code = 0; code < 256; ++code) {
        const uint8_t c = static_cast<uint8_t>(code);
        const int bin = lbp_uniform_bin(c);
        if (lbp_is_uniform(c)) {
            ++uniform;
            if (bin < 0 || bin >= kLbpBins || !bins.insert(bin).second) {
                g.check(false, "bad bin " + std::to_string(bin) + " for code " +
                                   std::to_string(code));
                return;
            }
        } else if (bin != -1) {
            g.check(false, "non-uniform code " + std::to_string(code) + " got bin " +
                               std::to_string(bin));
            return;
        }
    }
    g.check(uniform == 58, "uniform code count " + std::to_string(uniform));
    g.check(static_cast<int>(bins.size()) == 58, "bin collision");

    for (uint64_t seed = 0; seed < 10; ++seed) {
        const Raster lum = random_raster(36, 28, 900 + seed);
        const std::vector<int16_t> codes = lbp_code_map(lum);
        const ChannelStack hist = lbp_histogram_map(lum);
        for (int y = 0; y < lum.height(); ++y)
            for (int x = 0; x < lum.width(); ++x) {
                float mass = 0.f;
                for (int b = 0; b < kLbpBins; ++b) mass += hist.channels[b].at(x, y);
                int expected = 0;
                if (x + kLbpPatchSize <= lum.width() && y + kLbpPatchSize <= lum.height())
                    for (int dy = 0; dy < kLbpPatchSize; ++dy)
                        for (int dx = 0; dx < kLbpPatchSize; ++dx) {
                            const int16_t code = codes[static_cast<size_t>(y + dy) * lum.width() +
                                                       (x + dx)];
                            if (code >= 0 && lbp_is_uniform(static_cast<uint8_t>(code)))
                                ++expected;
                        }
                if (std::fabs(mass - expected) > 1e-4f) {
                    g.check(false, "histogram mass " + std::to_string(mass) + " vs " +
                                       std::to_string(expected) + " at " + std::to_string(x) +
                                       "," + std::to_string(y));
                    return;
                }
            }
    }
}

// ---------------------------------------------------------------- criterion 4

FeatureMatrix two_moons(std::vector<int8_t>* labels, int n_per_class, double noise,
                        uint64_t seed) {
    std::mt19937_64 g = seeded_stream(seed, 0);
    const auto gauss = [&g]() {
        const double u1 = std::max(unit_double(g), 1e-12);
        const double u2 = unit_double(g);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    FeatureMatrix f(2 * n_per_class, 2);
    labels->clear();
    for (int i = 0; i < n_per_class; ++i) {
        const double t = M_PI * i / (n_per_class - 1);
        f.row(i)[0] = static_cast<float>(std::cos(t) + noise * gauss());
        f.row(i)[1] = static_cast<float>(std::sin(t) + noise * gauss());
        labels->push_back(1);
    }
    for (int i = 0; i < n_per_class; ++i) {
        const double t = M_PI * i / (n_per_class - 1);
        const int r = n_per_class + i;
        f.row(r)[0] = static_cast<float>(1.0 - std::cos(t) + noise * gauss());
        f.row(r)[1] = static_cast<float>(0.5 - std::sin(t) + noise * gauss());
        labels->push_back(-1);
    }
    return f;
}

void criterion_adaboost(Gate& g) {
    std::vector<int8_t> labels;
    const FeatureMatrix f = two_moons(&labels, 250, 0.15, 11);
    TrainingReport report;
    const BoostedModel m = adaboost_train(f, labels, 200, 1.0, 2, 1, &report);
    g.check(!m.trees.empty(), "no trees trained");

    g.check(report.rounds.size() == m.trees.size(), "report rounds mismatch trees");

    std::vector<double> w(f.rows, 1.0 / f.rows);
    for (size_t t = 0; t < m.trees.size(); ++t) {
        double e = 0;
        std::vector<int> preds(f.rows);
        for (int i = 0; i < f.rows; ++i) {
            preds[i] = m.trees[t].predict(f.row(i));
            if (preds[i] != labels[i]) e += w[i];
        }
        if (std::fabs(e - report.rounds[t].error) > 1e-12) {
            g.check(false, "round " + std::to_string(t) + " error replay off by " +
                               std::to_string(std::fabs(e - report.rounds[t].error)));
            return;
        }
        const double a = 0.5 * std::log((1.0 - e) / e);
        if (std::fabs(a - m.coeffs[t]) > 1e-12) {
            g.check(false, "round " + std::to_string(t) + " coefficient off by " +
                               std::to_string(std::fabs(a - m.coeffs[t])));
            return;
        }
        double z = 0;
        for (int i = 0; i < f.rows; ++i) {
            w[i] *= std::exp(-a * labels[i] * preds[i]);
            z += w[i];
        }
        if (std::fabs(z - report.rounds[t].z) > 1e-9) {
            g.check(false, "round " + std::to_string(t) + " normalizer replay off by " +
                               std::to_string(std::fabs(z - report.rounds[t].z)));
            return;
        }
        for (double& wi : w) wi /= z;
        double sum = 0;
        for (double wi : w) sum += wi;
        if (std::fabs(sum - 1.0) >= 1e-9) {
            g.check(false, "round " + std::to_string(t) + " weights sum to " +
                               std::to_string(sum));
            return;
        }
    }

    int errors = 0;
    for (int i = 0; i < f.rows; ++i) {
        const double s = boosted_score(m, f.row(i));
        if ((s >= 0 ? 1 : -1) != labels[i]) ++errors;
    }
    const double rate = static_cast<double>(errors) / f.rows;
    g.check(m.trees.size() <= 200, "trained more rounds than allowed");
    g.check(rate <= 0.05, "training error " + std::to_string(rate) + " above 5%");
}

// ---------------------------------------------------------------- criterion 5

void criterion_platt(Gate& g) {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rg = seeded_stream(500 + seed, 0);
        const auto gauss = [&rg]() {
            const double u1 = std::max(unit_double(rg), 1e-12);
            const double u2 = unit_double(rg);
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        };
        const int n_pos = 6 + uniform_index(rg, 55);
        const int n_neg = 10 + uniform_index(rg, 111);
        std::vector<double> scores;
        std::vector<int8_t> labels;
        for (int i = 0; i < n_pos; ++i) {
            scores.push_back(1.2 + gauss());
            labels.push_back(1);
        }
        for (int i = 0; i < n_neg; ++i) {
            scores.push_back(-0.8 + gauss());
            labels.push_back(-1);
        }

        const CalibrationTargets targets = calibration_targets(labels);
        g.check(targets.t_pos == (n_pos + 1.0) / (n_pos + 2.0), "positive target not exact");
        g.check(targets.t_neg == 1.0 / (n_neg + 2.0), "negative target not exact");

        const CalibrationParams p = fit_platt(scores, labels);
        const double fitted = platt_objective(p.a, p.b, scores, targets, labels);

        double a0 = -15.0, a1 = 5.0, b0 = -12.0, b1 = 12.0;
        double best = std::numeric_limits<double>::infinity(), ba = 0, bb = 0;
        for (int level = 0; level < 4; ++level) {
            const int steps = 80;
            const double da = (a1 - a0) / steps, db = (b1 - b0) / steps;
            for (int i = 0; i <= steps; ++i)
                for (int j = 0; j <= steps; ++j) {
                    const double obj =
                        platt_objective(a0 + i * da, b0 + j * db, scores, targets, labels);
                    if (obj < best) {
                        best = obj;
                        ba = a0 + i * da;
                        bb = b0 + j * db;
                    }
                }
            a0 = ba - 2 * da;
            a1 = ba + 2 * da;
            b0 = bb - 2 * db;
            b1 = bb + 2 * db;
        }
        if (fitted > best + 1e-6) {
            g.check(false, "set " + std::to_string(seed) + ": fitted objective " +
                               std::to_string(fitted) + " above grid " + std::to_string(best));
            return;
        }
        if (g.failures) return;
    }
}

// ---------------------------------------------------------------- criterion 6

void criterion_nms(Gate& g) {
    using Key = std::tuple<double, double, double, double, double>;
    for (int trial = 0; trial < 100; ++trial) {
        std::mt19937_64 rg = seeded_stream(600 + static_cast<uint64_t>(trial), 0);
        std::vector<Detection> dets(1000);
        for (Detection& d : dets) {
            d.box.left = 0.5 * uniform_index(rg, 600);
            d.box.top = 0.5 * uniform_index(rg, 600);
            d.box.right = d.box.left + 8 + 0.5 * uniform_index(rg, 144);
            d.box.bottom = d.box.top + 8 + 0.5 * uniform_index(rg, 144);
            d.calibrated_score = uniform_index(rg, 400) / 400.0;
            d.raw_score = d.calibrated_score;
        }
        const std::vector<Detection> fast = nms(dets, 0.5);

        std::vector<Detection> sorted = dets;
        std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
            return a.calibrated_score > b.calibrated_score;
        });
        std::vector<Detection> kept;
        for (const Detection& d : sorted) {
            bool ok = true;
            for (const Detection& k : kept)
                if (pascal_overlap(d.box, k.box) > 0.5) {
                    ok = false;
                    break;
                }
            if (ok) kept.push_back(d);
        }

        std::multiset<Key> a, b;
        for (const Detection& d : fast)
            a.insert({d.box.left, d.box.top, d.box.right, d.box.bottom, d.calibrated_score});
        for (const Detection& d : kept)
            b.insert({d.box.left, d.box.top, d.box.right, d.box.bottom, d.calibrated_score});
        if (a != b) {
            g.check(false, "trial " + std::to_string(trial) + ": library kept " +
                               std::to_string(fast.size()) + ", reference kept " +
                               std::to_string(kept.size()));
            return;
        }
    }
}

// ---------------------------------------------------------------- criterion 7

void criterion_spectral(Gate& g) {
    for (uint64_t trial = 0; trial < 50; ++trial) {
        std::mt19937_64 rg = seeded_stream(1000 + trial, 0);
        const auto gauss = [&rg]() {
            const double u1 = std::max(unit_double(rg), 1e-12);
            const double u2 = unit_double(rg);
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        };
        const double centers[3][2] = {{0, 0}, {20, 0}, {0, 20}};
        DoubleMatrix points(180, 2);
        std::vector<int> truth(180);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 60; ++i) {
                const int r = c * 60 + i;
                points.row(r)[0] = centers[c][0] + gauss();
                points.row(r)[1] = centers[c][1] + gauss();
                truth[r] = c;
            }
        const std::vector<int> got = spectral_cluster(points, 3, trial);
        const double ari = adjusted_rand_index(truth, got);
        if (ari != 1.0) {
            g.check(false, "trial " + std::to_string(trial) + " ARI " + std::to_string(ari));
            return;
        }
    }

    const int sizes[3] = {5, 7, 4};
    const int n = 16;
    DoubleMatrix aff(n, n);
    std::vector<int> truth;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < sizes[c]; ++i) truth.push_back(c);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            aff.row(i)[j] = (i != j && truth[i] == truth[j]) ? 1.0 : 0.0;
    const std::vector<int> got = spectral_cluster_affinity(aff, 3, 123);
    g.check(adjusted_rand_index(truth, got) == 1.0, "disconnected components not recovered");
}

// ---------------------------------------------------------------- criterion 8

void criterion_metrics(Gate& g) {
    const std::vector<std::pair<double, DetLabel>> labeled = {
        {0.9, DetLabel::TP}, {0.8, DetLabel::FP}, {0.7, DetLabel::TP}};
    const PRCurve curve = pr_curve(labeled, 2);
    g.check(curve.points.size() == 3, "expected 3 PR points");
    if (curve.points.size() == 3) {
        g.check(curve.points[0].recall == 0.5 && curve.points[0].precision == 1.0,
                "first PR point wrong");
        g.check(curve.points[1].recall == 0.5 && curve.points[1].precision == 0.5,
                "second PR point wrong");
        g.check(curve.points[2].recall == 1.0 &&
                    std::fabs(curve.points[2].precision - 2.0 / 3.0) < 1e-15,
                "third PR point wrong");
    }
    g.check(std::fabs(auc(curve) - 19.0 / 24.0) < 1e-12,
            "AUC " + std::to_string(auc(curve)) + " != 19/24");
    g.check(std::fabs(average_precision(curve) - 28.0 / 33.0) < 1e-12,
            "AP " + std::to_string(average_precision(curve)) + " != 28/33");

    const PRCurve perfect =
        pr_curve({{0.9, DetLabel::TP}, {0.8, DetLabel::TP}}, 2);
    g.check(auc(perfect) == 1.0 && average_precision(perfect) == 1.0,
            "perfect detector not scored 1.0");

    const PRCurve empty = pr_curve({}, 5);
    g.check(empty.points.empty() && auc(empty) == 0.0 && average_precision(empty) == 0.0,
            "empty detector not scored 0.0");
}

// ---------------------------------------------------------------- criterion 9

const char* kSyntheticConfig = R"json({
  "seed": 7,
  "classes": [
    {"name": "disc", "K": 2, "space": "visual",
     "window": {"fixed": true, "w": 20, "h": 20, "padded_w": 28, "padded_h": 28},
     "jitter": {"copies": 6, "translate": 2.0, "scale_min": 0.91, "scale_max": 1.1},
     "nu": 0.2, "depth": 2, "schedule": [32, 64, 128, 256], "features": "acf",
     "neg_seed": 1500, "hard_neg_cap": 4000, "nms": 0.4, "eval_overlap": 0.5},
    {"name": "triangle", "K": 2, "space": "visual",
     "window": {"fixed": true, "w": 20, "h": 20, "padded_w": 28, "padded_h": 28},
     "jitter": {"copies": 6, "translate": 2.0, "scale_min": 0.91, "scale_max": 1.1},
     "nu": 0.2, "depth": 2, "schedule": [32, 64, 128, 256], "features": "acf",
     "neg_seed": 1500, "hard_neg_cap": 4000, "nms": 0.4, "eval_overlap": 0.5},
    {"name": "tallrect", "K": 2, "space": "aspect",
     "window": {"base_height": 36, "margin": 4},
     "jitter": {"copies": 6, "translate": 2.0, "scale_min": 0.91, "scale_max": 1.1},
     "nu": 0.2, "depth": 2, "schedule": [32, 64, 128, 256], "features": "acf",
     "neg_seed": 1500, "hard_neg_cap": 4000, "nms": 0.4, "eval_overlap": 0.5}
  ]
})json";

void criterion_end_to_end(Gate& g, const fs::path& root) {
    const std::string train_dir = (root / "train").string();
    const std::string test_dir = (root / "test").string();
    const std::vector<AnnotatedSample> gt_train = synth::write_dataset(train_dir, 400, 1000);
    const std::vector<AnnotatedSample> gt_test = synth::write_dataset(test_dir, 100, 5000);

    const PipelineConfig config = parse_config_text(kSyntheticConfig, "acceptance");
    ImageCache images;
    std::vector<TrainedClass> trained;
    for (const ClassConfig& cc : config.classes) {
        std::vector<AnnotatedSample> samples;
        for (const AnnotatedSample& s : gt_train)
            if (s.class_name == cc.name) samples.push_back(s);
        g.check(samples.size() >= 100, cc.name + ": only " + std::to_string(samples.size()) +
                                           " training samples");
        const SubcategoryLayout layout = cluster_class(cc, samples, images, config.seed);
        g.check(layout.K == 2, cc.name + ": layout K " + std::to_string(layout.K));
        TrainingCorpus corpus = build_corpus(gt_train, cc.name);
        if (corpus.negative_images.size() > 160) corpus.negative_images.resize(160);
        trained.push_back(train_class(cc, corpus, layout, images, 4, config.seed));
        for (const TrainedSubcat& sub : trained.back().subcats)
            g.check(sub.model.rounds() <= 256,
                    cc.name + ": " + std::to_string(sub.model.rounds()) + " rounds");
    }
    if (g.failures) return;

    const DetectorBank bank = assemble_bank(config, trained);
    const ChannelBuilder builder = combo_builder(bank_combo(bank));

    std::map<std::string, std::map<std::string, std::vector<AnnotatedSample>>> gt_by_image;
    std::map<std::string, int> n_gt;
    for (const AnnotatedSample& s : gt_test) {
        gt_by_image[s.image_path][s.class_name].push_back(s);
        ++n_gt[s.class_name];
    }

    MatchOptions options;
    options.min_overlap = 0.5;
    options.protocol = MatchProtocol::Gtsdb;
    std::map<std::string, std::vector<std::pair<double, DetLabel>>> labeled;
    char name[32];
    for (int i = 0; i < 100; ++i) {
        std::snprintf(name, sizeof(name), "scene_%04d.png", i);
        const std::string path = (fs::path(test_dir) / name).string();
        const Image8 img = read_image(path);
        const std::vector<Detection> dets = detect_all(img, bank, builder, 4);
        for (const ClassConfig& cc : config.classes) {
            std::vector<Detection> cdets;
            for (const Detection& d : dets)
                if (d.class_name == cc.name) cdets.push_back(d);
            std::stable_sort(cdets.begin(), cdets.end(),
                             [](const Detection& a, const Detection& b) {
                                 return a.calibrated_score > b.calibrated_score;
                             });
            static const std::vector<AnnotatedSample> kNone;
            const auto git = gt_by_image.find(path);
            const std::vector<AnnotatedSample>* gts = &kNone;
            if (git != gt_by_image.end()) {
                const auto cit = git->second.find(cc.name);
                if (cit != git->second.end()) gts = &cit->second;
            }
            const MatchResult res = match_detections(cdets, *gts, options);
            for (size_t d = 0; d < cdets.size(); ++d)
                labeled[cc.name].push_back({cdets[d].calibrated_score, res.labels[d]});
        }
    }

    for (const ClassConfig& cc : config.classes) {
        const PRCurve curve = pr_curve(labeled[cc.name], n_gt[cc.name]);
        const double ap = average_precision(curve);
        char msg[128];
        std::snprintf(msg, sizeof(msg), "%s AP %.4f below 0.90 (n_gt %d)", cc.name.c_str(), ap,
                      n_gt[cc.name]);
        g.check(ap >= 0.90, msg);
    }

    // Overlapping plants of different classes must both survive fusion.
    const synth::Scene overlap = synth::render_overlap_scene(3);
    const std::vector<Detection> dets = detect_all(overlap.image, bank, builder, 4);
    bool rect_found = false, disc_found = false;
    for (const Detection& d : dets)
        for (const synth::SceneInstance& inst : overlap.instances) {
            if (d.class_name != inst.class_name) continue;
            if (pascal_overlap(d.box, inst.box) < 0.5) continue;
            if (inst.class_name == "tallrect") rect_found = true;
            if (inst.class_name == "disc") disc_found = true;
        }
    g.check(rect_found, "fusion lost the tall rectangle under the overlapping disc");
    g.check(disc_found, "fusion lost the disc under the overlapping tall rectangle");
}

// --------------------------------------------------------------- criterion 10

BoostedModel corner_model(const std::string& cls) {
    BoostedModel m;
    m.class_name = cls;
    m.layout = {8, 8, 10, "acf"};
    m.window_w = m.window_h = 24;
    m.padded_w = m.padded_h = 32;
    m.margin_x = m.margin_y = 4;
    m.depth = 1;
    const int corners[4][2] = {{1, 1}, {6, 1}, {1, 6}, {6, 6}};
    for (const auto& c : corners) {
        DecisionTree t;
        t.depth = 1;
        t.nodes.push_back({c[1] * 8 + c[0], 0.35f});
        t.leaves = {-1, 1};
        m.trees.push_back(t);
        m.coeffs.push_back(1.0);
    }
    m.rejects = {0.5, 1.5, 2.5, 3.5};
    m.calibration = {-1.0, 0.0, true};
    return m;
}

void criterion_shared_features(Gate& g) {
    DetectorBank bank;
    for (const char* cls : {"alpha", "beta", "gamma"}) {
        ClassDetectors cd;
        cd.name = cls;
        cd.models.push_back(corner_model(cls));
        bank.classes.push_back(std::move(cd));
    }
    const ChannelBuilder builder = [](const Image8& img) { return compute_acf(img); };
    for (uint64_t seed = 0; seed < 3; ++seed) {
        const Image8 img = random_image(160, 120, 7700 + seed);
        const int64_t before = pyramid_build_count();
        DetectStats stats;
        detect_all(img, bank, builder, 1, &stats);
        const int64_t built = pyramid_build_count() - before;
        g.check(built == 1, "detect_all built " + std::to_string(built) + " pyramids");
        g.check(stats.pyramids_built == 1,
                "stats report " + std::to_string(stats.pyramids_built) + " pyramids");
    }
}

// --------------------------------------------------------------- criterion 11

int run_command(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -2;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<unreadable:" + path + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism(Gate& g, const fs::path& root) {
#ifndef TSDET_CLI
    g.check(false, "TSDET_CLI not configured at build time");
#else
    const std::string cli = TSDET_CLI;
    const std::string data = (root / "deter").string();
    synth::write_dataset(data, 30, 9000);

    struct Run {
        std::string tag;
        int threads;
    };
    const Run runs[3] = {{"a", 1}, {"b", 1}, {"c", 4}};
    for (const Run& run : runs) {
        const fs::path dir = root / ("run_" + run.tag);
        fs::create_directories(dir / "models");
        std::ostringstream cfg;
        cfg << "{\n  \"seed\": 5,\n  \"paths\": {\n    \"format\": \"csv\",\n"
            << "    \"annotations\": \"" << data << "/annotations.csv\",\n"
            << "    \"class_map\": \"" << data << "/classes.txt\",\n"
            << "    \"image_dir\": \"" << data << "\",\n"
            << "    \"model_dir\": \"" << (dir / "models").string() << "\",\n"
            << "    \"output_dir\": \"" << (dir / "out").string() << "\"\n  },\n"
            << "  \"classes\": [{\"name\": \"disc\", \"K\": 1, \"space\": \"aspect\",\n"
            << "    \"window\": {\"fixed\": true, \"w\": 20, \"h\": 20, \"padded_w\": 28, "
               "\"padded_h\": 28},\n"
            << "    \"nu\": 0.3, \"depth\": 2, \"schedule\": [16, 32], \"features\": \"acf\",\n"
            << "    \"neg_seed\": 300, \"hard_neg_cap\": 600}]\n}\n";
        const std::string cfg_path = (dir / "config.json").string();
        std::ofstream(cfg_path) << cfg.str();

        const std::string log = (dir / "log.txt").string();
        const std::string thr = std::to_string(run.threads);
        g.check(run_command(cli + " cluster --config " + cfg_path + " --class disc >> " + log +
                            " 2>&1") == 0,
                "cluster failed in run " + run.tag);
        g.check(run_command(cli + " train --config " + cfg_path + " --threads " + thr + " >> " +
                            log + " 2>&1") == 0,
                "train failed in run " + run.tag);
        g.check(run_command(cli + " detect --config " + cfg_path + " --images " + data +
                            "/images.txt --out " + (dir / "dets.txt").string() + " --threads " +
                            thr + " >> " + log + " 2>&1") == 0,
                "detect failed in run " + run.tag);
        if (g.failures) return;
    }

    const auto artifact = [&](const std::string& tag, const std::string& rel) {
        return file_bytes((root / ("run_" + tag) / rel).string());
    };
    for (const std::string rel :
         {std::string("models/disc.layout"), std::string("models/disc_0.model"),
          std::string("dets.txt")}) {
        const std::string a = artifact("a", rel), b = artifact("b", rel), c = artifact("c", rel);
        g.check(!a.empty() && a.find("<unreadable") != 0, rel + " missing in run a");
        g.check(a == b, rel + " differs between repeated runs");
        g.check(a == c, rel + " differs between --threads 1 and --threads 4");
    }
#endif
}

}  // namespace

int main() {
    const fs::path root =
        fs::temp_directory_path() / ("tsdet_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(root);

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<void(Gate&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "channel conservation", 5, criterion_channels},
        {2, "covariance oracle", 10, criterion_covariance},
        {3, "uniform lbp", 1, criterion_lbp},
        {4, "adaboost", 10, criterion_adaboost},
        {5, "platt fit", 5, criterion_platt},
        {6, "nms equivalence", 10, criterion_nms},
        {7, "spectral clustering", 30, criterion_spectral},
        {8, "metrics", 1, criterion_metrics},
        {9, "end-to-end synthetic", 300, [&root](Gate& g) { criterion_end_to_end(g, root); }},
        {10, "shared features", 1, criterion_shared_features},
        {11, "determinism", 0, [&root](Gate& g) { criterion_determinism(g, root); }},
    };

    int failed = 0;
    for (const Criterion& c : criteria) {
        Gate gate;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.fn(gate);
        } catch (const std::exception& e) {
            gate.check(false, std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs > c.budget_s)
            gate.check(false, "took " + std::to_string(secs) + " s, budget " +
                                  std::to_string(c.budget_s) + " s");
        std::printf("%2d  %-24s %s  %7.2f s\n", c.id, c.name,
                    gate.failures == 0 ? "PASS" : "FAIL", secs);
        for (const std::string& note : gate.notes) std::printf("      - %s\n", note.c_str());
        std::fflush(stdout);
        if (gate.failures) ++failed;
    }

    std::error_code ec;
    fs::remove_all(root, ec);
    if (failed) std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed;
}
