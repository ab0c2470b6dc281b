#include "tsdet/subcat.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tsdet/channels.hpp"
#include "tsdet/errors.hpp"
#include "tsdet/rng.hpp"

namespace tsd {

namespace {

// Lower median: element (n-1)/2 of the sorted values.
double lower_median(std::vector<double> v) {
    if (v.empty()) throw InvalidInput("median of empty set");
    const size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

void zscore_columns(DoubleMatrix& m) {
    for (int c = 0; c < m.cols; ++c) {
        double mean = 0;
        for (int i = 0; i < m.rows; ++i) mean += m.row(i)[c];
        mean /= m.rows;
        double ss = 0;
        for (int i = 0; i < m.rows; ++i) {
            const double d = m.row(i)[c] - mean;
            ss += d * d;
        }
        const double sd = m.rows > 1 ? std::sqrt(ss / (m.rows - 1)) : 0.0;
        for (int i = 0; i < m.rows; ++i) {
            double& v = m.row(i)[c];
            v = sd > 0 ? (v - mean) / sd : v - mean;
        }
    }
}

double sq_dist(const double* a, const double* b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

struct KMeansResult {
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
};

KMeansResult kmeans_once(const DoubleMatrix& points, int K, std::mt19937_64& g) {
    const int n = points.rows, d = points.cols;
    DoubleMatrix centers(K, d);
    std::vector<double> min_d2(n);

    std::copy_n(points.row(uniform_index(g, n)), d, centers.row(0));
    for (int c = 1; c < K; ++c) {
        double total = 0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) best = std::min(best, sq_dist(points.row(i), centers.row(j), d));
            min_d2[i] = best;
            total += best;
        }
        int pick = 0;
        if (total > 0) {
            const double threshold = unit_double(g) * total;
            double cum = 0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                cum += min_d2[i];
                if (cum >= threshold) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = uniform_index(g, n);
        }
        std::copy_n(points.row(pick), d, centers.row(c));
    }

    KMeansResult res;
    res.labels.assign(n, 0);
    std::vector<double> dist(n, 0.0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = iter == 0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < K; ++c) {
                const double d2 = sq_dist(points.row(i), centers.row(c), d);
                if (d2 < best_d) {
                    best_d = d2;
                    best = c;
                }
            }
            dist[i] = best_d;
            if (res.labels[i] != best) {
                res.labels[i] = best;
                changed = true;
            }
        }
        std::vector<int> counts(K, 0);
        for (int l : res.labels) ++counts[l];
        for (int c = 0; c < K; ++c) {
            if (counts[c] > 0) continue;
            // Re-seed an empty cluster with the worst-fit point.
            int far = 0;
            for (int i = 1; i < n; ++i)
                if (dist[i] > dist[far]) far = i;
            std::copy_n(points.row(far), d, centers.row(c));
            --counts[res.labels[far]];
            res.labels[far] = c;
            dist[far] = 0;
            ++counts[c];
            changed = true;
        }
        if (!changed) break;
        std::fill(centers.data.begin(), centers.data.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            ++counts[res.labels[i]];
            for (int j = 0; j < d; ++j) centers.row(res.labels[i])[j] += points.row(i)[j];
        }
        for (int c = 0; c < K; ++c)
            if (counts[c] > 0)
                for (int j = 0; j < d; ++j) centers.row(c)[j] /= counts[c];
    }
    res.inertia = 0;
    for (int i = 0; i < n; ++i) res.inertia += sq_dist(points.row(i), centers.row(res.labels[i]), d);
    return res;
}

std::vector<int> kmeans(const DoubleMatrix& points, int K, uint64_t seed, int restarts) {
    KMeansResult best;
    for (int r = 0; r < restarts; ++r) {
        std::mt19937_64 g = seeded_stream(seed, static_cast<uint64_t>(r));
        KMeansResult cand = kmeans_once(points, K, g);
        if (cand.inertia < best.inertia) best = std::move(cand);
    }
    return best.labels;
}

}  // namespace

GeometricFeatureResult geometric_features(const std::vector<AnnotatedSample>& samples) {
    if (samples.empty()) throw InvalidInput("geometric_features: no samples");
    GeometricFeatureResult res;
    res.has_orientation = std::all_of(samples.begin(), samples.end(),
                                      [](const AnnotatedSample& s) { return s.has_orientation; });
    res.has_truncation = std::all_of(samples.begin(), samples.end(),
                                     [](const AnnotatedSample& s) { return s.has_truncation; });
    res.has_occlusion = std::all_of(samples.begin(), samples.end(),
                                    [](const AnnotatedSample& s) { return s.has_occlusion; });
    if (res.has_orientation) {
        res.columns.push_back("sin_orientation");
        res.columns.push_back("cos_orientation");
    }
    res.columns.push_back("aspect_ratio");
    if (res.has_truncation) res.columns.push_back("truncation");
    if (res.has_occlusion) res.columns.push_back("occlusion");

    res.features = DoubleMatrix(static_cast<int>(samples.size()), static_cast<int>(res.columns.size()));
    for (size_t i = 0; i < samples.size(); ++i) {
        double* r = res.features.row(static_cast<int>(i));
        int c = 0;
        if (res.has_orientation) {
            r[c++] = std::sin(samples[i].orientation);
            r[c++] = std::cos(samples[i].orientation);
        }
        r[c++] = samples[i].aspect_ratio();
        if (res.has_truncation) r[c++] = samples[i].truncation;
        if (res.has_occlusion) r[c++] = samples[i].occlusion_index;
    }
    zscore_columns(res.features);
    return res;
}

DoubleMatrix visual_features(const std::vector<Image8>& crops, int median_w, int median_h,
                             DatasetReport* report) {
    if (crops.empty()) throw InvalidInput("visual_features: no crops");
    if (median_w < 4 || median_h < 4) throw InvalidInput("visual_features: window too small");
    std::vector<std::vector<double>> rows;
    for (const Image8& crop : crops) {
        if (crop.width == 0 || crop.height == 0) {
            if (report) ++report->skipped_unreadable;
            continue;
        }
        const ChannelStack acf = compute_acf(resize_bilinear(crop, median_w, median_h));
        std::vector<double> row;
        row.reserve(acf.channels.size() * acf.channels[0].size());
        for (const Raster& ch : acf.channels)
            row.insert(row.end(), ch.data(), ch.data() + ch.size());
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("visual_features: every crop unreadable");
    DoubleMatrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), m.row(static_cast<int>(i)));
    return m;
}

void median_box_size(const std::vector<AnnotatedSample>& samples, int* w, int* h) {
    std::vector<double> ws, hs;
    for (const AnnotatedSample& s : samples) {
        ws.push_back(s.box.width());
        hs.push_back(s.box.height());
    }
    *w = std::max(1, static_cast<int>(std::lround(lower_median(ws))));
    *h = std::max(1, static_cast<int>(std::lround(lower_median(hs))));
}

std::vector<int> spectral_cluster_affinity(const DoubleMatrix& affinity, int K, uint64_t seed) {
    const int n = affinity.rows;
    if (n == 0 || affinity.cols != n) throw InvalidInput("spectral_cluster: affinity not square");
    if (K < 1 || K > n) throw InvalidInput("spectral_cluster: need n >= K >= 1");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = affinity.row(i)[j];
            if (!(v >= 0) || std::abs(v - affinity.row(j)[i]) > 1e-9)
                throw InvalidInput("spectral_cluster: affinity must be symmetric nonnegative");
        }
    if (K == 1) return std::vector<int>(n, 0);

    Eigen::MatrixXd L(n, n);
    Eigen::VectorXd dinv(n);
    for (int i = 0; i < n; ++i) {
        double deg = 0;
        for (int j = 0; j < n; ++j) deg += affinity.row(i)[j];
        dinv(i) = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) L(i, j) = dinv(i) * affinity.row(i)[j] * dinv(j);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
    if (solver.info() != Eigen::Success)
        throw NumericError("spectral_cluster: eigen-solver failed on a " + std::to_string(n) +
                           "x" + std::to_string(n) + " normalized affinity");

    // Eigenvalues come back ascending; embed on the K largest.
    DoubleMatrix embed(n, K);
    for (int i = 0; i < n; ++i) {
        double norm = 0;
        for (int c = 0; c < K; ++c) {
            const double v = solver.eigenvectors()(i, n - K + c);
            embed.row(i)[c] = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm > 0)
            for (int c = 0; c < K; ++c) embed.row(i)[c] /= norm;
    }
    return kmeans(embed, K, seed, 50);
}

std::vector<int> spectral_cluster(const DoubleMatrix& points, int K, uint64_t seed) {
    const int n = points.rows;
    if (n < 1) throw InvalidInput("spectral_cluster: no points");
    if (K < 1 || K > n) throw InvalidInput("spectral_cluster: need n >= K >= 1");
    std::vector<double> dists;
    dists.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            dists.push_back(std::sqrt(sq_dist(points.row(i), points.row(j), points.cols)));
    double sigma = dists.empty() ? 1.0 : lower_median(dists);
    if (sigma <= 0) sigma = 1.0;
    DoubleMatrix affinity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double a =
                std::exp(-sq_dist(points.row(i), points.row(j), points.cols) / (2 * sigma * sigma));
            affinity.row(i)[j] = a;
            affinity.row(j)[i] = a;
        }
    return spectral_cluster_affinity(affinity, K, seed);
}

namespace {

int round_mult4(double v) {
    return std::max(8, 4 * static_cast<int>(std::lround(v / 4.0)));
}

int round_up4(int v) { return (v + 3) / 4 * 4; }

SubcategoryWindow derive_window(const WindowPolicy& policy,
                                const std::vector<double>& cluster_aspects) {
    SubcategoryWindow w;
    if (policy.fixed) {
        w.window_w = policy.fixed_w;
        w.window_h = policy.fixed_h;
        w.padded_w = round_up4(std::max(policy.fixed_padded_w, policy.fixed_w));
        w.padded_h = round_up4(std::max(policy.fixed_padded_h, policy.fixed_h));
    } else {
        const double aspect = lower_median(cluster_aspects);
        w.window_h = round_up4(policy.base_height);
        w.window_w = round_mult4(policy.base_height * aspect);
        w.padded_w = round_up4(w.window_w + 2 * policy.margin);
        w.padded_h = round_up4(w.window_h + 2 * policy.margin);
    }
    w.margin_x = (w.padded_w - w.window_w) / 2;
    w.margin_y = (w.padded_h - w.window_h) / 2;
    return w;
}

}  // namespace

SubcategoryLayout subcategorize(const std::vector<AnnotatedSample>& samples,
                                const SubcatOptions& options, const std::vector<Image8>* crops) {
    const int n = static_cast<int>(samples.size());
    if (n == 0) throw InvalidInput("subcategorize: no samples");
    if (options.K < 1) throw InvalidInput("subcategorize: K must be >= 1");
    if (options.K > n) throw InvalidInput("subcategorize: K exceeds sample count");

    DoubleMatrix space;
    switch (options.space) {
        case SubcatSpace::Geometric:
            space = geometric_features(samples).features;
            break;
        case SubcatSpace::AspectOnly: {
            space = DoubleMatrix(n, 1);
            for (int i = 0; i < n; ++i) space.row(i)[0] = samples[i].aspect_ratio();
            zscore_columns(space);
            break;
        }
        case SubcatSpace::Visual: {
            if (!crops || static_cast<int>(crops->size()) != n)
                throw InvalidInput("subcategorize: visual space needs one crop per sample");
            int mw = 0, mh = 0;
            median_box_size(samples, &mw, &mh);
            space = visual_features(*crops, mw, mh);
            if (space.rows != n) throw DataError("subcategorize: unreadable crops");
            break;
        }
    }

    SubcategoryLayout layout;
    layout.assignments =
        options.K == 1 ? std::vector<int>(n, 0) : spectral_cluster(space, options.K, options.seed);

    // Merge guard: fold clusters below min_cluster into the nearest centroid.
    int k = options.K;
    while (k > 1) {
        std::vector<int> counts(k, 0);
        for (int l : layout.assignments) ++counts[l];
        int victim = -1;
        for (int c = 0; c < k; ++c)
            if (counts[c] < options.min_cluster && (victim < 0 || counts[c] < counts[victim]))
                victim = c;
        if (victim < 0) break;
        DoubleMatrix centroids(k, space.cols);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < space.cols; ++j)
                centroids.row(layout.assignments[i])[j] += space.row(i)[j];
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (int j = 0; j < space.cols; ++j) centroids.row(c)[j] /= counts[c];
        int target = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == victim) continue;
            const double d2 = counts[victim] == 0
                                  ? 0.0
                                  : sq_dist(centroids.row(victim), centroids.row(c), space.cols);
            if (counts[c] > 0 && d2 < best) {
                best = d2;
                target = c;
            }
        }
        if (target < 0) break;
        layout.merged_small = true;
        layout.notes.push_back("merged cluster " + std::to_string(victim) + " (size " +
                               std::to_string(counts[victim]) + ") into cluster " +
                               std::to_string(target));
        for (int& l : layout.assignments) {
            if (l == victim) l = target;
            if (l > victim) --l;
        }
        --k;
    }
    layout.K = k;

    layout.windows.resize(k);
    for (int c = 0; c < k; ++c) {
        std::vector<int> members;
        std::vector<double> aspects;
        for (int i = 0; i < n; ++i)
            if (layout.assignments[i] == c) {
                members.push_back(i);
                aspects.push_back(samples[i].aspect_ratio());
            }
        SubcategoryWindow w = derive_window(options.window, aspects);
        w.size = static_cast<int>(members.size());
        int medoid = members.empty() ? 0 : members[0];
        double best_sum = std::numeric_limits<double>::infinity();
        for (int a : members) {
            double sum = 0;
            for (int b : members) sum += std::sqrt(sq_dist(space.row(a), space.row(b), space.cols));
            if (sum < best_sum) {
                best_sum = sum;
                medoid = a;
            }
        }
        w.medoid = medoid;
        layout.windows[c] = w;
    }
    return layout;
}

std::string cluster_report(const SubcategoryLayout& layout) {
    std::ostringstream out;
    out << "class " << layout.class_name << "\n";
    out << "clusters " << layout.K << "\n";
    out << "merged_small " << (layout.merged_small ? 1 : 0) << "\n";
    for (int c = 0; c < layout.K; ++c) {
        const SubcategoryWindow& w = layout.windows[c];
        out << "cluster " << c << " size " << w.size << " window " << w.window_w << "x"
            << w.window_h << " padded " << w.padded_w << "x" << w.padded_h << " margin "
            << w.margin_x << "x" << w.margin_y << " medoid " << w.medoid << "\n";
    }
    for (const std::string& note : layout.notes) out << "note " << note << "\n";
    return out.str();
}

}  // namespace tsd
