#include "tsdet/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsdet/errors.hpp"

namespace tsd {

namespace {

// log(1 + exp(z)) without overflow.
inline double log1p_exp(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

// 1 / (1 + exp(z)) evaluated stably.
inline double inv_logit(double z) {
    if (z >= 0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

}  // namespace

CalibrationTargets calibration_targets(const std::vector<int8_t>& labels) {
    CalibrationTargets t;
    for (int8_t y : labels) (y > 0 ? t.n_pos : t.n_neg)++;
    t.t_pos = (t.n_pos + 1.0) / (t.n_pos + 2.0);
    t.t_neg = 1.0 / (t.n_neg + 2.0);
    return t;
}

double platt_objective(double a, double b, const std::vector<double>& scores,
                       const CalibrationTargets& targets, const std::vector<int8_t>& labels) {
    double obj = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const double t = labels[i] > 0 ? targets.t_pos : targets.t_neg;
        const double z = a * scores[i] + b;
        obj += (t - 1.0) * z + log1p_exp(z);
    }
    return obj;
}

CalibrationParams fit_platt(const std::vector<double>& scores, const std::vector<int8_t>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw InvalidInput("fit_platt: scores/labels size mismatch");
    for (double s : scores)
        if (!std::isfinite(s)) throw InvalidInput("fit_platt: non-finite score");
    const CalibrationTargets targets = calibration_targets(labels);
    if (targets.n_pos == 0 || targets.n_neg == 0)
        throw InvalidInput("fit_platt: need at least one sample of each label");

    // Lin et al.'s Newton iteration on the reformulated objective.
    double a = 0.0;
    double b = std::log((targets.n_neg + 1.0) / (targets.n_pos + 1.0));
    double obj = platt_objective(a, b, scores, targets, labels);
    const int max_iter = 200;
    const double grad_tol = 1e-10;
    const double sigma_reg = 1e-12;

    for (int iter = 0; iter < max_iter; ++iter) {
        double g_a = 0, g_b = 0, h_aa = sigma_reg, h_ab = 0, h_bb = sigma_reg;
        for (size_t i = 0; i < scores.size(); ++i) {
            const double t = labels[i] > 0 ? targets.t_pos : targets.t_neg;
            const double z = a * scores[i] + b;
            const double p = 1.0 - inv_logit(z);  // exp(z)/(1+exp(z))
            const double d1 = p - (1.0 - t);
            const double d2 = p * (1.0 - p);
            g_a += scores[i] * d1;
            g_b += d1;
            h_aa += scores[i] * scores[i] * d2;
            h_ab += scores[i] * d2;
            h_bb += d2;
        }
        if (std::fabs(g_a) < grad_tol && std::fabs(g_b) < grad_tol) break;
        const double det = h_aa * h_bb - h_ab * h_ab;
        double da = -(h_bb * g_a - h_ab * g_b) / det;
        double db = -(-h_ab * g_a + h_aa * g_b) / det;
        // Backtracking line search; the Newton direction is a descent
        // direction since the Hessian is positive definite.
        double step = 1.0;
        const double slope = g_a * da + g_b * db;
        bool accepted = false;
        while (step >= 1e-10) {
            const double cand = platt_objective(a + step * da, b + step * db, scores, targets, labels);
            if (cand <= obj + 1e-4 * step * slope) {
                a += step * da;
                b += step * db;
                obj = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    CalibrationParams out;
    out.a = a;
    out.b = b;
    out.increasing = a < 0;
    return out;
}

double calibrate_score(const CalibrationParams& p, double s) {
    const double g = inv_logit(p.a * s + p.b);
    const double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    return std::min(std::max(g, lo), hi);
}

}  // namespace tsd
