#ifndef TSDET_CALIBRATE_HPP
#define TSDET_CALIBRATE_HPP

#include <cstdint>
#include <vector>

namespace tsd {

// Sigmoid parameters of g(s) = 1 / (1 + exp(a*s + b)). A negative `a`
// makes g increase with s; fit_platt flags the opposite case.
struct CalibrationParams {
    double a = 0.0;
    double b = 0.0;
    bool increasing = true;  // a < 0 after fitting
};

// Smoothed targets t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2).
struct CalibrationTargets {
    int n_pos = 0;
    int n_neg = 0;
    double t_pos = 0;
    double t_neg = 0;
};

CalibrationTargets calibration_targets(const std::vector<int8_t>& labels);

// Minimizes sum[(t_i - 1)(a*s_i + b) + log(1 + exp(a*s_i + b))] by damped
// Newton iterations with overflow-safe log1p terms; converges when the
// gradient infinity-norm drops below 1e-10 or after 200 iterations.
// Throws InvalidInput on single-class input or non-finite scores.
CalibrationParams fit_platt(const std::vector<double>& scores, const std::vector<int8_t>& labels);

// g = 1 / (1 + exp(a*s + b)), strictly inside (0,1) for finite input.
double calibrate_score(const CalibrationParams& p, double s);

// The fitted objective value, exposed for oracle comparisons.
double platt_objective(double a, double b, const std::vector<double>& scores,
                       const CalibrationTargets& targets, const std::vector<int8_t>& labels);

}  // namespace tsd

#endif
