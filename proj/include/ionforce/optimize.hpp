#pragma once

// Small derivative-free optimisation toolkit used by the likelihood fits.
// Everything maximises; callers pass log-likelihoods.

#include <functional>
#include <vector>

namespace ionforce {

using Objective = std::function<double(const std::vector<double>&)>;

struct NelderMeadOptions {
    double tolerance = 1e-10;  ///< stop when the simplex value spread drops below this
    int max_iterations = 2000;
};

struct OptimumND {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Nelder-Mead maximisation from `start` with initial simplex edge `step`.
/// Points where the objective is -inf or NaN are treated as infeasible.
OptimumND nelder_mead_maximize(const Objective& f, std::vector<double> start,
                               const std::vector<double>& step,
                               const NelderMeadOptions& options = {});

struct Optimum1D {
    double x = 0.0;
    double value = 0.0;
    int iterations = 0;
};

/// Brent maximisation of a unimodal function on [lower, upper].
Optimum1D brent_maximize(const std::function<double(double)>& f, double lower, double upper,
                         int bits = 40);

struct ProfileBound {
    double value = 0.0;
    /// False when the profile never fell below the threshold before `limit`.
    bool reached = true;
};

/// Walks away from `best_x` in `direction` (+1 or -1) until profile(x) drops
/// below `threshold`, then bisects the crossing. Stops at `limit`.
ProfileBound profile_crossing(const std::function<double(double)>& profile, double best_x,
                              double threshold, double initial_step, double limit,
                              int direction, double x_tolerance = 1e-9);

/// Central-difference gradient norm, used as a convergence diagnostic.
double gradient_norm(const Objective& f, const std::vector<double>& x,
                     const std::vector<double>& scale);

}  // namespace ionforce
