#include "ionforce/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "ionforce/errors.hpp"

namespace ionforce {
namespace {

double feasible(double v) {
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

}  // namespace

OptimumND nelder_mead_maximize(const Objective& f, std::vector<double> start,
                               const std::vector<double>& step,
                               const NelderMeadOptions& options) {
    const std::size_t dim = start.size();
    require(dim >= 1 && step.size() == dim, "Nelder-Mead: dimension mismatch");
    std::vector<std::vector<double>> simplex(dim + 1, start);
    std::vector<double> values(dim + 1);
    for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= dim; ++i) values[i] = feasible(f(simplex[i]));

    std::vector<std::size_t> order(dim + 1);
    OptimumND result;
    auto point = [&](const std::vector<double>& centroid, const std::vector<double>& worst,
                     double t) {
        std::vector<double> p(dim);
        for (std::size_t k = 0; k < dim; ++k) p[k] = centroid[k] + t * (worst[k] - centroid[k]);
        return p;
    };

    int it = 0;
    for (; it < options.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[dim - (dim > 0 ? 1 : 0)];
        if (std::isfinite(values[worst]) &&
            std::abs(values[best] - values[worst]) <=
                options.tolerance * (1.0 + std::abs(values[best]))) {
            double extent = 0.0;
            for (std::size_t i = 0; i <= dim; ++i) {
                for (std::size_t k = 0; k < dim; ++k) {
                    extent = std::max(extent, std::abs(simplex[i][k] - simplex[best][k]) /
                                                  std::max(std::abs(step[k]), 1e-300));
                }
            }
            if (extent < 1e-6) {
                result.converged = true;
                break;
            }
        }
        std::vector<double> centroid(dim, 0.0);
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[i][k] / dim;
        }
        const auto reflected = point(centroid, simplex[worst], -1.0);
        const double fr = feasible(f(reflected));
        if (fr > values[best]) {
            const auto expanded = point(centroid, simplex[worst], -2.0);
            const double fe = feasible(f(expanded));
            if (fe > fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr > values[second_worst]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr > values[worst];
        const auto contracted = point(centroid, outside ? reflected : simplex[worst], 0.5);
        const double fc = feasible(f(contracted));
        if (fc > std::max(fr, values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < dim; ++k) {
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            }
            values[i] = feasible(f(simplex[i]));
        }
    }
    const auto best = static_cast<std::size_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    result.iterations = it;
    return result;
}

Optimum1D brent_maximize(const std::function<double(double)>& f, double lower, double upper,
                         int bits) {
    std::uintmax_t iterations = 200;
    const auto [x, neg] = boost::math::tools::brent_find_minima(
        [&](double v) {
            const double fv = f(v);
            return std::isnan(fv) ? std::numeric_limits<double>::infinity() : -fv;
        },
        lower, upper, bits, iterations);
    return {x, -neg, static_cast<int>(iterations)};
}

ProfileBound profile_crossing(const std::function<double(double)>& profile, double best_x,
                              double threshold, double initial_step, double limit,
                              int direction, double x_tolerance) {
    require(initial_step > 0.0, "profile: step must be positive");
    const double span = std::abs(limit - best_x);
    double inside = best_x;
    double step = initial_step;
    double travelled = 0.0;
    for (;;) {
        const double next_travel = std::min(travelled + step, span);
        const double x = best_x + direction * next_travel;
        if (profile(x) < threshold) {
            double lo = inside;  // above threshold
            double hi = x;       // below threshold
            while (std::abs(hi - lo) > x_tolerance * (1.0 + std::abs(best_x))) {
                const double mid = 0.5 * (lo + hi);
                (profile(mid) < threshold ? hi : lo) = mid;
            }
            return {0.5 * (lo + hi), true};
        }
        inside = x;
        travelled = next_travel;
        if (travelled >= span) return {limit, false};
        step *= 1.5;
    }
}

double gradient_norm(const Objective& f, const std::vector<double>& x,
                     const std::vector<double>& scale) {
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double h = 1e-5 * scale[k];
        auto plus = x;
        auto minus = x;
        plus[k] += h;
        minus[k] -= h;
        const double fp = f(plus);
        const double fm = f(minus);
        if (!std::isfinite(fp) || !std::isfinite(fm)) continue;
        const double g = (fp - fm) / (2.0 * h) * scale[k];
        sum += g * g;
    }
    return std::sqrt(sum);
}

}  // namespace ionforce
