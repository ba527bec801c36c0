#include "ionforce/quadrature.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "ionforce/errors.hpp"

namespace ionforce {

namespace {

using Rule = boost::math::quadrature::gauss<double, 30>;

// Boost's own Kronrod error estimate is orders of magnitude above the true
// error for these integrands, so the estimate here is the change between one
// Gauss panel and its two halves.
double refine(const std::function<double(double)>& f, double a, double b, double whole,
              double tolerance, int depth, int max_depth) {
    const double m = 0.5 * (a + b);
    const double left = Rule::integrate(f, a, m);
    const double right = Rule::integrate(f, m, b);
    if (std::abs(left + right - whole) <= tolerance) return left + right;
    if (depth >= max_depth) {
        throw NumericalError(fmt::format(
            "quadrature: tolerance {:g} not reached on [{:g}, {:g}]", tolerance, a, b));
    }
    return refine(f, a, m, left, 0.5 * tolerance, depth + 1, max_depth) +
           refine(f, m, b, right, 0.5 * tolerance, depth + 1, max_depth);
}

}  // namespace

double integrate_smooth(const std::function<double(double)>& f, double a, double b,
                        const QuadratureOptions& options) {
    if (a == b) return 0.0;
    double l1 = 0.0;
    const double whole = Rule::integrate(f, a, b, &l1);
    return refine(f, a, b, whole, options.relative_tolerance * l1, 0, options.max_depth);
}

}  // namespace ionforce
