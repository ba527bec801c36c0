#pragma once

#include <functional>

namespace ionforce {

struct QuadratureOptions {
    /// Relative to the integral of |f|.
    double relative_tolerance = 1e-12;
    int max_depth = 12;
};

/// Adaptive 30-point Gauss-Legendre quadrature of a smooth integrand: panels
/// are halved until the halves agree with the whole. Throws NumericalError
/// past `max_depth` halvings.
double integrate_smooth(const std::function<double(double)>& f, double a, double b,
                        const QuadratureOptions& options = {});

}  // namespace ionforce
