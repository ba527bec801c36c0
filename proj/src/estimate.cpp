#include "ionforce/estimate.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <fmt/format.h>

#include "ionforce/constants.hpp"
#include "ionforce/lockin.hpp"
#include "ionforce/optimize.hpp"
#include "ionforce/parallel.hpp"

namespace ionforce {

namespace {

constexpr double kMinusInf = -std::numeric_limits<double>::infinity();

// Wrap to [-pi, pi]; cheaper than wrap_phase and fine for squared residuals.
double fast_wrap(double x) {
    return x - kTwoPi * std::nearbyint(x / kTwoPi);
}

// sigma ~ 1/sqrt(-f'') by central differences; `fallback` if not concave there.
double curvature_sigma(const std::function<double(double)>& f, double x, double h,
                       double fallback) {
    const double f0 = f(x);
    const double fp = f(x + h);
    const double fm = f(x - h);
    const double second = (fp - 2.0 * f0 + fm) / (h * h);
    if (!std::isfinite(second) || second >= 0.0) return fallback;
    return 1.0 / std::sqrt(-second);
}

// Fringe log-likelihood with precomputed analysis-phase trigonometry.
class FringeLikelihood {
public:
    explicit FringeLikelihood(const FringeRecord& r) {
        const std::size_t k = r.phases_rad.size();
        cos_.resize(k);
        sin_.resize(k);
        d_.resize(k);
        rest_.resize(k);
        for (std::size_t i = 0; i < k; ++i) {
            cos_[i] = std::cos(r.phases_rad[i]);
            sin_[i] = std::sin(r.phases_rad[i]);
            d_[i] = r.d_counts[i];
            rest_[i] = r.shots_per_phase - r.d_counts[i];
        }
    }

    double operator()(double contrast, double phase) const {
        const double cp = std::cos(phase);
        const double sp = std::sin(phase);
        double ll = 0.0;
        for (std::size_t i = 0; i < cos_.size(); ++i) {
            const double half = 0.5 * contrast * (cos_[i] * cp + sin_[i] * sp);
            const double p = 0.5 + half;
            const double q = 0.5 - half;
            if (d_[i] > 0) {
                if (p <= 0.0) return kMinusInf;
                ll += d_[i] * std::log(p);
            }
            if (rest_[i] > 0) {
                if (q <= 0.0) return kMinusInf;
                ll += rest_[i] * std::log(q);
            }
        }
        return ll;
    }

    double total_shots() const {
        double n = 0.0;
        for (std::size_t i = 0; i < d_.size(); ++i) n += d_[i] + rest_[i];
        return n;
    }

private:
    std::vector<double> cos_, sin_, d_, rest_;
};

ParameterEstimate make_estimate(std::string name, std::string unit, double value, double lower,
                                double upper) {
    lower = std::min(lower, value);
    upper = std::max(upper, value);
    return {std::move(name), std::move(unit), value, lower, upper};
}

}  // namespace

double ParameterEstimate::sigma() const {
    return (upper - lower) / (2.0 * kZ95);
}

bool FitDiagnostics::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

bool FitResult::has(std::string_view name) const {
    return std::any_of(parameters.begin(), parameters.end(),
                       [&](const ParameterEstimate& p) { return p.name == name; });
}

const ParameterEstimate& FitResult::at(std::string_view name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return p;
    }
    throw ValidationError(fmt::format("fit result has no parameter '{}'", name));
}

// --- single fringe -----------------------------------------------------------

double fringe_log_likelihood(const FringeRecord& record, double contrast, double phase) {
    return FringeLikelihood(record)(contrast, phase);
}

FitResult fit_fringe(const FringeRecord& record) {
    record.validate();
    const FringeLikelihood loglik(record);

    if (std::adjacent_find(record.d_counts.begin(), record.d_counts.end(),
                           std::not_equal_to<>()) == record.d_counts.end()) {
        FitResult fallback;
        fallback.model = "fringe";
        fallback.parameters = {make_estimate("contrast", "1", 0.0, 0.0, 1.0),
                               make_estimate("phase", "rad", 0.0, -kPi, kPi)};
        fallback.log_likelihood = loglik(0.0, 0.0);
        fallback.diagnostics.flags = {"degenerate", "phase_unconstrained"};
        throw DegenerateFringeError(
            "fringe: every analysis phase has the same D fraction; contrast is unidentifiable",
            std::move(fallback));
    }

    // Coarse grid over (contrast, phase).
    constexpr int kPhaseGrid = 64;
    constexpr int kContrastGrid = 16;
    double best = kMinusInf;
    double c0 = 0.5;
    double phi0 = 0.0;
    for (int i = 0; i < kPhaseGrid; ++i) {
        const double phi = -kPi + kTwoPi * i / kPhaseGrid;
        for (int j = 0; j < kContrastGrid; ++j) {
            const double c = (j + 0.5) / kContrastGrid;
            const double v = loglik(c, phi);
            if (v > best) {
                best = v;
                c0 = c;
                phi0 = phi;
            }
        }
    }

    const Objective objective = [&](const std::vector<double>& x) {
        if (x[0] < 0.0 || x[0] > 1.0) return kMinusInf;
        return loglik(x[0], x[1]);
    };
    const auto opt = nelder_mead_maximize(objective, {c0, phi0},
                                          {0.5 / kContrastGrid, kTwoPi / kPhaseGrid / 2.0});
    const double c_hat = opt.x[0];
    const double phi_hat = wrap_phase(opt.x[1]);
    const double l_hat = opt.value;
    const double threshold = l_hat - kHalfChi2Level95;
    const double n_total = loglik.total_shots();

    FitResult fit;
    fit.model = "fringe";
    fit.log_likelihood = l_hat;
    fit.diagnostics.iterations = opt.iterations;
    fit.diagnostics.converged = opt.converged;
    fit.diagnostics.gradient_norm = gradient_norm(objective, {c_hat, phi_hat}, {1e-2, 1e-2});

    // Phase interval from the contrast-profiled likelihood.
    const auto phase_profile = [&](double phi) {
        return brent_maximize([&](double c) { return loglik(c, phi); }, 0.0, 1.0, 30).value;
    };
    const double phase_step = 0.5 / (std::max(c_hat, 0.05) * std::sqrt(n_total));
    const auto phi_lo =
        profile_crossing(phase_profile, phi_hat, threshold, phase_step, phi_hat - kPi, -1, 1e-7);
    const auto phi_hi =
        profile_crossing(phase_profile, phi_hat, threshold, phase_step, phi_hat + kPi, +1, 1e-7);
    if (!phi_lo.reached || !phi_hi.reached) fit.diagnostics.flags.emplace_back("phase_unbounded");

    // Contrast interval from the phase-profiled likelihood.
    const auto contrast_profile = [&](double c) {
        return brent_maximize([&](double phi) { return loglik(c, phi); }, phi_hat - 0.5 * kPi,
                              phi_hat + 0.5 * kPi, 30)
            .value;
    };
    const double contrast_step = 0.5 / std::sqrt(n_total);
    const auto c_lo = profile_crossing(contrast_profile, c_hat, threshold, contrast_step, 0.0, -1, 1e-7);
    const auto c_hi = profile_crossing(contrast_profile, c_hat, threshold, contrast_step, 1.0, +1, 1e-7);
    if (!c_lo.reached) fit.diagnostics.flags.emplace_back("contrast_consistent_with_zero");

    fit.parameters = {make_estimate("contrast", "1", c_hat, c_lo.value, c_hi.value),
                      make_estimate("phase", "rad", phi_hat, phi_lo.value, phi_hi.value)};
    return fit;
}

FitResult fit_fringe_at_phase(const FringeRecord& record, double phase) {
    record.validate();
    const FringeLikelihood loglik(record);
    const auto profile = [&](double c) { return loglik(c, phase); };
    const auto opt = brent_maximize(profile, -1.0, 1.0, 40);
    const double threshold = opt.value - kHalfChi2Level95;
    const double step = 0.5 / std::sqrt(loglik.total_shots());
    const auto lo = profile_crossing(profile, opt.x, threshold, step, -1.0, -1, 1e-7);
    const auto hi = profile_crossing(profile, opt.x, threshold, step, 1.0, +1, 1e-7);

    FitResult fit;
    fit.model = "fringe-fixed-phase";
    fit.log_likelihood = opt.value;
    fit.diagnostics.iterations = opt.iterations;
    fit.diagnostics.converged = true;
    fit.diagnostics.gradient_norm = gradient_norm(
        [&](const std::vector<double>& x) { return profile(x[0]); }, {opt.x}, {1e-2});
    fit.diagnostics.flags = {"phase_fixed"};
    fit.parameters = {make_estimate("contrast", "1", opt.x, lo.value, hi.value),
                      make_estimate("phase", "rad", wrap_phase(phase), wrap_phase(phase),
                                    wrap_phase(phase))};
    return fit;
}

// --- synchronous phase map ---------------------------------------------------

namespace {

struct MapCellData {
    std::size_t record = 0;
    double envelope = 0.0;  // phase per unit amplitude
    double carrier = 0.0;   // 2 pi f n tau + n pi / 2 + xi
    double phase = 0.0;
    double weight = 0.0;    // 1 / sigma
};

double map_loglik(const std::vector<MapCellData>& cells, double amplitude, double xi_offset) {
    double chi2 = 0.0;
    for (const auto& c : cells) {
        const double model = amplitude * c.envelope * std::cos(c.carrier + xi_offset);
        const double r = fast_wrap(c.phase - model) * c.weight;
        chi2 += r * r;
    }
    return -0.5 * chi2;
}

struct GridPeak {
    double value;
    double a;
    double b;
};

// Local maxima of a row-major grid (rows bounded, columns periodic when `wrap_columns`).
std::vector<GridPeak> grid_peaks(const std::vector<double>& score, std::size_t rows,
                                 std::size_t cols, const std::vector<double>& row_values,
                                 const std::vector<double>& col_values, bool wrap_columns,
                                 std::size_t keep) {
    std::vector<GridPeak> peaks;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = score[r * cols + c];
            if (!std::isfinite(v)) continue;
            bool peak = true;
            for (int dr = -1; dr <= 1 && peak; ++dr) {
                for (int dc = -1; dc <= 1 && peak; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const long rr = static_cast<long>(r) + dr;
                    long cc = static_cast<long>(c) + dc;
                    if (rr < 0 || rr >= static_cast<long>(rows)) continue;
                    if (cc < 0 || cc >= static_cast<long>(cols)) {
                        if (!wrap_columns) continue;
                        cc = (cc + static_cast<long>(cols)) % static_cast<long>(cols);
                    }
                    if (score[rr * cols + cc] > v) peak = false;
                }
            }
            if (peak) peaks.push_back({v, row_values[r], col_values[c]});
        }
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const GridPeak& x, const GridPeak& y) { return x.value > y.value; });
    if (peaks.size() > keep) peaks.resize(keep);
    return peaks;
}

}  // namespace

PhaseMapFit fit_phase_map(const ScanResult& scan, double f_m_hz, const PhaseMapOptions& options) {
    scan.validate();
    require(scan.mode == ScanMode::synchronous, "phase map: needs a synchronous scan");
    require(scan.tau_grid_s.size() >= 2 && scan.xi_grid_rad.size() >= 2,
            "phase map: needs at least 2 tau values and 2 xi values");
    require(std::isfinite(f_m_hz) && f_m_hz > 0.0, "phase map: force frequency must be positive");
    require(options.amplitude_max_rad > 0.0, "phase map: amplitude bound must be positive");

    const int n = scan.pulse_count;
    const std::size_t n_tau = scan.tau_grid_s.size();
    const std::size_t n_xi = scan.xi_grid_rad.size();
    std::vector<double> envelope(n_tau);
    std::vector<double> carrier(n_tau);
    double g_max = 0.0;
    for (std::size_t i = 0; i < n_tau; ++i) {
        const double tau = scan.tau_grid_s[i];
        envelope[i] = lockin_envelope(tau, n, f_m_hz, 1.0);
        carrier[i] = kTwoPi * f_m_hz * n * tau + 0.5 * kPi * n;
        g_max = std::max(g_max, std::abs(envelope[i]));
    }
    if (g_max < 1e-9) {
        throw NonIdentifiableError(
            "phase map: every tau sits on a zero of the lock-in phase; amplitude is unidentifiable");
    }

    PhaseMapFit out;
    out.cells.resize(scan.records.size());
    parallel_for(scan.records.size(), options.threads, [&](std::size_t index) {
        PhaseMapCell cell;
        cell.tau_index = index / n_xi;
        cell.xi_index = index % n_xi;
        try {
            const auto fit = fit_fringe(scan.records[index]);
            const auto& phase = fit.at("phase");
            cell.contrast = fit.at("contrast").value;
            cell.phase = phase.value;
            cell.phase_sigma = phase.sigma();
            cell.usable = !fit.diagnostics.has_flag("phase_unbounded") && cell.contrast > 0.0 &&
                          cell.phase_sigma > 0.0;
        } catch (const DegenerateFringeError&) {
            cell.usable = false;
        }
        out.cells[index] = cell;
    });

    std::vector<MapCellData> data;
    for (std::size_t index = 0; index < out.cells.size(); ++index) {
        const auto& cell = out.cells[index];
        if (!cell.usable) continue;
        data.push_back({index, envelope[cell.tau_index],
                        carrier[cell.tau_index] + scan.xi_grid_rad[cell.xi_index], cell.phase,
                        1.0 / cell.phase_sigma});
    }
    if (data.size() < 2) {
        throw NonIdentifiableError("phase map: fewer than 2 cells have a usable fringe phase");
    }

    // Coarse grid: 64 points per 2 pi of the most sensitive cell's phase.
    const double a_max = options.amplitude_max_rad;
    double a_step = kTwoPi / g_max / 64.0;
    std::size_t a_count = static_cast<std::size_t>(std::ceil(a_max / a_step)) + 1;
    if (a_count > 8192) {
        a_count = 8192;
        a_step = a_max / (a_count - 1);
    }
    constexpr std::size_t kXiGrid = 64;
    std::vector<double> a_values(a_count);
    std::vector<double> xi_values(kXiGrid);
    for (std::size_t i = 0; i < a_count; ++i) a_values[i] = std::min(a_max, i * a_step);
    for (std::size_t j = 0; j < kXiGrid; ++j) xi_values[j] = kTwoPi * j / kXiGrid;
    std::vector<double> score(a_count * kXiGrid);
    std::vector<double> projected(data.size());
    for (std::size_t j = 0; j < kXiGrid; ++j) {
        for (std::size_t c = 0; c < data.size(); ++c) {
            projected[c] = data[c].envelope * std::cos(data[c].carrier + xi_values[j]);
        }
        for (std::size_t i = 0; i < a_count; ++i) {
            double chi2 = 0.0;
            for (std::size_t c = 0; c < data.size(); ++c) {
                const double r = fast_wrap(data[c].phase - a_values[i] * projected[c]) * data[c].weight;
                chi2 += r * r;
            }
            score[i * kXiGrid + j] = -0.5 * chi2;
        }
    }

    const Objective objective = [&](const std::vector<double>& x) {
        if (x[0] < 0.0 || x[0] > a_max) return kMinusInf;
        return map_loglik(data, x[0], x[1]);
    };
    OptimumND best;
    best.value = kMinusInf;
    int iterations = 0;
    for (const auto& peak : grid_peaks(score, a_count, kXiGrid, a_values, xi_values, true, 4)) {
        const auto opt = nelder_mead_maximize(objective, {peak.a, peak.b},
                                              {0.5 * a_step, 0.5 * kTwoPi / kXiGrid},
                                              {1e-12, 4000});
        iterations += opt.iterations;
        if (opt.value > best.value) best = opt;
    }
    double a_hat = best.x[0];
    double xi_hat = best.x[1];
    double l_hat = best.value;

    FitResult& fit = out.result;
    fit.model = "phase-map";
    fit.diagnostics.flags.push_back(fmt::format("cells_used={}", data.size()));
    if (data.size() < out.cells.size()) {
        fit.diagnostics.flags.push_back(fmt::format("cells_excluded={}", out.cells.size() - data.size()));
    }

    const auto xi_window = [&](double a) {
        return std::clamp(0.5 / (g_max * std::max(a, a_step)), 1e-6, 0.5 * kPi);
    };
    std::function<double(double)> profile_amplitude = [&](double a) {
        const double w = xi_window(a_hat);
        return brent_maximize([&](double x) { return map_loglik(data, a, x); }, xi_hat - w,
                              xi_hat + w, 40)
            .value;
    };
    std::function<double(double)> profile_xi = [&](double x) {
        const double w = std::max(4.0 * a_step, 0.05 * a_hat);
        return brent_maximize([&](double a) { return objective({a, x}); },
                              std::max(0.0, a_hat - w), std::min(a_max, a_hat + w), 40)
            .value;
    };

    // Joint-mode state lives here: the profile closures below outlive the branch.
    std::vector<FringeLikelihood> likelihoods;
    std::vector<double> cell_carrier;
    std::vector<double> cell_envelope;
    Objective joint;
    if (options.joint) {
        // Full binomial likelihood of every shot with one shared contrast.
        likelihoods.reserve(scan.records.size());
        for (const auto& r : scan.records) likelihoods.emplace_back(r);
        cell_carrier.resize(scan.records.size());
        cell_envelope.resize(scan.records.size());
        for (std::size_t index = 0; index < scan.records.size(); ++index) {
            cell_envelope[index] = envelope[index / n_xi];
            cell_carrier[index] = carrier[index / n_xi] + scan.xi_grid_rad[index % n_xi];
        }
        joint = [&](const std::vector<double>& x) {
            if (x[0] < 0.0 || x[0] > a_max || x[2] < 0.0 || x[2] > 1.0) return kMinusInf;
            double ll = 0.0;
            for (std::size_t i = 0; i < likelihoods.size(); ++i) {
                ll += likelihoods[i](x[2], x[0] * cell_envelope[i] * std::cos(cell_carrier[i] + x[1]));
            }
            return ll;
        };
        double mean_contrast = 0.0;
        for (const auto& d : data) mean_contrast += out.cells[d.record].contrast;
        mean_contrast /= static_cast<double>(data.size());
        const auto opt = nelder_mead_maximize(joint, {a_hat, xi_hat, mean_contrast},
                                              {1e-3 * a_step, 1e-3, 0.01}, {1e-13, 6000});
        iterations += opt.iterations;
        a_hat = opt.x[0];
        xi_hat = opt.x[1];
        l_hat = opt.value;
        const double c_hat = opt.x[2];
        profile_amplitude = [&, c_hat](double a) {
            return nelder_mead_maximize(
                       [&](const std::vector<double>& y) { return joint({a, y[0], y[1]}); },
                       {xi_hat, c_hat}, {1e-4, 1e-3}, {1e-13, 2000})
                .value;
        };
        profile_xi = [&, c_hat](double x) {
            return nelder_mead_maximize(
                       [&](const std::vector<double>& y) { return joint({y[0], x, y[1]}); },
                       {a_hat, c_hat}, {1e-3 * a_step, 1e-3}, {1e-13, 2000})
                .value;
        };
        fit.diagnostics.flags.emplace_back("joint");
        fit.diagnostics.converged = opt.converged;
        fit.diagnostics.gradient_norm = gradient_norm(joint, opt.x, {1e-3, 1e-3, 1e-2});
        const std::function<double(double)> profile_c = [&](double c) {
            return nelder_mead_maximize(
                       [&](const std::vector<double>& y) { return joint({y[0], y[1], c}); }, {a_hat, xi_hat},
                       {1e-3 * a_step, 1e-3}, {1e-13, 2000})
                .value;
        };
        const double c_threshold = l_hat - kHalfChi2Level95;
        const auto c_lo = profile_crossing(profile_c, c_hat, c_threshold, 1e-3, 0.0, -1, 1e-9);
        const auto c_hi = profile_crossing(profile_c, c_hat, c_threshold, 1e-3, 1.0, +1, 1e-9);
        fit.parameters.push_back(make_estimate("contrast", "1", c_hat, c_lo.value, c_hi.value));
    } else {
        fit.diagnostics.converged = best.converged;
        fit.diagnostics.gradient_norm = gradient_norm(objective, best.x, {1e-3, 1e-3});
    }
    fit.log_likelihood = l_hat;
    fit.diagnostics.iterations = iterations;

    const double threshold = l_hat - kHalfChi2Level95;
    const double a_sigma = curvature_sigma(profile_amplitude, std::max(a_hat, 1e-3 * a_step),
                                           1e-3 * a_step, a_step);
    const double a_step0 = std::max(0.5 * a_sigma, 1e-12);
    const auto a_lo = profile_crossing(profile_amplitude, a_hat, threshold, a_step0, 0.0, -1, 1e-10);
    const auto a_hi = profile_crossing(profile_amplitude, a_hat, threshold, a_step0, a_max, +1, 1e-10);
    if (!a_lo.reached) fit.diagnostics.flags.emplace_back("amplitude_consistent_with_zero");
    if (!a_hi.reached) fit.diagnostics.flags.emplace_back("amplitude_at_search_bound");

    const double xi_sigma = curvature_sigma(profile_xi, xi_hat, 1e-5, 0.1);
    const double xi_step0 = std::max(0.5 * xi_sigma, 1e-12);
    const auto x_lo = profile_crossing(profile_xi, xi_hat, threshold, xi_step0, xi_hat - kPi, -1, 1e-10);
    const auto x_hi = profile_crossing(profile_xi, xi_hat, threshold, xi_step0, xi_hat + kPi, +1, 1e-10);
    if (!x_lo.reached || !x_hi.reached) fit.diagnostics.flags.emplace_back("xi_offset_unbounded");
    const double xi_wrapped = wrap_phase(xi_hat);
    const double shift = xi_wrapped - xi_hat;

    fit.parameters.insert(fit.parameters.begin(),
                          {make_estimate("amplitude", "rad", a_hat, a_lo.value, a_hi.value),
                           make_estimate("xi_offset", "rad", xi_wrapped, x_lo.value + shift,
                                         x_hi.value + shift)});
    if (options.trap) {
        const auto& trap = *options.trap;
        const double x0 = amplitude_from_phase(a_hat, trap);
        const double x0_lo = amplitude_from_phase(a_lo.value, trap);
        const double x0_hi = amplitude_from_phase(a_hi.value, trap);
        fit.parameters.push_back(make_estimate("x0", "m", x0, x0_lo, x0_hi));
        fit.parameters.push_back(make_estimate("force", "N", force_from_amplitude(x0, f_m_hz, trap),
                                               force_from_amplitude(x0_lo, f_m_hz, trap),
                                               force_from_amplitude(x0_hi, f_m_hz, trap)));
    }

    out.model_phase.resize(scan.records.size());
    for (std::size_t index = 0; index < scan.records.size(); ++index) {
        const std::size_t i = index / n_xi;
        out.model_phase[index] = wrap_phase(
            a_hat * envelope[i] * std::cos(carrier[i] + scan.xi_grid_rad[index % n_xi] + xi_hat));
    }
    return out;
}

double phase_map_amplitude_crlb(const PhaseMapDesign& design, double f_m_hz, double amplitude_rad,
                                double xi_offset_rad) {
    require(design.phases_rad.size() >= 3, "crlb: needs at least 3 analysis phases");
    require(design.contrast > 0.0 && design.contrast < 1.0,
            "crlb: contrast must lie strictly inside (0, 1)");
    const int n = design.pulse_count;
    double i_aa = 0.0;
    double i_ax = 0.0;
    double i_xx = 0.0;
    for (double tau : design.tau_grid_s) {
        const double env = lockin_envelope(tau, n, f_m_hz, 1.0);
        const double carrier = kTwoPi * f_m_hz * n * tau + 0.5 * kPi * n;
        for (double xi : design.xi_grid_rad) {
            const double arg = carrier + xi + xi_offset_rad;
            const double phase = amplitude_rad * env * std::cos(arg);
            // Per-cell Fisher information on (phase, contrast).
            double i_pp = 0.0;
            double i_pc = 0.0;
            double i_cc = 0.0;
            for (double phi : design.phases_rad) {
                const double c = std::cos(phi - phase);
                const double s = std::sin(phi - phase);
                const double p = 0.5 + 0.5 * design.contrast * c;
                const double w = design.shots_per_phase / (p * (1.0 - p));
                const double dp_phase = 0.5 * design.contrast * s;
                const double dp_contrast = 0.5 * c;
                i_pp += w * dp_phase * dp_phase;
                i_pc += w * dp_phase * dp_contrast;
                i_cc += w * dp_contrast * dp_contrast;
            }
            const double info = i_pp - i_pc * i_pc / i_cc;
            const double d_amp = env * std::cos(arg);
            const double d_xi = -amplitude_rad * env * std::sin(arg);
            i_aa += info * d_amp * d_amp;
            i_ax += info * d_amp * d_xi;
            i_xx += info * d_xi * d_xi;
        }
    }
    const double det = i_aa * i_xx - i_ax * i_ax;
    if (!(det > 0.0)) throw NonIdentifiableError("crlb: Fisher information is singular");
    return std::sqrt(i_xx / det);
}

// --- asynchronous contrast curve ---------------------------------------------

double contrast_model(double tau_s, int pulse_count, double f_m_hz, double amplitude_rad) {
    return std::cyl_bessel_j(0.0, std::abs(lockin_envelope(tau_s, pulse_count, f_m_hz, amplitude_rad)));
}

namespace {

// Profile log-likelihood of the drive-on / reference contrast ratio at one
// tau, with the reference contrast and fringe phase maximised out. Tabulated
// on a uniform grid and interpolated with a cubic B-spline.
class RatioProfile {
public:
    static constexpr double kLow = -0.45;  // J0 never drops below -0.403
    static constexpr double kHigh = 1.0;
    static constexpr double kStep = 0.005;
    static constexpr int kCount = 291;

    explicit RatioProfile(const std::vector<double>& table)
        : spline_(table.begin(), table.end(), kLow, kStep) {}

    double operator()(double r) const { return spline_(std::clamp(r, kLow, kHigh)); }

private:
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
};

std::vector<double> ratio_table(const FringeRecord& drive, const FringeRecord* reference, double c0,
                                double phi0) {
    const FringeLikelihood ldrv(drive);
    std::vector<double> table(RatioProfile::kCount);
    const auto ratio_at = [](int i) { return RatioProfile::kLow + i * RatioProfile::kStep; };
    if (!reference) {
        for (int i = 0; i < RatioProfile::kCount; ++i) table[i] = ldrv(ratio_at(i), 0.0);
        return table;
    }
    const FringeLikelihood lref(*reference);
    // Walk down from r = 1, warm-starting each maximisation at the previous one.
    std::vector<double> start{c0, phi0};
    const auto solve = [&](int i, std::vector<double>& warm) {
        const double r = ratio_at(i);
        const auto opt = nelder_mead_maximize(
            [&](const std::vector<double>& x) {
                if (x[0] < 0.0 || x[0] > 1.0) return kMinusInf;
                return lref(x[0], x[1]) + ldrv(r * x[0], x[1]);
            },
            warm, {0.01, 0.01}, {1e-12, 2000});
        warm = opt.x;
        table[i] = opt.value;
    };
    for (int i = RatioProfile::kCount - 1; i >= 0; --i) solve(i, start);
    return table;
}

double curve_loglik(const std::vector<RatioProfile>& profiles, const std::vector<double>& taus, int n,
                    double amplitude, double f) {
    double ll = 0.0;
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        ll += profiles[k](contrast_model(taus[k], n, f, amplitude));
    }
    return ll;
}

}  // namespace

ContrastCurveFit fit_contrast_curve(const ScanResult& scan, const ContrastCurveOptions& options) {
    scan.validate();
    require(scan.mode == ScanMode::asynchronous, "contrast curve: needs an asynchronous scan");
    require(scan.tau_grid_s.size() >= 3, "contrast curve: needs at least 3 tau values");
    require(options.frequency_min_hz > 0.0 && options.frequency_max_hz > options.frequency_min_hz,
            "contrast curve: invalid frequency search window");
    require(options.frequency_step_hz > 0.0, "contrast curve: frequency step must be positive");
    require(options.amplitude_max_rad > 0.0, "contrast curve: amplitude bound must be positive");

    const int n = scan.pulse_count;
    const std::size_t n_tau = scan.tau_grid_s.size();
    ContrastCurveFit out;
    out.points.resize(n_tau);
    out.fourier_limit_hz = 1.0 / (2.0 * n * scan.tau_grid_s.back());

    std::vector<std::optional<RatioProfile>> tables(n_tau);
    parallel_for(n_tau, options.threads, [&](std::size_t i) {
        ContrastPoint point;
        point.tau_s = scan.tau_grid_s[i];
        double reference_phase = 0.0;
        try {
            if (scan.paired) {
                const auto ref = fit_fringe(scan.references[i]);
                point.reference_contrast = ref.at("contrast").value;
                point.reference_sigma = ref.at("contrast").sigma();
                reference_phase = ref.at("phase").value;
            }
            // The xi-averaged fringe keeps the reference phase; its contrast
            // changes sign past the first Bessel zero.
            const auto fit = fit_fringe_at_phase(scan.records[i], reference_phase);
            point.contrast = fit.at("contrast").value;
            point.contrast_sigma = fit.at("contrast").sigma();

            const RatioProfile profile(ratio_table(scan.records[i], scan.paired ? &scan.references[i] : nullptr,
                                                   point.reference_contrast, reference_phase));
            const auto best = brent_maximize([&](double r) { return profile(r); }, RatioProfile::kLow,
                                             RatioProfile::kHigh, 40);
            const double threshold = best.value - kHalfChi2Level95;
            const std::function<double(double)> f = [&](double r) { return profile(r); };
            const auto lo = profile_crossing(f, best.x, threshold, RatioProfile::kStep, RatioProfile::kLow, -1, 1e-7);
            const auto hi = profile_crossing(f, best.x, threshold, RatioProfile::kStep, RatioProfile::kHigh, +1, 1e-7);
            point.ratio = best.x;
            point.ratio_sigma = (hi.value - lo.value) / (2.0 * kZ95);
            point.usable = std::isfinite(best.value) && point.reference_contrast > 0.0;
            if (point.usable) tables[i].emplace(profile);
        } catch (const DegenerateFringeError&) {
            point.usable = false;
        }
        out.points[i] = point;
    });

    std::vector<RatioProfile> profiles;
    std::vector<double> taus;
    for (std::size_t i = 0; i < n_tau; ++i) {
        if (!tables[i]) continue;
        profiles.push_back(*tables[i]);
        taus.push_back(out.points[i].tau_s);
    }
    if (profiles.size() < 3) throw NonIdentifiableError("contrast curve: fewer than 3 usable points");

    // Coarse grid: amplitude resolved to 1/16 of a Bessel oscillation at the
    // most sensitive tau, frequency at the configured step.
    const double f_lo = options.frequency_min_hz;
    const double f_hi = options.frequency_max_hz;
    const double f_mid = 0.5 * (f_lo + f_hi);
    double g_max = 0.0;
    for (double t : taus) g_max = std::max(g_max, std::abs(lockin_envelope(t, n, f_mid, 1.0)));
    const double a_max = options.amplitude_max_rad;
    double a_step = kPi / std::max(g_max, 1e-9) / 16.0;
    std::size_t a_count = static_cast<std::size_t>(std::ceil(a_max / a_step)) + 1;
    if (a_count > 4096) {
        a_count = 4096;
        a_step = a_max / (a_count - 1);
    }
    const double f_step = options.frequency_step_hz;
    const auto f_count = static_cast<std::size_t>(std::floor((f_hi - f_lo) / f_step)) + 1;
    std::vector<double> a_values(a_count);
    std::vector<double> f_values(f_count);
    for (std::size_t i = 0; i < a_count; ++i) a_values[i] = std::min(a_max, i * a_step);
    for (std::size_t j = 0; j < f_count; ++j) f_values[j] = std::min(f_hi, f_lo + j * f_step);

    std::vector<double> score(a_count * f_count);
    parallel_for(f_count, options.threads, [&](std::size_t j) {
        std::vector<double> env(taus.size());
        for (std::size_t k = 0; k < taus.size(); ++k) env[k] = lockin_envelope(taus[k], n, f_values[j], 1.0);
        for (std::size_t i = 0; i < a_count; ++i) {
            double ll = 0.0;
            for (std::size_t k = 0; k < taus.size(); ++k) {
                ll += profiles[k](std::cyl_bessel_j(0.0, std::abs(a_values[i] * env[k])));
            }
            score[i * f_count + j] = ll;
        }
    });

    const Objective objective = [&](const std::vector<double>& x) {
        if (x[0] < 0.0 || x[0] > a_max || x[1] < f_lo || x[1] > f_hi) return kMinusInf;
        return curve_loglik(profiles, taus, n, x[0], x[1]);
    };
    int iterations = 0;
    for (const auto& peak : grid_peaks(score, a_count, f_count, a_values, f_values, false, 8)) {
        const auto opt = nelder_mead_maximize(objective, {peak.a, peak.b},
                                              {0.25 * a_step, 0.25 * f_step}, {1e-12, 4000});
        iterations += opt.iterations;
        const bool duplicate = std::any_of(out.modes.begin(), out.modes.end(), [&](const ContrastMode& m) {
            return std::abs(m.amplitude_rad - opt.x[0]) < 0.5 * a_step &&
                   std::abs(m.frequency_hz - opt.x[1]) < 0.5 * f_step;
        });
        if (!duplicate) out.modes.push_back({opt.x[0], opt.x[1], opt.value});
    }
    std::sort(out.modes.begin(), out.modes.end(), [](const ContrastMode& x, const ContrastMode& y) {
        return x.log_likelihood > y.log_likelihood;
    });
    const ContrastMode best = out.modes.front();
    const double a_hat = best.amplitude_rad;
    const double f_hat = best.frequency_hz;
    const double l_hat = best.log_likelihood;
    const double threshold = l_hat - kHalfChi2Level95;

    FitResult& fit = out.result;
    fit.model = "contrast-curve";
    fit.log_likelihood = l_hat;
    fit.diagnostics.iterations = iterations;
    fit.diagnostics.converged = true;
    fit.diagnostics.gradient_norm = gradient_norm(objective, {a_hat, f_hat}, {1e-3, 1e-2});
    fit.diagnostics.flags.push_back(fmt::format("points_used={}", profiles.size()));
    for (std::size_t m = 1; m < out.modes.size(); ++m) {
        if (l_hat - out.modes[m].log_likelihood < 2.0) {
            fit.diagnostics.flags.push_back(fmt::format(
                "multimodal: amplitude={:.6g} rad frequency={:.6g} Hz dlogL={:.3g}",
                out.modes[m].amplitude_rad, out.modes[m].frequency_hz,
                l_hat - out.modes[m].log_likelihood));
        }
    }

    // Amplitude zero removes all frequency dependence.
    const double l_zero = curve_loglik(profiles, taus, n, 0.0, f_hat);
    const bool no_force = l_hat - l_zero < kHalfChi2Level95;

    ParameterEstimate amplitude;
    ParameterEstimate frequency;
    if (no_force) {
        fit.diagnostics.flags.emplace_back("force_not_detected");
        fit.diagnostics.flags.emplace_back("frequency_unidentifiable");
        const auto profile_a = [&](double a) {
            double b = kMinusInf;
            for (double f : f_values) b = std::max(b, curve_loglik(profiles, taus, n, a, f));
            return b;
        };
        const auto a_hi = profile_crossing(profile_a, a_hat, threshold, a_step / 4, a_max, +1, 1e-9);
        amplitude = make_estimate("amplitude", "rad", a_hat, 0.0, a_hi.value);
        frequency = make_estimate("frequency", "Hz", f_hat, f_lo, f_hi);
    } else {
        const double f_window = std::max(4.0 * f_step, 2.0);
        const double a_window = std::max(4.0 * a_step, 0.05 * a_hat);
        const auto profile_f = [&](double f) {
            return brent_maximize([&](double a) { return objective({a, f}); },
                                  std::max(0.0, a_hat - a_window), std::min(a_max, a_hat + a_window), 40)
                .value;
        };
        const auto profile_a = [&](double a) {
            return brent_maximize([&](double f) { return objective({a, f}); },
                                  std::max(f_lo, f_hat - f_window), std::min(f_hi, f_hat + f_window), 40)
                .value;
        };
        const double f_sigma = curvature_sigma(profile_f, f_hat, 1e-3, f_step);
        const double a_sigma = curvature_sigma(profile_a, a_hat, 1e-5, a_step);
        const auto f_lo_b = profile_crossing(profile_f, f_hat, threshold, 0.5 * f_sigma, f_lo, -1, 1e-10);
        const auto f_hi_b = profile_crossing(profile_f, f_hat, threshold, 0.5 * f_sigma, f_hi, +1, 1e-10);
        const auto a_lo_b = profile_crossing(profile_a, a_hat, threshold, 0.5 * a_sigma, 0.0, -1, 1e-10);
        const auto a_hi_b = profile_crossing(profile_a, a_hat, threshold, 0.5 * a_sigma, a_max, +1, 1e-10);
        if (!f_lo_b.reached || !f_hi_b.reached) fit.diagnostics.flags.emplace_back("frequency_at_search_bound");
        amplitude = make_estimate("amplitude", "rad", a_hat, a_lo_b.value, a_hi_b.value);
        frequency = make_estimate("frequency", "Hz", f_hat, f_lo_b.value, f_hi_b.value);
    }
    fit.parameters = {amplitude, frequency};
    if (options.trap) {
        const auto& trap = *options.trap;
        const double x0 = amplitude_from_phase(amplitude.value, trap);
        const double x0_lo = amplitude_from_phase(amplitude.lower, trap);
        const double x0_hi = amplitude_from_phase(amplitude.upper, trap);
        fit.parameters.push_back(make_estimate("x0", "m", x0, x0_lo, x0_hi));
        fit.parameters.push_back(make_estimate("force", "N", force_from_amplitude(x0, f_hat, trap),
                                               force_from_amplitude(x0_lo, f_hat, trap),
                                               force_from_amplitude(x0_hi, f_hat, trap)));
    }
    return out;
}

// --- sensitivity -------------------------------------------------------------

SensitivityReport sensitivity_report(double force_n, double force_sigma_n, double total_time_s) {
    require(std::isfinite(force_sigma_n) && force_sigma_n > 0.0,
            "sensitivity: force uncertainty must be positive");
    require(std::isfinite(total_time_s) && total_time_s > 0.0,
            "sensitivity: total measurement time must be positive");
    return {force_n, force_sigma_n, total_time_s, force_sigma_n * std::sqrt(total_time_s)};
}

SensitivityReport sensitivity_report(const FitResult& fit, const TrapConfig& trap, double f_m_hz,
                                     double total_time_s) {
    if (fit.has("force")) {
        const auto& f = fit.at("force");
        return sensitivity_report(f.value, f.sigma(), total_time_s);
    }
    if (fit.has("x0")) {
        const auto& x = fit.at("x0");
        return sensitivity_report(force_from_amplitude(x.value, f_m_hz, trap),
                                  std::abs(force_from_amplitude(x.sigma(), f_m_hz, trap)),
                                  total_time_s);
    }
    if (fit.has("amplitude")) {
        const auto& a = fit.at("amplitude");
        const double x0 = amplitude_from_phase(a.value, trap);
        const double sx = amplitude_from_phase(a.sigma(), trap);
        return sensitivity_report(force_from_amplitude(x0, f_m_hz, trap),
                                  std::abs(force_from_amplitude(sx, f_m_hz, trap)), total_time_s);
    }
    throw ValidationError("sensitivity: fit carries no force, x0 or amplitude uncertainty");
}

}  // namespace ionforce
