#pragma once

// The mixed Gamma-Weibull (MGW) family and its nested members.
//
//   f(x) = p * Gamma(x | alpha, beta) + (1 - p) * Weibull(x | k, lambda)
//
// Exponential, Gamma, Weibull, mixed exponential, MEW (alpha = 1) and MGE
// (k = 1) are all expressed as masked MgwParams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgw/errors.hpp"
#include "mgw/random.hpp"
#include "mgw/special_functions.hpp"

namespace mgw {

struct MgwParams {
    double p = 1.0;      // weight of the Gamma component
    double alpha = 1.0;  // Gamma shape
    double beta = 1.0;   // Gamma scale (mm)
    double k = 1.0;      // Weibull shape
    double lambda = 1.0; // Weibull scale (mm)

    static MgwParams exponential(double scale) { return {1.0, 1.0, scale, 1.0, scale}; }
    static MgwParams gamma(double shape, double scale) { return {1.0, shape, scale, 1.0, scale}; }
    static MgwParams weibull(double shape, double scale) { return {0.0, 1.0, scale, shape, scale}; }
    static MgwParams mixed_exponential(double weight, double scale1, double scale2) {
        return {weight, 1.0, scale1, 1.0, scale2};
    }

    bool valid() const {
        return p >= 0.0 && p <= 1.0 && alpha > 0.0 && beta > 0.0 && k > 0.0 && lambda > 0.0 &&
               std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(k) &&
               std::isfinite(lambda);
    }

    void validate() const {
        if (!valid()) {
            throw DomainError("invalid MGW parameters (p=" + std::to_string(p) +
                              ", alpha=" + std::to_string(alpha) + ", beta=" +
                              std::to_string(beta) + ", k=" + std::to_string(k) +
                              ", lambda=" + std::to_string(lambda) + ")");
        }
    }

    friend bool operator==(const MgwParams&, const MgwParams&) = default;
};

enum class Family { Exponential, Gamma, Weibull, MixedExponential, MGW, MEW, MGE };

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::Exponential: return "Exponential";
    case Family::Gamma: return "Gamma";
    case Family::Weibull: return "Weibull";
    case Family::MixedExponential: return "MixedExponential";
    case Family::MGW: return "MGW";
    case Family::MEW: return "MEW";
    case Family::MGE: return "MGE";
    }
    return "?";
}

/// True when `params` lies in the sub-family (exact comparison of the masked
/// coordinates).
inline bool in_family(Family f, const MgwParams& params) {
    switch (f) {
    case Family::Exponential:
        if (params.p == 1.0) return params.alpha == 1.0;
        if (params.p == 0.0) return params.k == 1.0;
        return params.alpha == 1.0 && params.k == 1.0 && params.beta == params.lambda;
    case Family::Gamma: return params.p == 1.0;
    case Family::Weibull: return params.p == 0.0;
    case Family::MixedExponential: return params.alpha == 1.0 && params.k == 1.0;
    case Family::MEW: return params.alpha == 1.0;
    case Family::MGE: return params.k == 1.0;
    case Family::MGW: return true;
    }
    return false;
}

/// Precomputed per-parameter constants for repeated density evaluation.
class MgwKernel {
public:
    explicit MgwKernel(const MgwParams& params) : params_(params) {
        params.validate();
        log_p_ = params.p > 0.0 ? std::log(params.p) : -std::numeric_limits<double>::infinity();
        log_q_ = params.p < 1.0 ? std::log1p(-params.p) : -std::numeric_limits<double>::infinity();
        gamma_norm_ = -log_gamma(params.alpha) - params.alpha * std::log(params.beta);
        inv_beta_ = 1.0 / params.beta;
        log_lambda_ = std::log(params.lambda);
        weibull_norm_ = std::log(params.k) - log_lambda_;
    }

    const MgwParams& params() const { return params_; }

    double log_gamma_density(double x, double log_x) const {
        return (params_.alpha - 1.0) * log_x - x * inv_beta_ + gamma_norm_;
    }

    double log_weibull_density(double log_x) const {
        const double log_ratio = log_x - log_lambda_;
        return weibull_norm_ + (params_.k - 1.0) * log_ratio - std::exp(params_.k * log_ratio);
    }

    /// log(p g1(x)) and log((1-p) g2(x)).
    std::pair<double, double> weighted_log_components(double x, double log_x) const {
        const double a = params_.p > 0.0 ? log_p_ + log_gamma_density(x, log_x)
                                         : -std::numeric_limits<double>::infinity();
        const double b = params_.p < 1.0 ? log_q_ + log_weibull_density(log_x)
                                         : -std::numeric_limits<double>::infinity();
        return {a, b};
    }

    double log_pdf(double x, double log_x) const {
        const auto [a, b] = weighted_log_components(x, log_x);
        return log_sum_exp(a, b);
    }

    double log_pdf(double x) const { return log_pdf(x, std::log(x)); }

    /// Posterior probability that x belongs to the Gamma component.
    double gamma_posterior(double x, double log_x) const {
        const auto [a, b] = weighted_log_components(x, log_x);
        if (a == -std::numeric_limits<double>::infinity()) return 0.0;
        if (b == -std::numeric_limits<double>::infinity()) return 1.0;
        return 1.0 / (1.0 + std::exp(b - a));
    }

    static double log_sum_exp(double a, double b) {
        if (a < b) std::swap(a, b);
        if (b == -std::numeric_limits<double>::infinity()) return a;
        return a + std::log1p(std::exp(b - a));
    }

private:
    MgwParams params_;
    double log_p_ = 0.0;
    double log_q_ = 0.0;
    double gamma_norm_ = 0.0;
    double inv_beta_ = 0.0;
    double log_lambda_ = 0.0;
    double weibull_norm_ = 0.0;
};

namespace detail {
inline void require_amount(double x, const char* fn) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError(std::string(fn) + ": amounts must be positive, got " + std::to_string(x));
    }
}
} // namespace detail

inline double mgw_pdf(double x, const MgwParams& params) {
    detail::require_amount(x, "mgw_pdf");
    return std::exp(MgwKernel(params).log_pdf(x));
}

inline double gamma_pdf(double x, double alpha, double beta) {
    return mgw_pdf(x, MgwParams::gamma(alpha, beta));
}

inline double weibull_pdf(double x, double k, double lambda) {
    return mgw_pdf(x, MgwParams::weibull(k, lambda));
}

/// Sum of log densities, evaluated through log-sum-exp of the two weighted
/// component log densities.
inline double log_likelihood(std::span<const double> xs, const MgwParams& params) {
    if (xs.empty()) throw DomainError("log_likelihood: empty sample");
    const MgwKernel kernel(params);
    double sum = 0.0;
    for (double x : xs) {
        detail::require_amount(x, "log_likelihood");
        sum += kernel.log_pdf(x);
    }
    return sum;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    // variance / mean^2; this is the squared coefficient of variation.
    double cv_stat = 0.0;
};

inline Moments make_moments(double mean, double variance) {
    return {mean, variance, mean > 0.0 ? variance / (mean * mean) : 0.0};
}

inline Moments mgw_moments(const MgwParams& params) {
    params.validate();
    const auto& [p, alpha, beta, k, lambda] = params;
    const double g1 = std::exp(log_gamma(1.0 + 1.0 / k));
    const double g2 = std::exp(log_gamma(1.0 + 2.0 / k));
    const double mean = p * alpha * beta + (1.0 - p) * lambda * g1;
    const double second = p * alpha * (alpha + 1.0) * beta * beta + (1.0 - p) * lambda * lambda * g2;
    return make_moments(mean, second - mean * mean);
}

/// Gamma shape whose skewness 2/sqrt(alpha) equals `skewness`.
inline double gamma_skewness_to_alpha(double skewness) {
    if (!(skewness > 0.0) || !std::isfinite(skewness)) {
        throw DomainError("gamma_skewness_to_alpha: skewness must be positive");
    }
    const double r = 2.0 / skewness;
    return r * r;
}

/// Standardized third central moment of a Weibull(k, .) variate.
inline double weibull_skewness(double k) {
    detail::require_positive(k, "weibull_skewness");
    const double lg1 = log_gamma(1.0 + 1.0 / k);
    const double r2 = std::exp(log_gamma(1.0 + 2.0 / k) - 2.0 * lg1);
    const double r3 = std::exp(log_gamma(1.0 + 3.0 / k) - 3.0 * lg1);
    return (r3 - 3.0 * r2 + 2.0) / std::pow(r2 - 1.0, 1.5);
}

/// Inverse of weibull_skewness on k in (0, 1], i.e. skewness >= 2.
inline double weibull_skewness_to_k(double skewness) {
    constexpr double kExpTol = 1e-9;
    if (!std::isfinite(skewness) || skewness < 2.0 - kExpTol) {
        throw DomainError("weibull_skewness_to_k: skewness must be at least 2");
    }
    if (skewness <= 2.0 + kExpTol) return 1.0;
    constexpr double kMinShape = 0.02;
    double lo = 0.5;
    while (weibull_skewness(lo) < skewness) {
        lo *= 0.5;
        if (lo < kMinShape) {
            throw DomainError("weibull_skewness_to_k: skewness beyond invertible range");
        }
    }
    double hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (weibull_skewness(mid) > skewness) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

enum class PdfShape { MonotoneDecreasing, Unimodal, Other };

inline std::string_view to_string(PdfShape s) {
    switch (s) {
    case PdfShape::MonotoneDecreasing: return "MonotoneDecreasing";
    case PdfShape::Unimodal: return "Unimodal";
    case PdfShape::Other: return "Other";
    }
    return "?";
}

inline double weibull_quantile(double u, double k, double lambda) {
    return lambda * std::pow(-std::log1p(-u), 1.0 / k);
}

inline double gamma_quantile(double u, double alpha, double beta) {
    return beta * gamma_p_inverse(alpha, u);
}

/// d/dx log f(x), written in terms of the Gamma posterior weight.
inline double mgw_log_pdf_slope(const MgwKernel& kernel, double x) {
    const auto& prm = kernel.params();
    const double log_x = std::log(x);
    const double w = kernel.gamma_posterior(x, log_x);
    const double gamma_slope = (prm.alpha - 1.0) / x - 1.0 / prm.beta;
    const double weibull_slope =
        (prm.k - 1.0) / x - (prm.k / x) * std::exp(prm.k * (log_x - std::log(prm.lambda)));
    return w * gamma_slope + (1.0 - w) * weibull_slope;
}

struct ShapeGrid {
    int points = 2048;
    double tail = 1e-6;
    double zero_tol = 1e-10;
};

/// Evaluation range [q, Q]: smallest lower and largest upper tail quantile
/// over the components that carry weight.
inline std::pair<double, double> shape_grid_bounds(const MgwParams& params, double tail) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    if (params.p > 0.0) {
        lo = std::min(lo, gamma_quantile(tail, params.alpha, params.beta));
        hi = std::max(hi, gamma_quantile(1.0 - tail, params.alpha, params.beta));
    }
    if (params.p < 1.0) {
        lo = std::min(lo, weibull_quantile(tail, params.k, params.lambda));
        hi = std::max(hi, weibull_quantile(1.0 - tail, params.k, params.lambda));
    }
    lo = std::max(lo, std::numeric_limits<double>::min());
    return {lo, hi};
}

/// Classifies a run-length-compressed sequence of slope signs.
inline PdfShape classify_sign_runs(std::span<const int> signs) {
    std::vector<int> runs;
    for (int s : signs) {
        if (s == 0) continue;
        if (runs.empty() || runs.back() != s) runs.push_back(s);
    }
    if (runs.empty() || (runs.size() == 1 && runs[0] < 0)) return PdfShape::MonotoneDecreasing;
    if (runs.size() == 2 && runs[0] > 0 && runs[1] < 0) return PdfShape::Unimodal;
    return PdfShape::Other;
}

inline PdfShape classify_pdf_shape(const MgwParams& params, const ShapeGrid& grid = {}) {
    const MgwKernel kernel(params);
    const auto [lo, hi] = shape_grid_bounds(params, grid.tail);
    const double log_lo = std::log(lo);
    const double step = (std::log(hi) - log_lo) / (grid.points - 1);
    std::vector<int> signs;
    signs.reserve(grid.points);
    for (int i = 0; i < grid.points; ++i) {
        const double x = std::exp(log_lo + step * i);
        const double slope = mgw_log_pdf_slope(kernel, x);
        signs.push_back(std::fabs(slope) < grid.zero_tol ? 0 : (slope > 0.0 ? 1 : -1));
    }
    return classify_sign_runs(signs);
}

/// Hierarchical draw: Bernoulli(p) picks the component, then the component
/// variate is drawn.
inline std::vector<double> sample_mgw(const MgwParams& params, std::size_t n, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
        const bool from_gamma = rng.uniform() < params.p;
        const double x = from_gamma ? rng.gamma(params.alpha, params.beta)
                                    : rng.weibull(params.k, params.lambda);
        // Extremely small shapes can underflow to zero; redraw to keep support (0, inf).
        if (x > 0.0 && std::isfinite(x)) out.push_back(x);
    }
    return out;
}

} // namespace mgw
