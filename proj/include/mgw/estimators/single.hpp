#pragma once

// Maximum likelihood for the one-component families: exponential (closed
// form), Gamma and Weibull (score equations reduced to one dimension by
// profiling out the scale).

#include <cmath>
#include <functional>
#include <span>

#include "mgw/estimators/fit.hpp"

namespace mgw {

namespace detail {

// Root of a monotone function on (0, inf) by Newton steps safeguarded with a
// bracket. `f` returns {value, derivative}. `increasing` gives the sign of f'.
template <class F>
double monotone_root(F&& f, double lo, double hi, bool increasing, double tol) {
    auto sign_ok_lo = [&](double v) { return increasing ? v < 0.0 : v > 0.0; };
    // Expand the bracket until the function changes sign across it.
    for (int i = 0; i < 60 && !sign_ok_lo(f(lo).first); ++i) lo *= 0.1;
    for (int i = 0; i < 60 && sign_ok_lo(f(hi).first); ++i) hi *= 10.0;
    double x = std::sqrt(lo * hi);
    for (int i = 0; i < 500; ++i) {
        const auto [v, d] = f(x);
        if (std::fabs(v) < tol) return x;
        if (sign_ok_lo(v)) {
            lo = x;
        } else {
            hi = x;
        }
        double next = x - v / d;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        if (hi - lo <= 1e-15 * hi) return next;
        x = next;
    }
    return x;
}

} // namespace detail

inline Fit fit_exponential_ml(std::span<const double> xs) {
    detail::require_size(xs, 1, "fit_exponential_ml");
    double sum = 0.0;
    for (double x : xs) {
        detail::require_amount(x, "fit_exponential_ml");
        sum += x;
    }
    const double n = static_cast<double>(xs.size());
    const double scale = sum / n;
    Fit fit;
    fit.family = Family::Exponential;
    fit.method = Method::ML;
    fit.params = MgwParams::exponential(scale);
    fit.n = xs.size();
    fit.log_lik = log_likelihood(xs, fit.params);
    return fit;
}

/// Root of ln(alpha) - digamma(alpha) = ln(mean) - mean(ln x).
inline double gamma_ml_shape(double log_mean_minus_mean_log) {
    const double s = log_mean_minus_mean_log;
    return detail::monotone_root(
        [s](double a) {
            return std::pair{std::log(a) - digamma(a) - s, 1.0 / a - trigamma(a)};
        },
        1e-3, 1e3, /*increasing=*/false, 1e-14);
}

inline Fit fit_gamma_ml(std::span<const double> xs) {
    detail::require_size(xs, 2, "fit_gamma_ml");
    const auto sample = detail::WeightedSample::from(xs);
    if (sample.all_equal()) {
        throw EstimationError(EstimationErrc::NonIdentifiable,
                              "fit_gamma_ml: all observations are equal");
    }
    const double mean = sample.mean();
    const double s = std::log(mean) - sample.sum_log / sample.n;
    const double alpha = gamma_ml_shape(s);
    Fit fit;
    fit.family = Family::Gamma;
    fit.method = Method::ML;
    fit.params = MgwParams::gamma(alpha, mean / alpha);
    fit.n = xs.size();
    fit.log_lik = log_likelihood(xs, fit.params);
    return fit;
}

namespace detail {

// Profile score of the Weibull shape: E_w[ln x] - 1/k - mean(ln x) with
// weights proportional to x^k, plus its derivative Var_w[ln x] + 1/k^2.
inline std::pair<double, double> weibull_profile_score(const WeightedSample& s, double k) {
    const double log_max = s.log_x.back();
    double wsum = 0.0;
    double wl = 0.0;
    double wl2 = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double w = s.count[j] * std::exp(k * (s.log_x[j] - log_max));
        const double l = s.log_x[j] - log_max;
        wsum += w;
        wl += w * l;
        wl2 += w * l * l;
    }
    const double mean_l = wl / wsum;
    const double var_l = wl2 / wsum - mean_l * mean_l;
    const double value = (mean_l + log_max) - 1.0 / k - s.sum_log / s.n;
    return {value, var_l + 1.0 / (k * k)};
}

inline double weibull_profile_scale(const WeightedSample& s, double k) {
    const double log_max = s.log_x.back();
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        acc += s.count[j] * std::exp(k * (s.log_x[j] - log_max));
    }
    return std::exp(log_max + std::log(acc / s.n) / k);
}

} // namespace detail

inline Fit fit_weibull_ml(std::span<const double> xs) {
    detail::require_size(xs, 2, "fit_weibull_ml");
    const auto sample = detail::WeightedSample::from(xs);
    if (sample.all_equal()) {
        throw EstimationError(EstimationErrc::NonIdentifiable,
                              "fit_weibull_ml: all observations are equal");
    }
    const double k = detail::monotone_root(
        [&sample](double kk) { return detail::weibull_profile_score(sample, kk); }, 1e-2, 1e2,
        /*increasing=*/true, 1e-13);
    Fit fit;
    fit.family = Family::Weibull;
    fit.method = Method::ML;
    fit.params = MgwParams::weibull(k, detail::weibull_profile_scale(sample, k));
    fit.n = xs.size();
    fit.log_lik = log_likelihood(xs, fit.params);
    return fit;
}

/// Gamma score of (alpha, beta): the two components of the Gamma likelihood
/// equations.
inline std::pair<double, double> gamma_score(std::span<const double> xs, double alpha,
                                             double beta) {
    const double n = static_cast<double>(xs.size());
    double sum = 0.0;
    double sum_log = 0.0;
    for (double x : xs) {
        sum += x;
        sum_log += std::log(x);
    }
    return {-n * digamma(alpha) - n * std::log(beta) + sum_log,
            -n * alpha / beta + sum / (beta * beta)};
}

/// Weibull score of (k, lambda).
inline std::pair<double, double> weibull_score(std::span<const double> xs, double k,
                                               double lambda) {
    const double n = static_cast<double>(xs.size());
    double dk = n / k - n * std::log(lambda);
    double sum_pow = 0.0;
    for (double x : xs) {
        const double r = x / lambda;
        const double rk = std::pow(r, k);
        dk += std::log(x) - rk * std::log(r);
        sum_pow += rk;
    }
    return {dk, (k / lambda) * sum_pow - n * k / lambda};
}

} // namespace mgw
