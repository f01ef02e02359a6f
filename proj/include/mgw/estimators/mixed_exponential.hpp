#pragma once

// Two-component exponential mixture fitted by EM.
//
//   posterior  w_i = p e(x_i | beta) / f(x_i)
//   p'      = mean(w)
//   beta'   = sum(w x) / sum(w)
//   lambda' = sum((1 - w) x) / sum(1 - w)
//
// When the single exponential is already the maximizer over all mixtures
// (sample variance <= mean^2 and the mixing gradient is nonpositive
// everywhere), EM only creeps towards beta = lambda at a sublinear rate, so
// that case is recognised directly and reported as degeneracy A.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mgw/estimators/fit.hpp"
#include "mgw/estimators/single.hpp"

namespace mgw {

struct MixedExpStart {
    double p = 0.5;
    double beta = 1.0;
    double lambda = 1.0;
};

struct EmOptions {
    double ll_tol = 1e-10;
    double param_tol = 1e-8;
    std::size_t max_iters = 20000;
    double degeneracy_rel_tol = 1e-6;
};

/// Log-likelihood of each visited iterate and the iterate itself.
struct EmTrace {
    std::vector<double> log_lik;
    std::vector<MgwParams> params;
};

struct EmStepResult {
    double log_lik = 0.0; // log-likelihood of the input iterate
    MgwParams next;
};

namespace detail {

inline EmStepResult mixed_exponential_em_step(const WeightedSample& s, const MgwParams& cur) {
    const double ninf = -std::numeric_limits<double>::infinity();
    const double log_p = cur.p > 0.0 ? std::log(cur.p) : ninf;
    const double log_q = cur.p < 1.0 ? std::log1p(-cur.p) : ninf;
    const double log_b = std::log(cur.beta);
    const double log_l = std::log(cur.lambda);
    double ll = 0.0;
    double sw = 0.0;
    double swx = 0.0;
    double svx = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double a = log_p - log_b - s.x[j] / cur.beta;
        const double b = log_q - log_l - s.x[j] / cur.lambda;
        const double lf = MgwKernel::log_sum_exp(a, b);
        const double w = a == ninf ? 0.0 : std::exp(a - lf);
        ll += s.count[j] * lf;
        sw += s.count[j] * w;
        swx += s.count[j] * w * s.x[j];
        svx += s.count[j] * (1.0 - w) * s.x[j];
    }
    EmStepResult out;
    out.log_lik = ll;
    out.next = cur;
    out.next.p = std::clamp(sw / s.n, 0.0, 1.0);
    if (sw > 0.0) out.next.beta = swx / sw;
    if (s.n - sw > 0.0) out.next.lambda = svx / (s.n - sw);
    return out;
}

/// True when the exponential with scale mean(x) maximizes the likelihood over
/// all two-component exponential mixtures: the mixing gradient
/// D(t) = mean[(m/t) exp(x/m - x/t)] - 1 must be <= 0 for every scale t. The
/// curvature at t = m is checked in closed form (mean((x/m)^2) <= 2); the
/// rest of the range on a log grid.
inline bool exponential_is_mixture_mle(const WeightedSample& s) {
    const double m = s.mean();
    if (s.sum_sq / s.n > 2.0 * m * m) return false;
    constexpr int kPoints = 801;
    const double log_lo = std::log(1e-2);
    const double log_hi = std::log(1e2);
    for (int i = 0; i < kPoints; ++i) {
        const double ratio = std::exp(log_lo + (log_hi - log_lo) * i / (kPoints - 1));
        double acc = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double u = s.x[j] / m;
            acc += s.count[j] * std::exp(u * (1.0 - 1.0 / ratio) - std::log(ratio));
        }
        if (acc / s.n - 1.0 > 1e-12) return false;
    }
    return true;
}

} // namespace detail

/// One EM update from `current` (which must have alpha = k = 1).
inline EmStepResult mixed_exponential_em_step(std::span<const double> xs,
                                              const MgwParams& current) {
    return detail::mixed_exponential_em_step(detail::WeightedSample::from(xs), current);
}

inline Fit fit_mixed_exponential_em(std::span<const double> xs,
                                    std::optional<MixedExpStart> init = std::nullopt,
                                    const EmOptions& options = {}, EmTrace* trace = nullptr) {
    detail::require_size(xs, 3, "fit_mixed_exponential_em");
    const auto sample = detail::WeightedSample::from(xs);
    const double mean = sample.mean();
    const Fit exp_fit = fit_exponential_ml(xs);

    auto degenerate = [&](std::size_t iterations) {
        Fit fit = exp_fit;
        fit.family = Family::MixedExponential;
        fit.degeneracy = Degeneracy::A_MixedExpToExp;
        fit.iterations = iterations;
        return fit;
    };

    const MixedExpStart start = init.value_or(MixedExpStart{0.5, 1.6 * mean, 0.4 * mean});
    MgwParams cur = MgwParams::mixed_exponential(start.p, start.beta, start.lambda);
    cur.validate();

    if (trace == nullptr && detail::exponential_is_mixture_mle(sample)) return degenerate(0);

    double prev_ll = -std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t it = 0;
    for (; it < options.max_iters; ++it) {
        const auto step = detail::mixed_exponential_em_step(sample, cur);
        if (trace) {
            trace->log_lik.push_back(step.log_lik);
            trace->params.push_back(cur);
        }
        const double change = std::max({std::fabs(step.next.p - cur.p),
                                        std::fabs(step.next.beta - cur.beta) / cur.beta,
                                        std::fabs(step.next.lambda - cur.lambda) / cur.lambda});
        const double gain = step.log_lik - prev_ll;
        cur = step.next;
        if (gain < options.ll_tol && change < options.param_tol) {
            converged = true;
            ++it;
            break;
        }
        prev_ll = step.log_lik;
    }

    Fit fit;
    fit.family = Family::MixedExponential;
    fit.method = Method::ML;
    fit.params = cur;
    fit.n = xs.size();
    fit.log_lik = log_likelihood(xs, cur);
    fit.iterations = it;
    fit.converged = converged;

    const double gap = std::fabs(cur.beta - cur.lambda) / std::max(cur.beta, cur.lambda);
    if (gap <= options.degeneracy_rel_tol || fit.log_lik <= exp_fit.log_lik ||
        cur.p == 0.0 || cur.p == 1.0) {
        return degenerate(it);
    }
    return fit;
}

} // namespace mgw
