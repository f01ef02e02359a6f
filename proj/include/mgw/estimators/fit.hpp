#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mgw/distributions.hpp"
#include "mgw/errors.hpp"

namespace mgw {

enum class Method { ML, MixtureEstimation };

inline std::string_view to_string(Method m) {
    return m == Method::ML ? "ML" : "MixtureEstimation";
}

// Collapse of an estimator onto a nested family. The letters follow the
// footnote codes used in log-likelihood tables (a, b1, b2, b3, c).
enum class Degeneracy {
    None,
    A_MixedExpToExp,      // mixed-exponential ML is the exponential ML
    B1_MGE,               // mixture estimate has k = 1
    B2_MEW,               // mixture estimate has alpha = 1
    B3_MixedExp,          // mixture estimate has alpha = k = 1
    C_MLToGammaOrWeibull, // MGW ML has p at 0 or 1
};

inline std::string_view to_string(Degeneracy d) {
    switch (d) {
    case Degeneracy::None: return "None";
    case Degeneracy::A_MixedExpToExp: return "A_MixedExpToExp";
    case Degeneracy::B1_MGE: return "B1_MGE";
    case Degeneracy::B2_MEW: return "B2_MEW";
    case Degeneracy::B3_MixedExp: return "B3_MixedExp";
    case Degeneracy::C_MLToGammaOrWeibull: return "C_MLToGammaOrWeibull";
    }
    return "?";
}

/// Footnote code: "", "a", "b1", "b2", "b3" or "c".
inline std::string_view footnote_code(Degeneracy d) {
    switch (d) {
    case Degeneracy::None: return "";
    case Degeneracy::A_MixedExpToExp: return "a";
    case Degeneracy::B1_MGE: return "b1";
    case Degeneracy::B2_MEW: return "b2";
    case Degeneracy::B3_MixedExp: return "b3";
    case Degeneracy::C_MLToGammaOrWeibull: return "c";
    }
    return "";
}

struct Fit {
    Family family = Family::MGW;
    Method method = Method::ML;
    MgwParams params;
    double log_lik = 0.0;
    std::size_t n = 0;
    Degeneracy degeneracy = Degeneracy::None;
    std::size_t iterations = 0;
    bool converged = true;
    // False for a mixture estimate whose p sits on {0, 1}: that is a Gamma or
    // Weibull moment fit and has no place in the likelihood-ratio test.
    bool lrt_usable = true;
};

struct MixtureGridSpec {
    double p_step = 0.01;
    double skew_lo = 2.0;
    double skew_hi = 5.0;
    double skew_step = 0.01;

    void validate() const {
        if (!(p_step > 0.0 && p_step <= 1.0) || !(skew_step > 0.0) || !(skew_lo < skew_hi) ||
            skew_lo < 2.0 - 1e-9) {
            throw DomainError("MixtureGridSpec: steps must be positive, lo < hi, lo >= 2");
        }
    }
};

struct MlConfig {
    double score_tol = 1e-3;
    double eps0 = 0.01;
    double p_degeneracy_tol = 1e-4;
    double prune_shape_cap = 25.0;
    double prune_var_floor = 0.01;
    double curvature_cutoff = 1e-12;
    std::size_t max_inner_iters = 10000;
    std::size_t max_outer_iters = 200000;
    double time_limit = 0.0; // wall-clock seconds for one multistart fit; 0 means none

    void validate() const {
        if (!(score_tol > 0 && eps0 > 0 && p_degeneracy_tol > 0 && prune_shape_cap > 0 &&
              prune_var_floor > 0 && curvature_cutoff > 0)) {
            throw DomainError("MlConfig: tolerances must be positive");
        }
        if (!(time_limit >= 0)) throw DomainError("MlConfig: time_limit must be nonnegative");
    }
};

enum class VarianceDivisor { Unbiased, MaximumLikelihood };

namespace detail {

// Sorted distinct sample values with multiplicities. Likelihood sums over a
// weighted sample are exact regroupings of the per-observation sums; rain
// gauge data at 0.1 mm resolution collapse to far fewer distinct values.
struct WeightedSample {
    std::vector<double> x;
    std::vector<double> log_x;
    std::vector<double> count;
    double n = 0.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    double sum_log = 0.0;

    static WeightedSample from(std::span<const double> xs) {
        WeightedSample s;
        std::vector<double> sorted(xs.begin(), xs.end());
        for (double v : sorted) require_amount(v, "sample");
        std::sort(sorted.begin(), sorted.end());
        for (double v : sorted) {
            if (!s.x.empty() && s.x.back() == v) {
                s.count.back() += 1.0;
            } else {
                s.x.push_back(v);
                s.log_x.push_back(std::log(v));
                s.count.push_back(1.0);
            }
        }
        s.n = static_cast<double>(sorted.size());
        for (std::size_t j = 0; j < s.x.size(); ++j) {
            s.sum += s.count[j] * s.x[j];
            s.sum_sq += s.count[j] * s.x[j] * s.x[j];
            s.sum_log += s.count[j] * s.log_x[j];
        }
        return s;
    }

    std::size_t size() const { return x.size(); }
    double mean() const { return sum / n; }

    double variance(VarianceDivisor divisor) const {
        const double m = mean();
        double ss = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) ss += count[j] * (x[j] - m) * (x[j] - m);
        const double denom = divisor == VarianceDivisor::Unbiased ? n - 1.0 : n;
        return denom > 0.0 ? ss / denom : 0.0;
    }

    bool all_equal() const { return x.size() <= 1; }

    double log_likelihood(const MgwParams& params) const {
        const MgwKernel kernel(params);
        double ll = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) ll += count[j] * kernel.log_pdf(x[j], log_x[j]);
        return ll;
    }
};

inline void require_size(std::span<const double> xs, std::size_t min_n, const char* fn) {
    if (xs.size() < min_n) {
        throw EstimationError(EstimationErrc::EmptySample,
                              std::string(fn) + ": need at least " + std::to_string(min_n) +
                                  " observations, got " + std::to_string(xs.size()));
    }
}

} // namespace detail

} // namespace mgw
