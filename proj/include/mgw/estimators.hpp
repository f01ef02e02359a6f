#pragma once

#include "mgw/estimators/fit.hpp"
#include "mgw/estimators/mgw_ml.hpp"
#include "mgw/estimators/mixed_exponential.hpp"
#include "mgw/estimators/mixture_estimation.hpp"
#include "mgw/estimators/single.hpp"

namespace mgw {

/// Fits every model the MGW multistart draws its starting points from.
inline PriorFits compute_prior_fits(std::span<const double> xs, const MixtureGridSpec& grid = {},
                                    VarianceDivisor divisor = VarianceDivisor::Unbiased) {
    PriorFits prior{fit_mixed_exponential_em(xs), fit_gamma_ml(xs), fit_weibull_ml(xs), std::nullopt};
    try {
        prior.mixture = mixture_estimate_mgw(xs, grid, divisor);
    } catch (const EstimationError& e) {
        if (e.code() != EstimationErrc::CvLessThanOne) throw;
    }
    return prior;
}

} // namespace mgw
