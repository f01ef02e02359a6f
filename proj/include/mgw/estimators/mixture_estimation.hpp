#pragma once

// Moment-constrained grid estimator for the MGW distribution.
//
// With beta* = beta / E[X] and lambda* = lambda / E[X], matching the first two
// moments gives
//
//   p alpha beta* + (1 - p) lambda* G1 = 1
//   p alpha (alpha + 1) beta*^2 + (1 - p) lambda*^2 G2 = 1 + CV,
//
// G1 = Gamma(1 + 1/k), G2 = Gamma(1 + 2/k), CV = Var / E^2. Eliminating
// lambda* leaves a quadratic in beta*. For every (p, alpha, k) on a grid laid
// out in skewness space the feasible roots are turned into candidates and the
// candidate with the largest likelihood wins.

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <tuple>
#include <vector>

#include "mgw/estimators/fit.hpp"

namespace mgw {

struct ScalePair {
    double beta_star = 0.0;
    double lambda_star = 0.0;
};

namespace detail {

struct WeibullMomentRatios {
    double g1 = 1.0; // Gamma(1 + 1/k)
    double g2 = 2.0; // Gamma(1 + 2/k)
    double r = 2.0;  // g2 / g1^2

    static WeibullMomentRatios at(double k) {
        WeibullMomentRatios w;
        const double lg1 = log_gamma(1.0 + 1.0 / k);
        const double lg2 = log_gamma(1.0 + 2.0 / k);
        w.g1 = std::exp(lg1);
        w.g2 = std::exp(lg2);
        w.r = std::exp(lg2 - 2.0 * lg1);
        return w;
    }
};

struct Quadratic {
    double a;
    double b;
    double c;
};

inline Quadratic beta_star_quadratic(double p, double alpha, double r, double cv) {
    const double q = 1.0 - p;
    const double pa = p * alpha;
    return {pa * (alpha + 1.0) + pa * pa * r / q, -2.0 * pa * r / q, r / q - 1.0 - cv};
}

// Feasible (beta*, lambda*) pairs in ascending beta*; returns how many were
// written.
inline int beta_star_roots_into(double p, double alpha, const WeibullMomentRatios& w, double cv,
                                std::array<ScalePair, 2>& out) {
    const auto [a, b, c] = beta_star_quadratic(p, alpha, w.r, cv);
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return 0;
    // b < 0 always, so the stable form avoids cancellation in the larger root.
    const double qq = -0.5 * (b - std::sqrt(disc));
    std::array<double, 2> roots{c / qq, qq / a};
    if (roots[0] > roots[1]) std::swap(roots[0], roots[1]);
    const double cap = 1.0 / (p * alpha);
    int count = 0;
    for (int i = 0; i < 2; ++i) {
        if (i == 1 && disc == 0.0) break;
        const double bs = roots[i];
        if (!(bs > 0.0) || !(bs < cap)) continue;
        const double ls = (1.0 - p * alpha * bs) / ((1.0 - p) * w.g1);
        if (!(ls > 0.0)) continue;
        out[count++] = {bs, ls};
    }
    return count;
}

} // namespace detail

/// Number of positive roots of the beta* quadratic predicted by the
/// closed-form CV conditions (one root: CV >= R/(1-p) - 1; two roots: the
/// band below it down to the discriminant bound).
inline int predicted_positive_root_count(double p, double alpha, double k, double cv) {
    const auto w = detail::WeibullMomentRatios::at(k);
    const double q = 1.0 - p;
    const double one_root = w.r / q - 1.0;
    if (cv >= one_root) return 1;
    const double pa = p * alpha;
    const double lead = pa * (alpha + 1.0) + pa * pa * w.r / q;
    const double two_root = w.r / q - (pa * w.r / q) * (pa * w.r / q) / lead - 1.0;
    return cv >= two_root ? 2 : 0;
}

/// Feasible (beta*, lambda*) pairs for an interior weight 0 < p < 1: positive
/// roots of the quadratic with beta* < 1/(p alpha), i.e. lambda* > 0.
inline std::vector<ScalePair> beta_star_roots(double p, double alpha, double k, double cv) {
    if (!(p > 0.0 && p < 1.0) || !(alpha > 0.0) || !(k > 0.0) || !(cv >= 0.0)) {
        throw DomainError("beta_star_roots: need 0 < p < 1, alpha > 0, k > 0, cv >= 0");
    }
    std::array<ScalePair, 2> buf{};
    const int count =
        detail::beta_star_roots_into(p, alpha, detail::WeibullMomentRatios::at(k), cv, buf);
    return {buf.begin(), buf.begin() + count};
}

/// Values of a uniform grid lo, lo + step, ..., hi. When 1/step is an integer
/// the points are formed as (lo*M + i)/M so that e.g. 2.07 is the same double
/// as the literal 2.07.
inline std::vector<double> uniform_grid(double lo, double hi, double step) {
    std::vector<double> out;
    const double inv = 1.0 / step;
    const double m = std::round(inv);
    const bool integral = std::fabs(inv - m) < 1e-9 * m;
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    const double base = std::round(lo * m);
    for (long i = 0; i <= count; ++i) {
        if (integral && std::fabs(lo * m - base) < 1e-9) {
            out.push_back((base + static_cast<double>(i)) / m);
        } else {
            out.push_back(lo + static_cast<double>(i) * step);
        }
    }
    return out;
}

/// Grid axes: p values, Gamma shapes (2/gamma)^2 and Weibull shapes
/// inverted from the same skewness grid.
struct MixtureGrid {
    std::vector<double> p;
    std::vector<double> skew;
    std::vector<double> alpha;
    std::vector<double> k;

    static MixtureGrid build(const MixtureGridSpec& spec) {
        spec.validate();
        MixtureGrid g;
        g.p = uniform_grid(0.0, 1.0, spec.p_step);
        g.skew = uniform_grid(spec.skew_lo, spec.skew_hi, spec.skew_step);
        for (double s : g.skew) {
            g.alpha.push_back(gamma_skewness_to_alpha(s));
            g.k.push_back(weibull_skewness_to_k(s));
        }
        return g;
    }
};

namespace detail {

struct GridCandidate {
    double log_lik = -std::numeric_limits<double>::infinity();
    std::size_t ip = 0, ia = 0, ik = 0;
    int root = 0;
    MgwParams params;
    bool found = false;

    auto key() const { return std::tuple(ip, ia, ik, root); }
};

// Log-likelihood of one grid candidate from per-shape precomputed rows:
// gamma_row[j] = x^(alpha-1)/Gamma(alpha), pow_row[j] = x^k,
// wslope_row[j] = k x^(k-1).
inline double grid_log_likelihood(const WeightedSample& s, const MgwParams& prm,
                                  std::span<const double> gamma_row,
                                  std::span<const double> pow_row,
                                  std::span<const double> wslope_row, const MgwKernel* kernel) {
    const double c1 = prm.p > 0.0 ? prm.p * std::pow(prm.beta, -prm.alpha) : 0.0;
    const double inv_beta = 1.0 / prm.beta;
    const double inv_lk = std::pow(prm.lambda, -prm.k);
    const double c2 = prm.p < 1.0 ? (1.0 - prm.p) * inv_lk : 0.0;
    double ll = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        double f = 0.0;
        if (c1 > 0.0) f += c1 * gamma_row[j] * std::exp(-s.x[j] * inv_beta);
        if (c2 > 0.0) f += c2 * wslope_row[j] * std::exp(-pow_row[j] * inv_lk);
        if (f > 0.0 && std::isfinite(f)) {
            ll += s.count[j] * std::log(f);
        } else {
            ll += s.count[j] * kernel->log_pdf(s.x[j], s.log_x[j]);
        }
    }
    return ll;
}

} // namespace detail

inline Fit mixture_estimate_mgw(std::span<const double> xs, const MixtureGridSpec& spec = {},
                                VarianceDivisor divisor = VarianceDivisor::Unbiased) {
    detail::require_size(xs, 3, "mixture_estimate_mgw");
    const auto sample = detail::WeightedSample::from(xs);
    const double mean = sample.mean();
    const double cv = sample.variance(divisor) / (mean * mean);
    if (cv < 1.0) {
        throw EstimationError(EstimationErrc::CvLessThanOne,
                              "mixture_estimate_mgw: sample CV statistic " + std::to_string(cv) +
                                  " is below one; mean and variance cannot both be matched");
    }
    const auto grid = MixtureGrid::build(spec);
    const std::size_t nu = sample.size();
    const std::size_t na = grid.alpha.size();

    std::vector<detail::WeibullMomentRatios> wk;
    for (double k : grid.k) wk.push_back(detail::WeibullMomentRatios::at(k));

    std::vector<double> gamma_rows(na * nu);
    for (std::size_t ia = 0; ia < na; ++ia) {
        const double a = grid.alpha[ia];
        const double lga = log_gamma(a);
        for (std::size_t j = 0; j < nu; ++j) {
            gamma_rows[ia * nu + j] = std::exp((a - 1.0) * sample.log_x[j] - lga);
        }
    }
    std::vector<double> pow_rows(na * nu);
    std::vector<double> wslope_rows(na * nu);
    for (std::size_t ik = 0; ik < na; ++ik) {
        const double k = grid.k[ik];
        for (std::size_t j = 0; j < nu; ++j) {
            pow_rows[ik * nu + j] = std::exp(k * sample.log_x[j]);
            wslope_rows[ik * nu + j] = k * std::exp((k - 1.0) * sample.log_x[j]);
        }
    }

    detail::GridCandidate best;
    std::size_t evaluated = 0;
    auto consider = [&](std::size_t ip, std::size_t ia, std::size_t ik, int root,
                        const MgwParams& prm) {
        const MgwKernel kernel(prm);
        const double ll = detail::grid_log_likelihood(
            sample, prm, std::span(gamma_rows).subspan(ia * nu, nu),
            std::span(pow_rows).subspan(ik * nu, nu), std::span(wslope_rows).subspan(ik * nu, nu),
            &kernel);
        ++evaluated;
        detail::GridCandidate c{ll, ip, ia, ik, root, prm, true};
        if (!best.found || ll > best.log_lik || (ll == best.log_lik && c.key() < best.key())) {
            best = c;
        }
    };

    // Screen every (p, alpha, k) before touching the data; the screen only
    // depends on the grid and the CV statistic.
    struct Feasible {
        std::size_t ip;
        int count;
        std::array<ScalePair, 2> roots;
    };
    const std::size_t np = grid.p.size();
    std::vector<Feasible> feasible;
    for (std::size_t ia = 0; ia < na; ++ia) {
        for (std::size_t ik = 0; ik < na; ++ik) {
            feasible.clear();
            for (std::size_t ip = 0; ip < np; ++ip) {
                const double p = grid.p[ip];
                Feasible f{ip, 0, {}};
                if (p == 0.0) {
                    // Weibull moment fit: only when this k reproduces the CV.
                    if (ia == 0 && std::fabs(wk[ik].r - 1.0 - cv) <= 1e-9 * (1.0 + cv)) {
                        f.roots[0] = {1.0, 1.0 / wk[ik].g1};
                        f.count = 1;
                    }
                } else if (p == 1.0) {
                    // Gamma moment fit: only when this alpha equals 1/CV.
                    if (ik == 0 && std::fabs(grid.alpha[ia] * cv - 1.0) <= 1e-9) {
                        f.roots[0] = {1.0 / grid.alpha[ia], 1.0};
                        f.count = 1;
                    }
                } else {
                    f.count = detail::beta_star_roots_into(p, grid.alpha[ia], wk[ik], cv, f.roots);
                }
                if (f.count > 0) feasible.push_back(f);
            }
            for (const auto& f : feasible) {
                for (int r = 0; r < f.count; ++r) {
                    const MgwParams prm{grid.p[f.ip], grid.alpha[ia], f.roots[r].beta_star * mean,
                                        grid.k[ik], f.roots[r].lambda_star * mean};
                    consider(f.ip, ia, ik, r, prm);
                }
            }
        }
    }
    if (!best.found) {
        throw EstimationError(EstimationErrc::NoAdmissibleCandidate,
                              "mixture_estimate_mgw: no feasible grid point");
    }

    Fit fit;
    fit.method = Method::MixtureEstimation;
    fit.params = best.params;
    fit.n = xs.size();
    fit.log_lik = log_likelihood(xs, best.params);
    fit.iterations = evaluated;
    fit.converged = true;
    const auto& prm = best.params;
    if (prm.p == 0.0 || prm.p == 1.0) {
        fit.family = prm.p == 1.0 ? Family::Gamma : Family::Weibull;
        fit.lrt_usable = false;
    } else if (prm.alpha == 1.0 && prm.k == 1.0) {
        fit.family = Family::MixedExponential;
        fit.degeneracy = Degeneracy::B3_MixedExp;
    } else if (prm.k == 1.0) {
        fit.family = Family::MGE;
        fit.degeneracy = Degeneracy::B1_MGE;
    } else if (prm.alpha == 1.0) {
        fit.family = Family::MEW;
        fit.degeneracy = Degeneracy::B2_MEW;
    } else {
        fit.family = Family::MGW;
    }
    return fit;
}

} // namespace mgw
