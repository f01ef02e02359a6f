#pragma once

// Maximum likelihood for the full MGW model. For fixed shapes (alpha, k) an
// EM loop settles (p, beta, lambda); the shapes then move along the score
//
//   (alpha, k) += min(eps, 1) * (dl/dalpha, dl/dk)
//   eps = eps0 * |g'g / g'Hg|
//
// with H the (alpha, k) block of the Hessian. Several starting points are
// run and the best admissible end point (converged, physically sensible pdf
// shape) wins.

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mgw/estimators/fit.hpp"

namespace mgw {

/// dl/dp, dl/dalpha, dl/dbeta, dl/dk, dl/dlambda.
using Score = std::array<double, 5>;

namespace detail {

// Everything one sweep over the data yields at a parameter point: the
// log-likelihood, the five score components, the (alpha, k) Hessian block
// and the EM update of (p, beta, lambda) for fixed shapes.
struct MgwPass {
    double log_lik = 0.0;
    Score score{};
    double h_aa = 0.0;
    double h_kk = 0.0;
    double h_ak = 0.0;
    MgwParams next;
};

inline MgwPass mgw_pass(const WeightedSample& s, const MgwParams& prm) {
    const double alpha = prm.alpha;
    const double beta = prm.beta;
    const double k = prm.k;
    const double psi = digamma(alpha);
    const double psi1 = trigamma(alpha);
    const double log_beta = std::log(beta);
    const double log_lambda = std::log(prm.lambda);
    const double inv_beta = 1.0 / beta;
    const double inv_k = 1.0 / k;
    const bool has_gamma = prm.p > 0.0;
    const bool has_weibull = prm.p < 1.0;
    const double log_p = has_gamma ? std::log(prm.p) : 0.0;
    const double log_q = has_weibull ? std::log1p(-prm.p) : 0.0;
    const double gamma_norm = -log_gamma(alpha) - alpha * log_beta;
    const double weibull_norm = std::log(k) - log_lambda;

    MgwPass d;
    double sw = 0.0;
    double swx = 0.0;
    double svrk = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double c = s.count[j];
        const double x = s.x[j];
        const double lx = s.log_x[j];
        const double lr = lx - log_lambda;
        const double rk = std::exp(k * lr);
        const double lg1 = (alpha - 1.0) * lx - x * inv_beta + gamma_norm;
        const double lg2 = weibull_norm + (k - 1.0) * lr - rk;
        double lf, w, g1f, g2f;
        if (!has_weibull) {
            lf = lg1;
            w = 1.0;
            g1f = 1.0;
            g2f = std::exp(lg2 - lg1);
        } else if (!has_gamma) {
            lf = lg2;
            w = 0.0;
            g1f = std::exp(lg1 - lg2);
            g2f = 1.0;
        } else {
            const double a = log_p + lg1;
            const double b = log_q + lg2;
            if (b > a) {
                const double t = std::exp(a - b);
                lf = b + std::log1p(t);
                w = t / (1.0 + t);
            } else {
                const double t = std::exp(b - a);
                lf = a + std::log1p(t);
                w = 1.0 / (1.0 + t);
            }
            g1f = w / prm.p;
            g2f = (1.0 - w) / (1.0 - prm.p);
        }
        const double v_w = 1.0 - w;
        const double u = lx - psi - log_beta;
        const double v = inv_k + lr - rk * lr;

        d.log_lik += c * lf;
        d.score[0] += c * (g1f - g2f);
        d.score[1] += c * w * u;
        d.score[2] += c * w * (x - alpha * beta) * inv_beta * inv_beta;
        d.score[3] += c * v_w * v;
        d.score[4] += c * v_w * (k / prm.lambda) * (rk - 1.0);
        d.h_aa += c * (w * (u * u - psi1) - (w * u) * (w * u));
        d.h_kk += c * (v_w * (v * v - inv_k * inv_k - lr * lr * rk) - (v_w * v) * (v_w * v));
        d.h_ak -= c * w * u * v_w * v;
        sw += c * w;
        swx += c * w * x;
        svrk += c * v_w * rk;
    }
    d.next = prm;
    // Rounding can carry the weight onto 0 or 1, where EM could never move it
    // again even if the score pointed back inside.
    d.next.p = std::clamp(sw / s.n, 1e-12, 1.0 - 1e-12);
    if (sw > 0.0 && swx > 0.0) d.next.beta = swx / (alpha * sw);
    // lambda'^k = mean over the Weibull posterior of x^k = lambda^k * mean((x/lambda)^k)
    if (s.n - sw > 0.0 && svrk > 0.0) {
        d.next.lambda = prm.lambda * std::exp(std::log(svrk / (s.n - sw)) * inv_k);
    }
    return d;
}

} // namespace detail

inline Score mgw_score(std::span<const double> xs, const MgwParams& params) {
    params.validate();
    return detail::mgw_pass(detail::WeightedSample::from(xs), params).score;
}

/// True when the p component of the score may be ignored: p is pinned at a
/// boundary and the score pushes further into it.
inline bool p_score_waived(double p, double dl_dp, double tol) {
    return (dl_dp > 0.0 && p > 1.0 - tol) || (dl_dp < 0.0 && p < tol);
}

struct InnerResult {
    MgwParams params;
    double log_lik = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

inline bool inner_scores_small(const MgwPass& d, double p, const MlConfig& cfg) {
    const bool p_ok =
        std::fabs(d.score[0]) < cfg.score_tol || p_score_waived(p, d.score[0], cfg.p_degeneracy_tol);
    return p_ok && std::fabs(d.score[2]) < cfg.score_tol && std::fabs(d.score[4]) < cfg.score_tol;
}

// Iterates the EM update until the p, beta and lambda score components are
// small. `last` receives the sweep at the returned point.
inline InnerResult mgw_em_inner(const WeightedSample& s, const MgwParams& start, const MlConfig& cfg,
                                std::vector<double>* trace, MgwPass* last = nullptr) {
    InnerResult r;
    MgwParams cur = start;
    MgwPass pass;
    std::size_t it = 0;
    for (;; ++it) {
        pass = mgw_pass(s, cur);
        if (trace) trace->push_back(pass.log_lik);
        if (inner_scores_small(pass, cur.p, cfg)) {
            r.converged = true;
            break;
        }
        if (it == cfg.max_inner_iters) break;
        cur = pass.next;
    }
    r.params = cur;
    r.log_lik = pass.log_lik;
    r.iterations = it;
    if (last) *last = pass;
    return r;
}

} // namespace detail

/// EM over (p, beta, lambda) with alpha and k held at the values in `start`.
/// `trace`, when given, receives the log-likelihood of every visited iterate.
inline InnerResult mgw_em_inner(std::span<const double> xs, const MgwParams& start,
                                const MlConfig& cfg = {}, std::vector<double>* trace = nullptr) {
    cfg.validate();
    start.validate();
    return detail::mgw_em_inner(detail::WeightedSample::from(xs), start, cfg, trace);
}

/// min(eps, 1) with eps = eps0 |g'g / g'Hg|; 1 when the curvature term is
/// negligible relative to g'g.
inline double adaptive_step_factor(const std::array<double, 2>& g,
                                   const std::array<std::array<double, 2>, 2>& h, double eps0,
                                   double cutoff) {
    const double gg = g[0] * g[0] + g[1] * g[1];
    if (gg == 0.0) return 1.0;
    const double ghg = g[0] * (h[0][0] * g[0] + h[0][1] * g[1]) +
                       g[1] * (h[1][0] * g[0] + h[1][1] * g[1]);
    if (std::fabs(ghg) < cutoff * gg) return 1.0;
    return std::min(eps0 * std::fabs(gg / ghg), 1.0);
}

struct GradientStep {
    double alpha = 0.0;
    double k = 0.0;
    double factor = 0.0; // min(eps, 1) before any halving
    int halvings = 0;
    std::array<double, 2> gradient{};
};

namespace detail {

inline GradientStep mgw_gradient_step(const MgwPass& d, const MgwParams& cur,
                                      const MlConfig& cfg) {
    GradientStep st;
    st.gradient = {d.score[1], d.score[3]};
    st.factor = adaptive_step_factor(st.gradient, {{{d.h_aa, d.h_ak}, {d.h_ak, d.h_kk}}},
                                     cfg.eps0, cfg.curvature_cutoff);
    double f = st.factor;
    for (int i = 0;; ++i) {
        st.alpha = cur.alpha + f * st.gradient[0];
        st.k = cur.k + f * st.gradient[1];
        if (st.alpha > 0.0 && st.k > 0.0) break;
        if (i == 60) {
            throw EstimationError(EstimationErrc::StepLeavesDomain,
                                  "mgw_gradient_step: shapes stay non-positive after 60 halvings");
        }
        f *= 0.5;
        ++st.halvings;
    }
    return st;
}

} // namespace detail

inline GradientStep mgw_gradient_step(std::span<const double> xs, const MgwParams& current,
                                      const MlConfig& cfg = {}) {
    cfg.validate();
    current.validate();
    const auto s = detail::WeightedSample::from(xs);
    return detail::mgw_gradient_step(detail::mgw_pass(s, current), current, cfg);
}

/// Weibull shape with the given skewness on the decreasing branch
/// k in (0, 3.6): skewness >= 2 gives k <= 1, smaller skewness k > 1.
inline double weibull_shape_for_skewness(double skewness) {
    if (skewness >= 2.0 - 1e-9) return weibull_skewness_to_k(skewness);
    double lo = 1.0;
    double hi = 3.6;
    if (!(skewness > weibull_skewness(hi))) {
        throw DomainError("weibull_shape_for_skewness: skewness outside (0, 2)");
    }
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

struct PriorFits {
    Fit mixed_exponential;
    Fit gamma;
    Fit weibull;
    std::optional<Fit> mixture; // empty when the sample CV statistic is below one
};

inline std::vector<MgwParams> mgw_initial_sets(std::span<const double> xs, const PriorFits& prior) {
    detail::require_size(xs, 1, "mgw_initial_sets");
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());

    std::vector<MgwParams> starts;
    const auto& me = prior.mixed_exponential;
    if (me.degeneracy != Degeneracy::A_MixedExpToExp) {
        const auto& q = me.params;
        starts.push_back({q.p, 1.0, q.beta, 1.0, q.lambda});
        starts.push_back({1.0 - q.p, 1.0, q.lambda, 1.0, q.beta});
    }
    starts.push_back({0.5, prior.gamma.params.alpha, prior.gamma.params.beta,
                      prior.weibull.params.k, prior.weibull.params.lambda});
    if (prior.mixture) starts.push_back(prior.mixture->params);
    constexpr std::array<double, 3> skews{1.5, 2.0, 2.5};
    for (double ga : skews) {
        for (double gk : skews) {
            if (ga == 2.0 && gk == 2.0) continue;
            const double alpha = gamma_skewness_to_alpha(ga);
            const double k = weibull_shape_for_skewness(gk);
            starts.push_back({0.5, alpha, mean / alpha, k, mean / std::exp(log_gamma(1.0 + 1.0 / k))});
        }
    }
    return starts;
}

enum class StartStatus { Converged, Pruned, MaxIters, StepFailed, ShapeRejected, TimedOut };

inline std::string_view to_string(StartStatus s) {
    switch (s) {
    case StartStatus::Converged: return "Converged";
    case StartStatus::Pruned: return "Pruned";
    case StartStatus::MaxIters: return "MaxIters";
    case StartStatus::StepFailed: return "StepFailed";
    case StartStatus::ShapeRejected: return "ShapeRejected";
    case StartStatus::TimedOut: return "TimedOut";
    }
    return "?";
}

struct StartOutcome {
    MgwParams start;
    MgwParams end;
    StartStatus status = StartStatus::MaxIters;
    double log_lik = 0.0;
    Score score{};
    PdfShape shape = PdfShape::Other;
    std::size_t outer_iterations = 0;
    std::size_t inner_iterations = 0;
};

struct MgwMlReport {
    std::vector<StartOutcome> starts;
    std::optional<std::size_t> winner;
};

namespace detail {

inline bool should_prune(const MgwParams& q, const MlConfig& cfg) {
    if (q.alpha > cfg.prune_shape_cap && q.alpha * q.beta * q.beta < cfg.prune_var_floor) {
        return true;
    }
    if (q.k > cfg.prune_shape_cap) {
        const double g1 = std::exp(log_gamma(1.0 + 1.0 / q.k));
        const double g2 = std::exp(log_gamma(1.0 + 2.0 / q.k));
        if (q.lambda * q.lambda * (g2 - g1 * g1) < cfg.prune_var_floor) return true;
    }
    return false;
}

inline bool score_converged(const Score& s, double p, const MlConfig& cfg) {
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!(std::fabs(s[i]) < cfg.score_tol)) return false;
    }
    return std::fabs(s[0]) < cfg.score_tol || p_score_waived(p, s[0], cfg.p_degeneracy_tol);
}

using Deadline = std::optional<std::chrono::steady_clock::time_point>;

inline StartOutcome run_start(const WeightedSample& s, const MgwParams& start, const MlConfig& cfg,
                              Deadline deadline = {}) {
    StartOutcome out;
    out.start = start;
    MgwParams cur = start;
    for (std::size_t m = 0; m < cfg.max_outer_iters; ++m) {
        if (deadline && std::chrono::steady_clock::now() >= *deadline) {
            out.status = StartStatus::TimedOut;
            break;
        }
        MgwPass d;
        const InnerResult inner = mgw_em_inner(s, cur, cfg, nullptr, &d);
        out.inner_iterations += inner.iterations;
        cur = inner.params;
        out.outer_iterations = m + 1;
        if (should_prune(cur, cfg)) {
            out.status = StartStatus::Pruned;
            break;
        }
        out.score = d.score;
        if (inner.converged && score_converged(d.score, cur.p, cfg)) {
            out.status = StartStatus::Converged;
            break;
        }
        try {
            const GradientStep st = mgw_gradient_step(d, cur, cfg);
            cur.alpha = st.alpha;
            cur.k = st.k;
        } catch (const EstimationError&) {
            out.status = StartStatus::StepFailed;
            break;
        }
        if (m + 1 == cfg.max_outer_iters) out.status = StartStatus::MaxIters;
    }
    out.end = cur;
    out.log_lik = s.log_likelihood(cur);
    if (out.status == StartStatus::Converged) {
        out.shape = classify_pdf_shape(cur);
        if (out.shape == PdfShape::Other) out.status = StartStatus::ShapeRejected;
    }
    return out;
}

} // namespace detail

/// Runs every start and reports how each one ended. The winner is the
/// admissible end point with the largest log-likelihood (earliest start on
/// ties).
inline MgwMlReport mgw_ml_report(std::span<const double> xs, const PriorFits& prior,
                                 const MlConfig& cfg = {}) {
    cfg.validate();
    detail::require_size(xs, 5, "fit_mgw_ml");
    const auto sample = detail::WeightedSample::from(xs);
    detail::Deadline deadline;
    if (cfg.time_limit > 0) {
        deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(cfg.time_limit));
    }
    MgwMlReport report;
    for (const auto& start : mgw_initial_sets(xs, prior)) {
        report.starts.push_back(detail::run_start(sample, start, cfg, deadline));
    }
    for (std::size_t i = 0; i < report.starts.size(); ++i) {
        const auto& o = report.starts[i];
        if (o.status != StartStatus::Converged) continue;
        if (!report.winner || o.log_lik > report.starts[*report.winner].log_lik) report.winner = i;
    }
    return report;
}

inline Fit fit_mgw_ml(std::span<const double> xs, const PriorFits& prior, const MlConfig& cfg = {}) {
    const MgwMlReport report = mgw_ml_report(xs, prior, cfg);
    if (!report.winner) {
        throw EstimationError(EstimationErrc::NoAdmissibleCandidate,
                              "fit_mgw_ml: every start was pruned, failed to converge, or ended "
                              "with a pdf that is neither decreasing nor unimodal");
    }
    const auto& best = report.starts[*report.winner];
    Fit fit;
    fit.family = Family::MGW;
    fit.method = Method::ML;
    fit.params = best.end;
    fit.n = xs.size();
    fit.log_lik = log_likelihood(xs, best.end);
    fit.iterations = best.outer_iterations;
    fit.converged = true;
    if (best.end.p < cfg.p_degeneracy_tol || best.end.p > 1.0 - cfg.p_degeneracy_tol) {
        fit.degeneracy = Degeneracy::C_MLToGammaOrWeibull;
    }
    return fit;
}

} // namespace mgw
