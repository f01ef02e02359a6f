#pragma once

// Likelihood-ratio tests of every candidate against the MGW ML fit, with the
// AIC used wherever the chi-square approximation does not apply.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgw/estimators/fit.hpp"
#include "mgw/special_functions.hpp"

namespace mgw {

// Declaration order is the tie-break order of the selection rules.
enum class Candidate { ExponentialMl, GammaMl, WeibullMl, MixedExponentialMl, MgwMixture, MgwMl };

inline constexpr std::array<Candidate, 5> kTestedCandidates{
    Candidate::ExponentialMl, Candidate::GammaMl, Candidate::WeibullMl,
    Candidate::MixedExponentialMl, Candidate::MgwMixture};

inline std::string_view to_string(Candidate c) {
    switch (c) {
    case Candidate::ExponentialMl: return "ExponentialMl";
    case Candidate::GammaMl: return "GammaMl";
    case Candidate::WeibullMl: return "WeibullMl";
    case Candidate::MixedExponentialMl: return "MixedExponentialMl";
    case Candidate::MgwMixture: return "MgwMixture";
    case Candidate::MgwMl: return "MgwMl";
    }
    return "?";
}

inline std::optional<Candidate> candidate_from_string(std::string_view s) {
    for (auto c : {Candidate::ExponentialMl, Candidate::GammaMl, Candidate::WeibullMl,
                   Candidate::MixedExponentialMl, Candidate::MgwMixture, Candidate::MgwMl}) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

/// Which slot a fit occupies, read off its family and method.
inline Candidate candidate_of(const Fit& fit) {
    if (fit.method == Method::MixtureEstimation) return Candidate::MgwMixture;
    switch (fit.family) {
    case Family::Exponential: return Candidate::ExponentialMl;
    case Family::Gamma: return Candidate::GammaMl;
    case Family::Weibull: return Candidate::WeibullMl;
    case Family::MixedExponential: return Candidate::MixedExponentialMl;
    default: return Candidate::MgwMl;
    }
}

/// Chi-square degrees of freedom against the MGW ML fit; empty for a mixture
/// estimate that sits on p in {0, 1} and for the MGW ML fit itself.
inline std::optional<int> degrees_of_freedom(const Fit& fit) {
    switch (candidate_of(fit)) {
    case Candidate::ExponentialMl: return 4;
    case Candidate::GammaMl:
    case Candidate::WeibullMl: return 3;
    case Candidate::MixedExponentialMl:
        return fit.degeneracy == Degeneracy::A_MixedExpToExp ? 4 : 2;
    case Candidate::MgwMixture:
        if (!fit.lrt_usable) return std::nullopt;
        switch (fit.degeneracy) {
        case Degeneracy::B1_MGE:
        case Degeneracy::B2_MEW: return 3;
        case Degeneracy::B3_MixedExp: return 4;
        default: return 2;
        }
    case Candidate::MgwMl: return std::nullopt;
    }
    return std::nullopt;
}

/// Free parameters charged by the AIC.
inline int free_parameters(const Fit& fit) {
    switch (candidate_of(fit)) {
    case Candidate::ExponentialMl: return 1;
    case Candidate::GammaMl:
    case Candidate::WeibullMl: return 2;
    case Candidate::MixedExponentialMl:
        return fit.degeneracy == Degeneracy::A_MixedExpToExp ? 1 : 3;
    case Candidate::MgwMixture:
        if (!fit.lrt_usable) return 2;
        return 5 - *degrees_of_freedom(fit);
    case Candidate::MgwMl: return 5;
    }
    return 5;
}

inline double aic(const Fit& fit) {
    return 2.0 * free_parameters(fit) - 2.0 * fit.log_lik;
}

enum class LrtStatus {
    Tested,
    NotApplicable_CandidateExceedsMgw,
    NotApplicable_MgwDegenerate,
    NotApplicable_CvLessThanOne,
    NotApplicable_MixtureAtBoundary,
    NotAvailable, // the candidate could not be fitted
};

inline std::string_view to_string(LrtStatus s) {
    switch (s) {
    case LrtStatus::Tested: return "Tested";
    case LrtStatus::NotApplicable_CandidateExceedsMgw: return "NotApplicable_CandidateExceedsMgw";
    case LrtStatus::NotApplicable_MgwDegenerate: return "NotApplicable_MgwDegenerate";
    case LrtStatus::NotApplicable_CvLessThanOne: return "NotApplicable_CvLessThanOne";
    case LrtStatus::NotApplicable_MixtureAtBoundary: return "NotApplicable_MixtureAtBoundary";
    case LrtStatus::NotAvailable: return "NotAvailable";
    }
    return "?";
}

struct LrtVerdict {
    Candidate candidate = Candidate::ExponentialMl;
    LrtStatus status = LrtStatus::Tested;
    double statistic = 0.0;
    int df = 0;
    double p_value = 0.0;
};

inline LrtVerdict lrt(const Fit& candidate, const Fit& mgw_ml) {
    LrtVerdict v;
    v.candidate = candidate_of(candidate);
    const auto df = degrees_of_freedom(candidate);
    if (!df) {
        v.status = LrtStatus::NotApplicable_MixtureAtBoundary;
        return v;
    }
    v.df = *df;
    if (candidate.log_lik > mgw_ml.log_lik) {
        v.status = LrtStatus::NotApplicable_CandidateExceedsMgw;
        return v;
    }
    if (mgw_ml.degeneracy == Degeneracy::C_MLToGammaOrWeibull &&
        v.candidate != Candidate::ExponentialMl) {
        v.status = LrtStatus::NotApplicable_MgwDegenerate;
        return v;
    }
    v.statistic = 2.0 * (mgw_ml.log_lik - candidate.log_lik);
    v.p_value = chi_square_sf(v.statistic, v.df);
    return v;
}

/// The five candidate fits of one sample. An empty slot means the fit failed;
/// `mixture_cv_below_one` marks the mixture slot as empty because the sample
/// CV statistic is below one.
struct CandidateFits {
    std::optional<Fit> exponential;
    std::optional<Fit> gamma;
    std::optional<Fit> weibull;
    std::optional<Fit> mixed_exponential;
    std::optional<Fit> mixture;
    bool mixture_cv_below_one = false;

    const std::optional<Fit>& slot(Candidate c) const {
        switch (c) {
        case Candidate::ExponentialMl: return exponential;
        case Candidate::GammaMl: return gamma;
        case Candidate::WeibullMl: return weibull;
        case Candidate::MixedExponentialMl: return mixed_exponential;
        default: return mixture;
        }
    }
};

enum class SelectionRule { MaxPValue, AllBelow005_MgwMl, AicAmongExceeders, AicAfterMgwDegenerate };

inline std::string_view to_string(SelectionRule r) {
    switch (r) {
    case SelectionRule::MaxPValue: return "MaxPValue";
    case SelectionRule::AllBelow005_MgwMl: return "AllBelow005_MgwMl";
    case SelectionRule::AicAmongExceeders: return "AicAmongExceeders";
    case SelectionRule::AicAfterMgwDegenerate: return "AicAfterMgwDegenerate";
    }
    return "?";
}

struct SelectionOptions {
    double threshold = 0.05;
};

struct SelectionReport {
    std::string site;
    int month = 0;
    Candidate chosen = Candidate::MgwMl;
    Fit fit;
    std::string label;
    SelectionRule rule_used = SelectionRule::MaxPValue;
    std::vector<LrtVerdict> verdicts;
};

/// Table-style name of a selected model, e.g. "MGE (mixture estimation)".
inline std::string model_label(Candidate c, const Fit& fit) {
    switch (c) {
    case Candidate::ExponentialMl: return "Exponential (ML estimation)";
    case Candidate::GammaMl: return "Gamma (ML estimation)";
    case Candidate::WeibullMl: return "Weibull (ML estimation)";
    case Candidate::MixedExponentialMl:
        return fit.degeneracy == Degeneracy::A_MixedExpToExp ? "Exponential (ML estimation)"
                                                             : "Mixed Exponential (ML estimation)";
    case Candidate::MgwMixture:
        if (!fit.lrt_usable) {
            return fit.params.p == 1.0 ? "Gamma (mixture estimation)" : "Weibull (mixture estimation)";
        }
        switch (fit.degeneracy) {
        case Degeneracy::B1_MGE: return "MGE (mixture estimation)";
        case Degeneracy::B2_MEW: return "MEW (mixture estimation)";
        case Degeneracy::B3_MixedExp: return "Mixed Exponential (mixture estimation)";
        default: return "MGW (mixture estimation)";
        }
    case Candidate::MgwMl:
        if (fit.degeneracy == Degeneracy::C_MLToGammaOrWeibull) {
            return fit.params.p > 0.5 ? "Gamma (ML estimation)" : "Weibull (ML estimation)";
        }
        return "MGW (ML estimation)";
    }
    return "?";
}

namespace detail {

// Fewer free parameters first, then declaration order of Candidate.
inline bool simpler(Candidate a, const Fit& fa, Candidate b, const Fit& fb) {
    const int pa = free_parameters(fa);
    const int pb = free_parameters(fb);
    if (pa != pb) return pa < pb;
    return a < b;
}

inline Candidate min_aic(const std::vector<Candidate>& pool, const CandidateFits& fits) {
    Candidate best = pool.front();
    for (Candidate c : pool) {
        const Fit& f = *fits.slot(c);
        const Fit& b = *fits.slot(best);
        if (aic(f) < aic(b) || (aic(f) == aic(b) && simpler(c, f, best, b))) best = c;
    }
    return best;
}

} // namespace detail

inline SelectionReport select_model(const CandidateFits& fits, const Fit& mgw_ml,
                                    const SelectionOptions& options = {}) {
    SelectionReport report;
    for (Candidate c : kTestedCandidates) {
        const auto& slot = fits.slot(c);
        if (slot) {
            report.verdicts.push_back(lrt(*slot, mgw_ml));
        } else {
            LrtVerdict v;
            v.candidate = c;
            v.status = c == Candidate::MgwMixture && fits.mixture_cv_below_one
                           ? LrtStatus::NotApplicable_CvLessThanOne
                           : LrtStatus::NotAvailable;
            report.verdicts.push_back(v);
        }
    }

    auto choose = [&](Candidate c, SelectionRule rule) {
        report.chosen = c;
        report.rule_used = rule;
        report.fit = c == Candidate::MgwMl ? mgw_ml : *fits.slot(c);
        report.label = model_label(c, report.fit);
        return report;
    };

    std::vector<Candidate> exceeders;
    for (Candidate c : kTestedCandidates) {
        if (fits.slot(c) && fits.slot(c)->log_lik > mgw_ml.log_lik) exceeders.push_back(c);
    }
    if (!exceeders.empty()) {
        return choose(detail::min_aic(exceeders, fits), SelectionRule::AicAmongExceeders);
    }

    if (mgw_ml.degeneracy == Degeneracy::C_MLToGammaOrWeibull) {
        std::vector<Candidate> pool;
        const Candidate single = mgw_ml.params.p > 0.5 ? Candidate::GammaMl : Candidate::WeibullMl;
        for (Candidate c : {single, Candidate::MixedExponentialMl, Candidate::MgwMixture}) {
            if (fits.slot(c)) pool.push_back(c);
        }
        if (!pool.empty()) {
            std::sort(pool.begin(), pool.end());
            return choose(detail::min_aic(pool, fits), SelectionRule::AicAfterMgwDegenerate);
        }
    }

    const LrtVerdict* best = nullptr;
    for (const auto& v : report.verdicts) {
        if (v.status != LrtStatus::Tested) continue;
        if (!best || v.p_value > best->p_value ||
            (v.p_value == best->p_value &&
             detail::simpler(v.candidate, *fits.slot(v.candidate), best->candidate,
                             *fits.slot(best->candidate)))) {
            best = &v;
        }
    }
    if (!best || best->p_value < options.threshold) {
        return choose(Candidate::MgwMl, SelectionRule::AllBelow005_MgwMl);
    }
    return choose(best->candidate, SelectionRule::MaxPValue);
}

} // namespace mgw
