#pragma once

// Batch fitting of site-month groups, the JSON interchange document, the
// three report tables, and the bypass input that feeds published
// log-likelihoods straight into model selection.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mgw/data_pipeline.hpp"
#include "mgw/estimators.hpp"
#include "mgw/model_selection.hpp"

namespace mgw {

using Json = nlohmann::ordered_json;

inline constexpr std::array<std::string_view, 12> kMonthNames{
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

inline std::string_view month_name(int month) {
    return month >= 1 && month <= 12 ? kMonthNames[month - 1] : "?";
}

/// Accepts 1-12 or a three-letter English abbreviation.
inline std::optional<int> parse_month(std::string_view s) {
    for (int m = 1; m <= 12; ++m) {
        if (kMonthNames[m - 1] == s) return m;
    }
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v >= 1 && v <= 12) return v;
    return std::nullopt;
}

struct RunConfig {
    std::string input;
    std::string output_dir = ".";
    IngestOptions ingest;
    MixtureGridSpec grid;
    MlConfig ml;
    SelectionOptions selection;
    bool write_csv = true;
    bool write_json = true;
    unsigned threads = 1;
    std::uint64_t seed = 1;
};

// --- enum <-> string -------------------------------------------------------

namespace detail {

template <class E, std::size_t N>
std::optional<E> enum_from_string(std::string_view s, const std::array<E, N>& all) {
    for (E e : all) {
        if (to_string(e) == s) return e;
    }
    return std::nullopt;
}

inline constexpr std::array<Family, 7> kFamilies{Family::Exponential, Family::Gamma, Family::Weibull,
                                                 Family::MixedExponential, Family::MGW, Family::MEW,
                                                 Family::MGE};
inline constexpr std::array<Degeneracy, 6> kDegeneracies{
    Degeneracy::None,        Degeneracy::A_MixedExpToExp, Degeneracy::B1_MGE,
    Degeneracy::B2_MEW,      Degeneracy::B3_MixedExp,     Degeneracy::C_MLToGammaOrWeibull};

template <class E>
E require_enum(const std::optional<E>& e, std::string_view what, std::string_view value) {
    if (!e) throw std::invalid_argument("unknown " + std::string(what) + " '" + std::string(value) + "'");
    return *e;
}

} // namespace detail

// --- JSON -------------------------------------------------------------------

inline Json params_to_json(const MgwParams& q) {
    return Json{{"p", q.p}, {"alpha", q.alpha}, {"beta", q.beta}, {"k", q.k}, {"lambda", q.lambda}};
}

inline MgwParams params_from_json(const Json& j) {
    return {j.at("p").get<double>(), j.at("alpha").get<double>(), j.at("beta").get<double>(),
            j.at("k").get<double>(), j.at("lambda").get<double>()};
}

inline Json fit_to_json(const Fit& f) {
    Json j;
    j["family"] = to_string(f.family);
    j["method"] = to_string(f.method);
    j["params"] = params_to_json(f.params);
    j["log_lik"] = f.log_lik;
    j["n"] = f.n;
    j["degeneracy"] = to_string(f.degeneracy);
    j["iterations"] = f.iterations;
    j["converged"] = f.converged;
    j["lrt_usable"] = f.lrt_usable;
    return j;
}

inline Fit fit_from_json(const Json& j) {
    Fit f;
    const auto family = j.at("family").get<std::string>();
    f.family = detail::require_enum(detail::enum_from_string(family, detail::kFamilies), "family", family);
    const auto method = j.at("method").get<std::string>();
    if (method == "ML") {
        f.method = Method::ML;
    } else if (method == "MixtureEstimation") {
        f.method = Method::MixtureEstimation;
    } else {
        throw std::invalid_argument("unknown method '" + method + "'");
    }
    f.params = params_from_json(j.at("params"));
    f.log_lik = j.at("log_lik").get<double>();
    f.n = j.value("n", std::size_t{0});
    const auto deg = j.value("degeneracy", std::string("None"));
    f.degeneracy =
        detail::require_enum(detail::enum_from_string(deg, detail::kDegeneracies), "degeneracy", deg);
    f.iterations = j.value("iterations", std::size_t{0});
    f.converged = j.value("converged", true);
    f.lrt_usable = j.value("lrt_usable", true);
    return f;
}

inline Json verdict_to_json(const LrtVerdict& v) {
    Json j;
    j["candidate"] = to_string(v.candidate);
    j["status"] = to_string(v.status);
    if (v.status == LrtStatus::Tested) {
        j["statistic"] = v.statistic;
        j["df"] = v.df;
        j["p_value"] = v.p_value;
    }
    return j;
}

inline Json selection_to_json(const SelectionReport& r) {
    Json j;
    j["chosen"] = to_string(r.chosen);
    j["label"] = r.label;
    j["rule_used"] = to_string(r.rule_used);
    j["params"] = params_to_json(r.fit.params);
    j["log_lik"] = r.fit.log_lik;
    return j;
}

// --- per-group fitting ------------------------------------------------------

/// Everything computed for one (site, month).
struct GroupResult {
    std::string site;
    int month = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double cv_stat = 0.0;
    bool fittable = true;
    CandidateFits fits;
    std::optional<Fit> mgw_ml;
    std::map<Candidate, std::string> errors; // fits that could not be produced
    std::optional<SelectionReport> selection;
};

inline void run_selection(GroupResult& g, const SelectionOptions& options) {
    if (!g.mgw_ml) return;
    g.selection = select_model(g.fits, *g.mgw_ml, options);
    g.selection->site = g.site;
    g.selection->month = g.month;
}

inline GroupResult fit_group(const SampleSummary& s, const RunConfig& cfg) {
    GroupResult g;
    g.site = s.site;
    g.month = s.month;
    g.n = s.n;
    g.mean = s.mean;
    g.variance = s.variance;
    g.cv_stat = s.cv_stat;
    g.fittable = s.fittable;
    if (!s.fittable) return g;
    const std::span<const double> xs = s.xs;

    auto attempt = [&](Candidate c, auto&& fn) -> std::optional<Fit> {
        try {
            return fn();
        } catch (const EstimationError& e) {
            if (c == Candidate::MgwMixture && e.code() == EstimationErrc::CvLessThanOne) {
                g.fits.mixture_cv_below_one = true;
            } else {
                g.errors[c] = std::string(to_string(e.code())) + ": " + e.what();
            }
        } catch (const std::exception& e) {
            g.errors[c] = e.what();
        }
        return std::nullopt;
    };
    g.fits.exponential = attempt(Candidate::ExponentialMl, [&] { return fit_exponential_ml(xs); });
    g.fits.gamma = attempt(Candidate::GammaMl, [&] { return fit_gamma_ml(xs); });
    g.fits.weibull = attempt(Candidate::WeibullMl, [&] { return fit_weibull_ml(xs); });
    g.fits.mixed_exponential =
        attempt(Candidate::MixedExponentialMl, [&] { return fit_mixed_exponential_em(xs); });
    g.fits.mixture = attempt(Candidate::MgwMixture, [&] {
        return mixture_estimate_mgw(xs, cfg.grid, cfg.ingest.divisor);
    });
    if (g.fits.gamma && g.fits.weibull && g.fits.mixed_exponential) {
        const PriorFits prior{*g.fits.mixed_exponential, *g.fits.gamma, *g.fits.weibull,
                              g.fits.mixture};
        g.mgw_ml = attempt(Candidate::MgwMl, [&] { return fit_mgw_ml(xs, prior, cfg.ml); });
    } else {
        g.errors[Candidate::MgwMl] = "prerequisite fits unavailable";
    }
    run_selection(g, cfg.selection);
    return g;
}

/// Fits every group, using up to `threads` worker threads. Results keep the
/// order of `summaries` regardless of scheduling.
inline std::vector<GroupResult> fit_groups(const std::vector<SampleSummary>& summaries,
                                           const RunConfig& cfg) {
    std::vector<GroupResult> out(summaries.size());
    const unsigned workers =
        std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(summaries.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < summaries.size(); ++i) out[i] = fit_group(summaries[i], cfg);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < summaries.size(); i = next++) {
                out[i] = fit_group(summaries[i], cfg);
            }
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

inline Json config_to_json(const RunConfig& c) {
    Json j;
    j["calibration"] = {{"first", c.ingest.calibration.first.to_string()},
                        {"last", c.ingest.calibration.last.to_string()}};
    j["wet_threshold_mm"] = c.ingest.wet_threshold;
    j["offset_mm"] = c.ingest.offset;
    j["variance_divisor"] = c.ingest.divisor == VarianceDivisor::Unbiased ? "n-1" : "n";
    j["min_fittable"] = c.ingest.min_fittable;
    j["grid"] = {{"p_step", c.grid.p_step},
                 {"skew_lo", c.grid.skew_lo},
                 {"skew_hi", c.grid.skew_hi},
                 {"skew_step", c.grid.skew_step}};
    j["ml"] = {{"score_tol", c.ml.score_tol},
               {"eps0", c.ml.eps0},
               {"p_degeneracy_tol", c.ml.p_degeneracy_tol},
               {"prune_shape_cap", c.ml.prune_shape_cap},
               {"prune_var_floor", c.ml.prune_var_floor},
               {"curvature_cutoff", c.ml.curvature_cutoff},
               {"max_inner_iters", c.ml.max_inner_iters},
               {"max_outer_iters", c.ml.max_outer_iters},
               {"time_limit", c.ml.time_limit}};
    j["selection_threshold"] = c.selection.threshold;
    return j;
}

inline Json group_to_json(const GroupResult& g) {
    Json j;
    j["site"] = g.site;
    j["month"] = g.month;
    j["summary"] = {{"n", g.n}, {"mean", g.mean}, {"variance", g.variance}, {"cv_stat", g.cv_stat}};
    j["fittable"] = g.fittable;
    Json fits = Json::object();
    for (Candidate c : kTestedCandidates) {
        if (const auto& f = g.fits.slot(c)) fits[std::string(to_string(c))] = fit_to_json(*f);
    }
    if (g.mgw_ml) fits[std::string(to_string(Candidate::MgwMl))] = fit_to_json(*g.mgw_ml);
    j["fits"] = fits;
    j["mixture_cv_below_one"] = g.fits.mixture_cv_below_one;
    Json errors = Json::object();
    for (const auto& [c, msg] : g.errors) errors[std::string(to_string(c))] = msg;
    j["errors"] = errors;
    if (g.selection) {
        Json verdicts = Json::array();
        for (const auto& v : g.selection->verdicts) verdicts.push_back(verdict_to_json(v));
        j["verdicts"] = verdicts;
        j["selection"] = selection_to_json(*g.selection);
    }
    return j;
}

/// Reads back the fits of a group written by group_to_json. Verdicts and the
/// selection are not read; they are recomputed from the fits.
inline GroupResult group_from_json(const Json& j) {
    GroupResult g;
    g.site = j.at("site").get<std::string>();
    g.month = j.at("month").get<int>();
    const auto& s = j.at("summary");
    g.n = s.at("n").get<std::size_t>();
    g.mean = s.at("mean").get<double>();
    g.variance = s.at("variance").get<double>();
    g.cv_stat = s.at("cv_stat").get<double>();
    g.fittable = j.value("fittable", true);
    g.fits.mixture_cv_below_one = j.value("mixture_cv_below_one", false);
    const auto& fits = j.at("fits");
    auto read = [&](Candidate c) -> std::optional<Fit> {
        const auto key = std::string(to_string(c));
        if (!fits.contains(key)) return std::nullopt;
        return fit_from_json(fits.at(key));
    };
    g.fits.exponential = read(Candidate::ExponentialMl);
    g.fits.gamma = read(Candidate::GammaMl);
    g.fits.weibull = read(Candidate::WeibullMl);
    g.fits.mixed_exponential = read(Candidate::MixedExponentialMl);
    g.fits.mixture = read(Candidate::MgwMixture);
    g.mgw_ml = read(Candidate::MgwMl);
    if (j.contains("errors")) {
        for (const auto& [key, msg] : j.at("errors").items()) {
            if (auto c = candidate_from_string(key)) g.errors[*c] = msg.get<std::string>();
        }
    }
    return g;
}

inline Json run_document(const RunConfig& cfg, const std::vector<GroupResult>& groups,
                         const std::vector<std::string>& warnings) {
    Json j;
    j["format"] = "mgw-report";
    j["version"] = 1;
    j["config"] = config_to_json(cfg);
    j["warnings"] = {{"count", warnings.size()}, {"messages", warnings}};
    Json arr = Json::array();
    for (const auto& g : groups) arr.push_back(group_to_json(g));
    j["groups"] = arr;
    return j;
}

inline std::vector<GroupResult> groups_from_document(const Json& doc) {
    std::vector<GroupResult> out;
    for (const auto& g : doc.at("groups")) out.push_back(group_from_json(g));
    return out;
}

// --- bypass input -----------------------------------------------------------

namespace detail {

inline Fit bypass_fit(Family family, Method method, double log_lik) {
    Fit f;
    f.family = family;
    f.method = method;
    f.log_lik = log_lik;
    return f;
}

inline void apply_mixed_exp_code(Fit& f, std::string_view code) {
    if (code == "a") {
        f.degeneracy = Degeneracy::A_MixedExpToExp;
    } else if (!code.empty()) {
        throw std::invalid_argument("mixed exponential code must be '' or 'a', got '" +
                                    std::string(code) + "'");
    }
}

inline void apply_mixture_code(Fit& f, std::string_view code) {
    if (code.empty()) return;
    if (code == "b1") {
        f.degeneracy = Degeneracy::B1_MGE;
        f.family = Family::MGE;
    } else if (code == "b2") {
        f.degeneracy = Degeneracy::B2_MEW;
        f.family = Family::MEW;
    } else if (code == "b3") {
        f.degeneracy = Degeneracy::B3_MixedExp;
        f.family = Family::MixedExponential;
    } else if (code == "boundary_gamma" || code == "boundary_weibull") {
        f.lrt_usable = false;
        f.family = code == "boundary_gamma" ? Family::Gamma : Family::Weibull;
        f.params.p = code == "boundary_gamma" ? 1.0 : 0.0;
    } else {
        throw std::invalid_argument("mixture code must be '', b1, b2, b3, boundary_gamma or "
                                    "boundary_weibull, got '" + std::string(code) + "'");
    }
}

// "c" is the published footnote, which always means the Weibull case.
inline void apply_mgw_code(Fit& f, std::string_view code) {
    if (code.empty()) return;
    if (code == "c" || code == "c_weibull") {
        f.degeneracy = Degeneracy::C_MLToGammaOrWeibull;
        f.params.p = 0.0;
    } else if (code == "c_gamma") {
        f.degeneracy = Degeneracy::C_MLToGammaOrWeibull;
        f.params.p = 1.0;
    } else {
        throw std::invalid_argument("MGW ML code must be '', c, c_gamma or c_weibull, got '" +
                                    std::string(code) + "'");
    }
}

} // namespace detail

/// Bypass JSON: {"rows": [{"site", "month", "loglik": {exponential, gamma,
/// weibull, mixed_exponential, mixture, mgw_ml}, "codes": {mixed_exponential,
/// mixture, mgw_ml}}]}. A mixture log-likelihood of "CV<1" or null marks the
/// mixture as not computable.
inline std::vector<GroupResult> parse_bypass_json(const Json& doc) {
    std::vector<GroupResult> out;
    const Json& rows = doc.is_array() ? doc : doc.at("rows");
    for (const auto& r : rows) {
        GroupResult g;
        g.site = r.at("site").get<std::string>();
        const auto& m = r.at("month");
        const auto month = m.is_number_integer() ? std::optional<int>(m.get<int>())
                                                 : parse_month(m.get<std::string>());
        if (!month || *month < 1 || *month > 12) throw std::invalid_argument("bad month in bypass row");
        g.month = *month;
        const auto& ll = r.at("loglik");
        const Json codes = r.value("codes", Json::object());
        auto code = [&](const char* key) { return codes.value(key, std::string()); };
        g.fits.exponential =
            detail::bypass_fit(Family::Exponential, Method::ML, ll.at("exponential").get<double>());
        g.fits.gamma = detail::bypass_fit(Family::Gamma, Method::ML, ll.at("gamma").get<double>());
        g.fits.weibull = detail::bypass_fit(Family::Weibull, Method::ML, ll.at("weibull").get<double>());
        Fit me = detail::bypass_fit(Family::MixedExponential, Method::ML,
                                    ll.at("mixed_exponential").get<double>());
        detail::apply_mixed_exp_code(me, code("mixed_exponential"));
        g.fits.mixed_exponential = me;
        const auto& mix = ll.at("mixture");
        if (mix.is_number()) {
            Fit f = detail::bypass_fit(Family::MGW, Method::MixtureEstimation, mix.get<double>());
            detail::apply_mixture_code(f, code("mixture"));
            g.fits.mixture = f;
        } else {
            g.fits.mixture_cv_below_one = true;
        }
        Fit ml = detail::bypass_fit(Family::MGW, Method::ML, ll.at("mgw_ml").get<double>());
        detail::apply_mgw_code(ml, code("mgw_ml"));
        g.mgw_ml = ml;
        out.push_back(std::move(g));
    }
    return out;
}

/// Log-likelihood table in the published layout: tab separated, header
/// "Month Site Exponential Gamma Weibull Mixed Exponential MGW (mixture
/// estimation) MGW (ML estimation)", cells like "-643.789(b1)" or "CV<1".
inline Json bypass_json_from_table(std::istream& in) {
    Json rows = Json::array();
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, '\t');) cells.push_back(c);
        if (cells.size() != 8) throw MalformedRecord(line_no, "expected 8 tab-separated cells");
        auto split = [&](const std::string& cell) -> std::pair<Json, std::string> {
            if (cell == "CV<1") return {Json(), ""};
            const auto open = cell.find('(');
            std::string code;
            if (open != std::string::npos) code = cell.substr(open + 1, cell.find(')') - open - 1);
            const auto num = cell.substr(0, open);
            const auto v = detail::parse_amount(detail::trim(num));
            if (!v) throw MalformedRecord(line_no, "bad log-likelihood '" + cell + "'");
            return {Json(*v), code};
        };
        Json r;
        r["site"] = cells[1];
        r["month"] = cells[0];
        const auto [e, ec] = split(cells[2]);
        const auto [ga, gc] = split(cells[3]);
        const auto [w, wc] = split(cells[4]);
        const auto [me, mec] = split(cells[5]);
        const auto [mx, mxc] = split(cells[6]);
        const auto [ml, mlc] = split(cells[7]);
        r["loglik"] = {{"exponential", e}, {"gamma", ga},   {"weibull", w},
                       {"mixed_exponential", me}, {"mixture", mx.is_null() ? Json("CV<1") : mx},
                       {"mgw_ml", ml}};
        r["codes"] = {{"mixed_exponential", mec}, {"mixture", mxc}, {"mgw_ml", mlc}};
        rows.push_back(r);
    }
    return Json{{"rows", rows}};
}

// --- tables -----------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string loglik_cell(const std::optional<Fit>& f, bool cv_below_one) {
    if (!f) return cv_below_one ? "CV<1" : "error";
    std::string cell = fixed(f->log_lik, 3);
    if (!f->lrt_usable && f->method == Method::MixtureEstimation) {
        cell += f->params.p == 1.0 ? "(p=1)" : "(p=0)";
    }
    const auto code = footnote_code(f->degeneracy);
    if (!code.empty()) cell += "(" + std::string(code) + ")";
    return cell;
}

} // namespace detail

inline std::string loglik_table_csv(const std::vector<GroupResult>& groups) {
    std::string out =
        "month,site,exponential,gamma,weibull,mixed_exponential,mgw_mixture,mgw_ml\n";
    for (const auto& g : groups) {
        out += std::string(month_name(g.month)) + "," + detail::csv_cell(g.site);
        if (!g.fittable) {
            out += ",unfittable,unfittable,unfittable,unfittable,unfittable,unfittable\n";
            continue;
        }
        for (Candidate c : kTestedCandidates) {
            out += "," + detail::loglik_cell(g.fits.slot(c), c == Candidate::MgwMixture &&
                                                                   g.fits.mixture_cv_below_one);
        }
        out += "," + detail::loglik_cell(g.mgw_ml, false) + "\n";
    }
    return out;
}

inline std::string pvalue_cell(const LrtVerdict& v) {
    switch (v.status) {
    case LrtStatus::Tested: return detail::fixed(v.p_value, 4);
    case LrtStatus::NotApplicable_CvLessThanOne: return "CV<1";
    case LrtStatus::NotAvailable: return "unavailable";
    case LrtStatus::NotApplicable_CandidateExceedsMgw: return "not applicable (exceeds MGW ML)";
    case LrtStatus::NotApplicable_MgwDegenerate: return "not applicable (MGW ML degenerate)";
    case LrtStatus::NotApplicable_MixtureAtBoundary: return "not applicable (mixture at p boundary)";
    }
    return "?";
}

inline std::string pvalue_table_csv(const std::vector<GroupResult>& groups) {
    std::string out = "month,site,exponential,gamma,weibull,mixed_exponential,mgw_mixture\n";
    for (const auto& g : groups) {
        out += std::string(month_name(g.month)) + "," + detail::csv_cell(g.site);
        if (!g.selection) {
            out += ",unavailable,unavailable,unavailable,unavailable,unavailable\n";
            continue;
        }
        for (const auto& v : g.selection->verdicts) out += "," + pvalue_cell(v);
        out += "\n";
    }
    return out;
}

/// Parameter columns shown for a selected model; parameters that the model
/// does not carry are left blank.
inline std::array<std::string, 5> masked_params(const SelectionReport& r) {
    const auto& q = r.fit.params;
    auto f = [](double v) { return detail::fixed(v, 4); };
    const std::string label = r.label;
    if (label.rfind("Exponential", 0) == 0) {
        return {"", f(1.0), f(q.beta), f(1.0), f(q.beta)};
    }
    if (label.rfind("Gamma", 0) == 0) return {"", f(q.alpha), f(q.beta), "", ""};
    if (label.rfind("Weibull", 0) == 0) return {"", "", "", f(q.k), f(q.lambda)};
    return {f(q.p), f(q.alpha), f(q.beta), f(q.k), f(q.lambda)};
}

inline std::string selection_table_csv(const std::vector<GroupResult>& groups,
                                       bool with_params = true) {
    std::string out = "month,site,selected_model,rule";
    if (with_params) out += ",p,alpha,beta,k,lambda";
    out += "\n";
    for (const auto& g : groups) {
        out += std::string(month_name(g.month)) + "," + detail::csv_cell(g.site);
        if (!g.selection) {
            out += ",unavailable,";
            if (with_params) out += ",,,,,";
            out += "\n";
            continue;
        }
        out += "," + g.selection->label + "," + std::string(to_string(g.selection->rule_used));
        if (with_params) {
            for (const auto& cell : masked_params(*g.selection)) out += "," + cell;
        }
        out += "\n";
    }
    return out;
}

} // namespace mgw
