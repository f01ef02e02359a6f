#pragma once

// Daily gauge records -> per (site, calendar month) samples of wet-day
// amounts with the offset removed.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mgw/distributions.hpp"
#include "mgw/errors.hpp"
#include "mgw/estimators/fit.hpp"
#include "mgw/random.hpp"

namespace mgw {

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    static bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

    static int days_in_month(int y, int m) {
        static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        return m == 2 && leap(y) ? 29 : kDays[m - 1];
    }

    /// Strict YYYY-MM-DD.
    static std::optional<Date> parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        auto num = [&](std::size_t pos, std::size_t len, int& out) {
            const char* b = s.data() + pos;
            auto [ptr, ec] = std::from_chars(b, b + len, out);
            return ec == std::errc() && ptr == b + len;
        };
        Date d;
        if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
            return std::nullopt;
        }
        return d;
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }
};

struct DateRange {
    Date first{1961, 1, 1};
    Date last{1985, 12, 31};

    bool contains(const Date& d) const { return first <= d && d <= last; }
};

struct DailyRecord {
    std::string site;
    Date date;
    double amount_mm = 0.0;
    std::size_t line = 0; // source line, 0 when not read from a file
};

struct ParsedRecords {
    std::vector<DailyRecord> records;
    std::size_t missing_amounts = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Comma-separated fields; a field may be wrapped in double quotes, with ""
// standing for a literal quote.
inline std::optional<std::vector<std::string>> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && trim(cur).empty()) {
            cur.clear();
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : std::string(trim(cur)));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) return std::nullopt;
    fields.push_back(was_quoted ? cur : std::string(trim(cur)));
    return fields;
}

inline std::optional<double> parse_amount(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// Reads `site,date,amount_mm` CSV. An empty amount is a missing value and is
/// counted, not returned. Throws MalformedRecord for anything else that does
/// not parse, for negative amounts, and for a second record of the same site
/// and date.
inline ParsedRecords parse_records_csv(std::istream& in) {
    ParsedRecords out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::set<std::pair<std::string, Date>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
        if (detail::trim(view).empty()) continue;
        const auto fields = detail::split_csv(view);
        if (!fields) throw MalformedRecord(line_no, "unterminated quote");
        if (!header_seen) {
            if (fields->size() != 3 || (*fields)[0] != "site" || (*fields)[1] != "date" ||
                (*fields)[2] != "amount_mm") {
                throw MalformedRecord(line_no, "expected header 'site,date,amount_mm'");
            }
            header_seen = true;
            continue;
        }
        if (fields->size() != 3) {
            throw MalformedRecord(line_no, "expected 3 fields, got " + std::to_string(fields->size()));
        }
        const auto& site = (*fields)[0];
        if (site.empty()) throw MalformedRecord(line_no, "empty site");
        const auto date = Date::parse((*fields)[1]);
        if (!date) throw MalformedRecord(line_no, "bad date '" + (*fields)[1] + "'");
        if (!seen.emplace(site, *date).second) {
            throw MalformedRecord(line_no, "duplicate record for " + site + " on " + date->to_string());
        }
        if ((*fields)[2].empty()) {
            ++out.missing_amounts;
            continue;
        }
        const auto amount = detail::parse_amount((*fields)[2]);
        if (!amount || *amount < 0.0) {
            throw MalformedRecord(line_no, "bad amount '" + (*fields)[2] + "'");
        }
        out.records.push_back({site, *date, *amount, line_no});
    }
    if (!header_seen) throw MalformedRecord(line_no, "missing header");
    return out;
}

struct IngestOptions {
    DateRange calibration;
    double wet_threshold = 1.0;
    double offset = 0.95;
    VarianceDivisor divisor = VarianceDivisor::Unbiased;
    std::size_t min_fittable = 5;
};

struct SampleSummary {
    std::string site;
    int month = 1;
    std::vector<double> xs; // ascending
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double cv_stat = 0.0;
    bool fittable = false;

    bool operator==(const SampleSummary&) const = default;
};

inline SampleSummary summarize(std::string site, int month, std::vector<double> xs,
                               const IngestOptions& options = {}) {
    std::sort(xs.begin(), xs.end());
    SampleSummary s;
    s.site = std::move(site);
    s.month = month;
    s.n = xs.size();
    if (s.n > 0) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        s.mean = sum / static_cast<double>(s.n);
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        const double denom = options.divisor == VarianceDivisor::Unbiased
                                 ? static_cast<double>(s.n) - 1.0
                                 : static_cast<double>(s.n);
        s.variance = denom > 0.0 ? ss / denom : 0.0;
        s.cv_stat = s.variance / (s.mean * s.mean);
    }
    s.fittable = s.n >= options.min_fittable;
    s.xs = std::move(xs);
    return s;
}

/// Groups wet calibration-period days by (site, month), ordered by site then
/// month. Every (site, month) with at least one calibration-period record
/// appears, possibly with n = 0.
inline std::vector<SampleSummary> ingest(const std::vector<DailyRecord>& records,
                                         const IngestOptions& options = {}) {
    std::map<std::pair<std::string, int>, std::vector<double>> groups;
    for (const auto& r : records) {
        if (!options.calibration.contains(r.date)) continue;
        auto& g = groups[{r.site, r.date.month}];
        if (r.amount_mm >= options.wet_threshold) g.push_back(r.amount_mm - options.offset);
    }
    std::vector<SampleSummary> out;
    for (auto& [key, xs] : groups) out.push_back(summarize(key.first, key.second, std::move(xs), options));
    return out;
}

/// A fitted model for the offset-adjusted amounts, moved back to the scale of
/// the gauge: amount = X + location.
struct ShiftedModel {
    MgwParams params;
    double location = 0.95;

    double mean() const { return mgw_moments(params).mean + location; }
    double variance() const { return mgw_moments(params).variance; }

    /// Draws amounts rounded to `resolution` mm (0 keeps them unrounded).
    std::vector<double> sample(std::size_t n, std::uint64_t seed, double resolution = 0.1) const {
        auto xs = sample_mgw(params, n, seed);
        if (resolution > 0.0) {
            const double steps = 1.0 / resolution;
            const double loc_steps = location * steps;
            for (double& x : xs) x = std::round(x * steps + loc_steps) / steps;
        } else {
            for (double& x : xs) x += location;
        }
        return xs;
    }
};

inline ShiftedModel restore_location(const MgwParams& params, double offset = 0.95) {
    params.validate();
    return {params, offset};
}

inline nlohmann::ordered_json summary_to_json(const SampleSummary& s) {
    nlohmann::ordered_json j;
    j["site"] = s.site;
    j["month"] = s.month;
    j["n"] = s.n;
    j["mean"] = s.mean;
    j["variance"] = s.variance;
    j["cv_stat"] = s.cv_stat;
    j["fittable"] = s.fittable;
    j["xs"] = s.xs;
    return j;
}

inline SampleSummary summary_from_json(const nlohmann::ordered_json& j) {
    SampleSummary s;
    s.site = j.at("site").get<std::string>();
    s.month = j.at("month").get<int>();
    s.n = j.at("n").get<std::size_t>();
    s.mean = j.at("mean").get<double>();
    s.variance = j.at("variance").get<double>();
    s.cv_stat = j.at("cv_stat").get<double>();
    s.fittable = j.at("fittable").get<bool>();
    s.xs = j.at("xs").get<std::vector<double>>();
    return s;
}

} // namespace mgw
