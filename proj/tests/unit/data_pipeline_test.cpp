#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "mgw/data_pipeline.hpp"

using namespace mgw;

namespace {

ParsedRecords parse(const std::string& text) {
    std::istringstream in(text);
    return parse_records_csv(in);
}

std::size_t error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const MalformedRecord& e) {
        return e.line();
    }
    return 0;
}

std::vector<DailyRecord> synthetic_records(std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<DailyRecord> out;
    for (const char* site : {"Alpha", "Beta, North", "Gamma"}) {
        for (int y = 1960; y <= 1986; y += 2) {
            for (int m = 1; m <= 12; ++m) {
                for (int d = 1; d <= Date::days_in_month(y, m); d += 3) {
                    const double amt = u(gen) < 0.4 ? std::round(u(gen) * 300.0) / 10.0 : 0.0;
                    out.push_back({site, {y, m, d}, amt, 0});
                }
            }
        }
    }
    return out;
}

} // namespace

TEST(Date, StrictParsing) {
    EXPECT_TRUE(Date::parse("1961-01-01"));
    EXPECT_TRUE(Date::parse("1984-02-29"));
    EXPECT_FALSE(Date::parse("1985-02-29"));
    EXPECT_FALSE(Date::parse("1900-02-29"));
    EXPECT_TRUE(Date::parse("2000-02-29"));
    EXPECT_FALSE(Date::parse("1961-1-01"));
    EXPECT_FALSE(Date::parse("1961-13-01"));
    EXPECT_FALSE(Date::parse("1961-04-31"));
    EXPECT_FALSE(Date::parse("19610101xx"));
    EXPECT_EQ(Date::parse("1970-07-04")->to_string(), "1970-07-04");
}

TEST(Csv, ParsesRecordsAndMissingValues) {
    const auto r = parse("site,date,amount_mm\nDorval,1961-01-01,3.5\n\"St. Alban\",1961-01-02,\nOka ,1961-01-03, 0\n");
    ASSERT_EQ(r.records.size(), 2u);
    EXPECT_EQ(r.missing_amounts, 1u);
    EXPECT_EQ(r.records[0].site, "Dorval");
    EXPECT_DOUBLE_EQ(r.records[0].amount_mm, 3.5);
    EXPECT_EQ(r.records[0].line, 2u);
    EXPECT_EQ(r.records[1].site, "Oka");
}

TEST(Csv, QuotedFieldsAndBom) {
    const auto r = parse("\xEF\xBB\xBFsite,date,amount_mm\r\n\"Ottawa, CDA\",1961-01-01,1.2\r\n\"a \"\"b\"\"\",1961-01-01,2\r\n");
    ASSERT_EQ(r.records.size(), 2u);
    EXPECT_EQ(r.records[0].site, "Ottawa, CDA");
    EXPECT_EQ(r.records[1].site, "a \"b\"");
}

TEST(Csv, ErrorsCarryLineNumbers) {
    const std::string h = "site,date,amount_mm\n";
    EXPECT_EQ(error_line("site,day,amount\n"), 1u);
    EXPECT_EQ(error_line(h + "A,1961-01-01,1\nA,1961-01-32,1\n"), 3u);
    EXPECT_EQ(error_line(h + "A,1961-01-01,-0.5\n"), 2u);
    EXPECT_EQ(error_line(h + "A,1961-01-01,abc\n"), 2u);
    EXPECT_EQ(error_line(h + "A,1961-01-01\n"), 2u);
    EXPECT_EQ(error_line(h + "A,1961-01-01,1\n\nA,1961-01-01,2\n"), 4u);
    EXPECT_EQ(error_line(h + "\"A,1961-01-01,1\n"), 2u);
    EXPECT_EQ(error_line(h + ",1961-01-01,1\n"), 2u);
    EXPECT_THROW(parse(""), MalformedRecord);
    try {
        parse(h + "A,1961-01-01,x\n");
    } catch (const MalformedRecord& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Ingest, WetDaysOffsetAndCalibrationWindow) {
    std::vector<DailyRecord> recs{
        {"A", {1960, 12, 31}, 5.0, 0}, {"A", {1961, 1, 1}, 0.9, 0},  {"A", {1961, 1, 2}, 1.0, 0},
        {"A", {1961, 1, 3}, 10.0, 0},  {"A", {1985, 12, 31}, 2.0, 0}, {"A", {1986, 1, 1}, 7.0, 0},
        {"A", {1961, 3, 1}, 0.0, 0}};
    const auto s = ingest(recs);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].month, 1);
    ASSERT_EQ(s[0].n, 2u);
    EXPECT_DOUBLE_EQ(s[0].xs[0], 1.0 - 0.95);
    EXPECT_DOUBLE_EQ(s[0].xs[1], 10.0 - 0.95);
    EXPECT_EQ(s[1].month, 3);
    EXPECT_EQ(s[1].n, 0u);
    EXPECT_FALSE(s[1].fittable);
    EXPECT_EQ(s[2].month, 12);
    EXPECT_EQ(s[2].n, 1u);
}

TEST(Ingest, SummaryStatistics) {
    const auto s = summarize("A", 1, {3.0, 1.0, 2.0});
    EXPECT_EQ(s.xs, (std::vector<double>{1.0, 2.0, 3.0}));
    EXPECT_DOUBLE_EQ(s.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.variance, 1.0);
    EXPECT_DOUBLE_EQ(s.cv_stat, 0.25);
    IngestOptions ml;
    ml.divisor = VarianceDivisor::MaximumLikelihood;
    EXPECT_DOUBLE_EQ(summarize("A", 1, {3.0, 1.0, 2.0}, ml).variance, 2.0 / 3.0);
}

TEST(Ingest, OrderIndependent) {
    auto recs = synthetic_records(1);
    const auto base = ingest(recs);
    std::mt19937_64 gen(2);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(recs.begin(), recs.end(), gen);
        EXPECT_EQ(ingest(recs), base);
    }
    EXPECT_EQ(ingest(recs), ingest(recs));
}

TEST(Ingest, GroupSizesAddUp) {
    const auto recs = synthetic_records(3);
    const IngestOptions opt;
    const auto wet = std::count_if(recs.begin(), recs.end(), [&](const DailyRecord& r) {
        return opt.calibration.contains(r.date) && r.amount_mm >= 1.0;
    });
    std::size_t total = 0;
    for (const auto& s : ingest(recs)) total += s.n;
    EXPECT_EQ(total, static_cast<std::size_t>(wet));
    EXPECT_EQ(ingest(recs).size(), 36u);
}

TEST(Ingest, JsonRoundTrip) {
    for (const auto& s : ingest(synthetic_records(4))) {
        const auto j = summary_to_json(s);
        EXPECT_EQ(summary_from_json(nlohmann::ordered_json::parse(j.dump())), s);
    }
}

TEST(Restore, RoundedAmountsAtLeastOneMillimetre) {
    const auto m = restore_location({0.4847, 0.6513, 5.3140, 1.3761, 9.5088});
    const auto xs = m.sample(20000, 9);
    for (double x : xs) {
        ASSERT_GE(x, 1.0);
        ASSERT_NEAR(x * 10.0, std::round(x * 10.0), 1e-9);
    }
    EXPECT_EQ(m.sample(500, 3), m.sample(500, 3));
    EXPECT_TRUE(m.sample(0, 3).empty());
    EXPECT_NEAR(m.mean(), mgw_moments(m.params).mean + 0.95, 1e-12);
    EXPECT_THROW(restore_location({2.0, 1, 1, 1, 1}), DomainError);
}
