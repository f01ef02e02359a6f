// mgwfit: fit, select and sample daily precipitation amount models.
//
//   mgwfit fit    --input records.csv --out DIR
//   mgwfit select --fits DIR/report.json --out DIR
//   mgwfit select --bypass loglik.json --out DIR
//   mgwfit sample --model model.json --n 1000 --seed 7

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mgw/mgw.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

mgw::Json read_json(const std::string& path) {
    try {
        return mgw::Json::parse(read_file(path));
    } catch (const mgw::Json::parse_error& e) {
        throw UsageError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw IoError("cannot write '" + path.string() + "'");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
}

mgw::Date parse_date_flag(const std::string& s, const char* flag) {
    const auto d = mgw::Date::parse(s);
    if (!d) throw UsageError(std::string(flag) + ": expected YYYY-MM-DD, got '" + s + "'");
    return *d;
}

// Flags shared by fit and select.
struct CommonFlags {
    std::string out = ".";
    std::string formats = "csv,json";
    double threshold = 0.05;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--out,-o", f.out, "Output directory")->capture_default_str();
    cmd->add_option("--format", f.formats, "Comma-separated report formats: csv, json")
        ->capture_default_str();
    cmd->add_option("--threshold", f.threshold, "Significance level of the all-below rule")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
}

std::pair<bool, bool> parse_formats(const std::string& s) {
    bool csv = false, json = false;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) {
        if (tok == "csv") {
            csv = true;
        } else if (tok == "json") {
            json = true;
        } else {
            throw UsageError("--format: unknown format '" + tok + "'");
        }
    }
    return {csv, json};
}

void emit_selection(const std::vector<mgw::GroupResult>& groups, const mgw::RunConfig& cfg,
                    bool with_params, const std::vector<std::string>& warnings) {
    ensure_dir(cfg.output_dir);
    const fs::path dir = cfg.output_dir;
    if (cfg.write_csv) {
        write_file(dir / "pvalues.csv", mgw::pvalue_table_csv(groups));
        write_file(dir / "selection.csv", mgw::selection_table_csv(groups, with_params));
    }
    if (cfg.write_json) {
        write_file(dir / "selection.json", mgw::run_document(cfg, groups, warnings).dump(2) + "\n");
    }
}

int run_fit(mgw::RunConfig cfg, const std::string& first, const std::string& last) {
    cfg.ingest.calibration = {parse_date_flag(first, "--calibration-start"),
                              parse_date_flag(last, "--calibration-end")};
    if (cfg.ingest.calibration.last < cfg.ingest.calibration.first) {
        throw UsageError("calibration range is empty");
    }
    std::ifstream in(cfg.input, std::ios::binary);
    if (!in) throw IoError("cannot open '" + cfg.input + "'");
    const auto parsed = mgw::parse_records_csv(in);

    std::vector<std::string> warnings;
    if (parsed.missing_amounts > 0) {
        warnings.push_back(std::to_string(parsed.missing_amounts) + " records with an empty amount skipped");
    }
    const auto summaries = mgw::ingest(parsed.records, cfg.ingest);
    for (const auto& s : summaries) {
        if (!s.fittable) {
            warnings.push_back(s.site + " " + std::string(mgw::month_name(s.month)) + ": only " +
                               std::to_string(s.n) + " wet days, not fitted");
        }
    }
    const auto groups = mgw::fit_groups(summaries, cfg);
    for (const auto& g : groups) {
        for (const auto& [c, msg] : g.errors) {
            warnings.push_back(g.site + " " + std::string(mgw::month_name(g.month)) + " " +
                               std::string(mgw::to_string(c)) + ": " + msg);
        }
    }

    ensure_dir(cfg.output_dir);
    const fs::path dir = cfg.output_dir;
    if (cfg.write_csv) {
        write_file(dir / "loglik.csv", mgw::loglik_table_csv(groups));
        write_file(dir / "pvalues.csv", mgw::pvalue_table_csv(groups));
        write_file(dir / "selection.csv", mgw::selection_table_csv(groups));
    }
    if (cfg.write_json) {
        write_file(dir / "report.json", mgw::run_document(cfg, groups, warnings).dump(2) + "\n");
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << summaries.size() << " groups, " << warnings.size() << " warnings\n";
    return kOk;
}

int run_select(mgw::RunConfig cfg, const std::string& fits, const std::string& bypass,
               const std::string& table) {
    std::vector<mgw::GroupResult> groups;
    bool with_params = true;
    try {
        if (!fits.empty()) {
            const auto doc = read_json(fits);
            groups = mgw::groups_from_document(doc);
        } else if (!bypass.empty()) {
            groups = mgw::parse_bypass_json(read_json(bypass));
            with_params = false;
        } else {
            std::ifstream in(table, std::ios::binary);
            if (!in) throw IoError("cannot open '" + table + "'");
            groups = mgw::parse_bypass_json(mgw::bypass_json_from_table(in));
            with_params = false;
        }
    } catch (const mgw::Json::exception& e) {
        throw UsageError(std::string("malformed input: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("malformed input: ") + e.what());
    }
    std::vector<std::string> warnings;
    for (auto& g : groups) {
        mgw::run_selection(g, cfg.selection);
        if (!g.selection) {
            warnings.push_back(g.site + " " + std::string(mgw::month_name(g.month)) +
                               ": no MGW ML fit, nothing selected");
        }
    }
    emit_selection(groups, cfg, with_params, warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return kOk;
}

// A model descriptor is a bare parameter object, a fit, or a selection entry:
// anything carrying p, alpha, beta, k, lambda directly or under "params".
mgw::MgwParams model_params(const mgw::Json& j) {
    const mgw::Json& node = j.contains("params") ? j.at("params") : j;
    mgw::MgwParams q;
    try {
        q = mgw::params_from_json(node);
    } catch (const mgw::Json::exception& e) {
        throw UsageError(std::string("model descriptor: ") + e.what());
    }
    if (!q.valid()) throw UsageError("model descriptor: parameters out of range");
    return q;
}

int run_sample(const std::string& model, std::size_t n, std::uint64_t seed, double offset,
               double resolution, const std::string& out_path) {
    const auto params = model_params(read_json(model));
    const auto shifted = mgw::restore_location(params, offset);
    std::string text = "amount_mm\n";
    char buf[64];
    const int decimals = resolution > 0.0 ? std::max(0, static_cast<int>(std::ceil(-std::log10(resolution) - 1e-9))) : 6;
    for (double x : shifted.sample(n, seed, resolution)) {
        std::snprintf(buf, sizeof buf, "%.*f\n", decimals, x);
        text += buf;
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        if (!std::cout) throw IoError("cannot write to stdout");
    } else {
        write_file(out_path, text);
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fit and select daily precipitation amount distributions"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML style key = value file");

    mgw::RunConfig cfg;
    CommonFlags common;
    std::string first = "1961-01-01";
    std::string last = "1985-12-31";
    std::string divisor = "n-1";

    auto* fit = app.add_subcommand("fit", "Fit every candidate model to each site-month");
    fit->add_option("--input,-i", cfg.input, "Daily records CSV (site,date,amount_mm)")->required();
    add_common(fit, common);
    fit->add_option("--calibration-start", first, "First day of the calibration window")
        ->capture_default_str();
    fit->add_option("--calibration-end", last, "Last day of the calibration window")
        ->capture_default_str();
    fit->add_option("--wet-threshold", cfg.ingest.wet_threshold, "Wet-day threshold (mm)")
        ->capture_default_str();
    fit->add_option("--offset", cfg.ingest.offset, "Offset subtracted from wet amounts (mm)")
        ->capture_default_str();
    fit->add_option("--variance-divisor", divisor, "Sample variance divisor")
        ->check(CLI::IsMember({"n-1", "n"}))
        ->capture_default_str();
    fit->add_option("--min-n", cfg.ingest.min_fittable, "Smallest sample that is fitted")
        ->capture_default_str();
    fit->add_option("--threads,-j", cfg.threads, "Site-months fitted in parallel")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1024u));
    fit->add_option("--p-step", cfg.grid.p_step, "Mixture grid step in p")->capture_default_str();
    fit->add_option("--skew-step", cfg.grid.skew_step, "Mixture grid step in skewness")
        ->capture_default_str();
    fit->add_option("--score-tol", cfg.ml.score_tol, "MGW ML score tolerance")->capture_default_str();
    fit->add_option("--eps0", cfg.ml.eps0, "MGW ML step-size constant")->capture_default_str();
    fit->add_option("--max-inner", cfg.ml.max_inner_iters, "MGW ML inner EM iteration cap")
        ->capture_default_str();
    fit->add_option("--max-outer", cfg.ml.max_outer_iters, "MGW ML shape-step iteration cap")
        ->capture_default_str();
    fit->add_option("--time-limit", cfg.ml.time_limit,
                    "Wall-clock seconds allowed per MGW ML fit (0: unlimited)")
        ->capture_default_str();

    std::string fits_path, bypass_path, table_path;
    auto* sel = app.add_subcommand("select", "Run model selection on existing fits");
    auto* o_fits = sel->add_option("--fits", fits_path, "report.json written by 'fit'");
    auto* o_bypass = sel->add_option("--bypass", bypass_path, "Log-likelihoods and degeneracy codes (JSON)");
    auto* o_table = sel->add_option("--table", table_path, "Log-likelihood table (tab separated)");
    o_fits->excludes(o_bypass)->excludes(o_table);
    o_bypass->excludes(o_table);
    add_common(sel, common);

    std::string model_path, sample_out;
    std::size_t n = 0;
    std::uint64_t seed = 1;
    double sample_offset = 0.95;
    double resolution = 0.1;
    auto* smp = app.add_subcommand("sample", "Draw synthetic amounts from a fitted model");
    smp->add_option("--model,-m", model_path, "Model JSON (parameters, fit or selection entry)")
        ->required();
    smp->add_option("--n", n, "Number of amounts")->required();
    smp->add_option("--seed", seed, "Random seed")->capture_default_str();
    smp->add_option("--offset", sample_offset, "Location added back (mm)")->capture_default_str();
    smp->add_option("--resolution", resolution, "Rounding step in mm, 0 for none")
        ->capture_default_str();
    smp->add_option("--out,-o", sample_out, "Output CSV, '-' or omitted for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*smp) return run_sample(model_path, n, seed, sample_offset, resolution, sample_out);

        cfg.output_dir = common.out;
        cfg.selection.threshold = common.threshold;
        std::tie(cfg.write_csv, cfg.write_json) = parse_formats(common.formats);
        cfg.ingest.divisor =
            divisor == "n" ? mgw::VarianceDivisor::MaximumLikelihood : mgw::VarianceDivisor::Unbiased;
        try {
            cfg.grid.validate();
            cfg.ml.validate();
        } catch (const mgw::DomainError& e) {
            throw UsageError(e.what());
        }
        if (*fit) return run_fit(cfg, first, last);
        if (fits_path.empty() && bypass_path.empty() && table_path.empty()) {
            throw UsageError("select needs one of --fits, --bypass or --table");
        }
        return run_select(cfg, fits_path, bypass_path, table_path);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const mgw::MalformedRecord& e) {
        std::cerr << "error: " << cfg.input << ": " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    }
}
