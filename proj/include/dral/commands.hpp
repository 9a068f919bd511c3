#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dral/check.hpp"
#include "dral/config.hpp"
#include "dral/harness.hpp"
#include "dral/report.hpp"

namespace dral {

namespace fs = std::filesystem;

/// Stable process exit codes.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2, kExitRuntime = 3 };

struct ResolvedConfig {
    Json document;  // canonical resolved form
    ExperimentConfig config;
};

/// Parses a comma-separated seed list (the DRAL_SEED_LIST format).
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto trimmed = detail::trim(item);
        if (trimmed.empty()) continue;
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
        if (ec != std::errc() || ptr != trimmed.data() + trimmed.size())
            throw ConfigError("DRAL_SEED_LIST", "invalid seed '" + std::string(trimmed) + "'");
        seeds.push_back(v);
    }
    if (seeds.empty()) throw ConfigError("DRAL_SEED_LIST", "no seeds given");
    return seeds;
}

/// Loads a config file, applies `--set` overrides and the DRAL_SEED_LIST environment override.
inline ResolvedConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
    Json raw = load_config_json(path);
    for (const auto& o : overrides) apply_override(raw, o);
    if (const char* env = std::getenv("DRAL_SEED_LIST"); env && *env) {
        Json seeds = Json::array();
        for (auto s : parse_seed_list(env)) seeds.push_back(s);
        raw["seeds"] = seeds;
    }
    // Relative dataset and weight paths resolve against the config file's directory.
    const fs::path base = fs::path(path).parent_path();
    auto rebase = [&](Json& node, const char* key) {
        if (node.is_object() && node.contains(key) && node[key].is_string()) {
            fs::path p = node[key].get<std::string>();
            if (p.is_relative() && !fs::exists(p) && fs::exists(base / p)) node[key] = (base / p).string();
        }
    };
    if (raw.contains("grid")) rebase(raw["grid"], "path");
    if (raw.contains("ambiguity") && raw["ambiguity"].is_object() && raw["ambiguity"].contains("p_ref"))
        rebase(raw["ambiguity"]["p_ref"], "file");

    ExperimentConfig config = config_from_json(raw);
    return ResolvedConfig{config_to_json(config), std::move(config)};
}

/// Results of one executed configuration.
struct RunResult {
    std::vector<TrialRecord> records;
    std::vector<SummaryRow> summary;
};

/// Executes every trial of `config` in memory.
inline RunResult execute(const ExperimentConfig& config, unsigned jobs = 0) {
    const Problem problem = make_problem(config);
    RunResult result;
    result.records = run_trials(config, problem, config.trial_seeds(), jobs);
    result.summary = aggregate(result.records);
    return result;
}

/// Writes trials.csv, diagnostics.csv, summary.csv and run.json into `dir`.
inline void write_run(const fs::path& dir, const ResolvedConfig& resolved, const RunResult& result,
                      const std::string& run_id) {
    fs::create_directories(dir);
    write_text(dir / "trials.csv", trials_csv(result.records));
    write_text(dir / "diagnostics.csv", diagnostics_csv(result.records));
    write_text(dir / "summary.csv", summary_csv(result.summary));
    Json manifest;
    manifest["run_id"] = run_id;
    manifest["config_hash"] = hex_hash(config_hash(resolved.document));
    manifest["config"] = resolved.document;
    Json finals = Json::array();
    for (const auto& r : result.records)
        finals.push_back(Json{{"seed", r.seed}, {"kernel", detail::kernel_to_json(r.final_kernel)}, {"noise_variance", r.final_noise}});
    manifest["final_hyperparameters"] = finals;
    write_text(dir / "run.json", manifest.dump(2) + "\n");
}

/// "<UTC timestamp>-<config hash prefix>".
inline std::string make_run_id(const Json& resolved) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    return std::string(stamp) + "-" + hex_hash(config_hash(resolved)).substr(0, 8);
}

/// First unused path among dir, dir-2, dir-3, ...
inline fs::path unique_dir(const fs::path& dir) {
    if (!fs::exists(dir)) return dir;
    for (int k = 2;; ++k) {
        fs::path candidate = dir.string() + "-" + std::to_string(k);
        if (!fs::exists(candidate)) return candidate;
    }
}

struct CommandOptions {
    std::vector<std::string> overrides;
    std::optional<fs::path> out;  // exact output directory; default results/<run-id>
    fs::path results_root = "results";
    unsigned jobs = 0;
    bool keep_going = false;
    std::vector<std::string> axes;  // sweep axes; empty = all listed in the config
};

namespace detail {

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const TrialError& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace detail

inline int cmd_run(const std::string& config_path, const CommandOptions& opts, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        const ResolvedConfig resolved = resolve_config(config_path, opts.overrides);
        const std::string run_id = make_run_id(resolved.document);
        const fs::path dir = opts.out ? *opts.out : unique_dir(opts.results_root / run_id);
        const RunResult result = execute(resolved.config, opts.jobs);
        write_run(dir, resolved, result, run_id);
        out << "wrote " << dir.string() << " (" << result.records.size() << " trials, T=" << resolved.config.T << ")\n";
        return int{kExitOk};
    });
}

/// One cell of a sweep: the base config with some axes replaced.
struct SweepCell {
    std::string name;
    ExperimentConfig config;
};

inline std::string eta_label(double eta) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", eta);
    return buf;
}

inline std::string kernel_label(const KernelSpec& k) {
    std::string s(to_string(k.kind));
    if (k.kind == KernelKind::Matern) s += k.nu == 1.5 ? "32" : "52";
    if (k.kind != KernelKind::Linear) s += "-l" + eta_label(k.lengthscale);
    return s;
}

/// Cross product over the requested axes (strategy, then eta, then kernel).
inline std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const std::vector<std::string>& requested) {
    std::vector<std::string> axes = requested;
    if (axes.empty()) {
        if (!base.sweep.strategy.empty()) axes.push_back("strategy");
        if (!base.sweep.eta.empty()) axes.push_back("eta");
        if (!base.sweep.kernel.empty()) axes.push_back("kernel");
    }
    if (axes.empty()) throw ConfigError("sweep", "no sweep axis values listed in the config");
    auto has = [&](const char* a) { return std::find(axes.begin(), axes.end(), a) != axes.end(); };
    for (const auto& a : axes)
        if (a != "strategy" && a != "eta" && a != "kernel") throw ConfigError("sweep", "unknown axis '" + a + "'");
    if (has("strategy") && base.sweep.strategy.empty()) throw ConfigError("sweep.strategy", "axis requested but no values listed");
    if (has("eta") && base.sweep.eta.empty()) throw ConfigError("sweep.eta", "axis requested but no values listed");
    if (has("kernel") && base.sweep.kernel.empty()) throw ConfigError("sweep.kernel", "axis requested but no values listed");

    const auto strategies = has("strategy") ? base.sweep.strategy : std::vector<StrategyKind>{base.strategy.kind};
    const auto etas = has("eta") ? base.sweep.eta : std::vector<double>{base.eta};
    const auto kernels = has("kernel") ? base.sweep.kernel : std::vector<KernelSpec>{base.kernel};

    std::vector<SweepCell> cells;
    for (auto s : strategies)
        for (double eta : etas)
            for (const auto& k : kernels) {
                SweepCell cell;
                cell.config = base;
                cell.config.strategy.kind = s;
                cell.config.eta = eta;
                cell.config.kernel = k;
                cell.config.sweep = {};
                cell.name = std::string(to_string(s)) + "_eta" + eta_label(eta) + "_" + kernel_label(k);
                cells.push_back(std::move(cell));
            }
    return cells;
}

inline int cmd_sweep(const std::string& config_path, const CommandOptions& opts, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        const ResolvedConfig resolved = resolve_config(config_path, opts.overrides);
        const auto cells = sweep_cells(resolved.config, opts.axes);
        const std::string run_id = make_run_id(resolved.document) + "-sweep";
        const fs::path dir = opts.out ? *opts.out : unique_dir(opts.results_root / run_id);
        fs::create_directories(dir);

        std::ostringstream combined;
        combined << kSweepHeader << '\n';
        int status = kExitOk;
        Json listing = Json::array();
        for (const auto& cell : cells) {
            const ResolvedConfig cell_resolved{config_to_json(cell.config), cell.config};
            try {
                const RunResult result = execute(cell.config, opts.jobs);
                write_run(dir / cell.name, cell_resolved, result, run_id + "/" + cell.name);
                for (const auto& s : result.summary)
                    combined << cell.name << ',' << to_string(cell.config.strategy.kind) << ','
                             << format_double(cell.config.eta) << ',' << kernel_label(cell.config.kernel) << ',' << s.t
                             << ',' << format_double(s.mean_error) << ',' << format_double(s.stderr_error) << ','
                             << format_double(s.mean_worst_var) << ',' << format_double(s.stderr_worst_var) << '\n';
                listing.push_back(cell.name);
                out << "cell " << cell.name << " done\n";
            } catch (const std::exception& e) {
                err << "cell " << cell.name << " failed: " << e.what() << '\n';
                status = kExitRuntime;
                if (!opts.keep_going) break;
            }
        }
        write_text(dir / "sweep.csv", combined.str());
        Json manifest{{"run_id", run_id}, {"config", resolved.document}, {"cells", listing}};
        write_text(dir / "sweep.json", manifest.dump(2) + "\n");
        out << "wrote " << dir.string() << " (" << listing.size() << "/" << cells.size() << " cells)\n";
        return status;
    });
}

namespace detail {

inline std::string run_strategy_name(const fs::path& dir) {
    const fs::path manifest = dir / "run.json";
    if (!fs::exists(manifest)) return "run";
    try {
        std::ifstream in(manifest);
        const Json doc = Json::parse(in);
        return doc.at("config").at("strategy").at("kind").get<std::string>();
    } catch (const std::exception&) {
        return "run";
    }
}

inline std::string file_safe(std::string s) {
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
}

} // namespace detail

/**
 * Writes one SVG per metric. A sweep directory (sweep.csv) gets one chart per (eta, kernel)
 * group with a line per strategy; a single run directory gets a one-line chart.
 */
inline int cmd_plot(const fs::path& results_dir, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        if (!fs::is_directory(results_dir)) {
            err << "plot: '" << results_dir.string() << "' is not a directory\n";
            return kExitUsage;
        }
        struct Metric {
            const char* file;
            const char* mean_col;
            const char* se_col;
            const char* label;
        };
        const Metric metrics[] = {{"E_t", "mean_E", "stderr_E", "E_t"},
                                  {"worst_var", "mean_worst_var", "stderr_worst_var", "worst-case expected variance"}};
        std::vector<fs::path> written;

        if (fs::exists(results_dir / "sweep.csv")) {
            const CsvTable table = read_csv(results_dir / "sweep.csv");
            if (table.rows.empty()) throw ParseError("sweep.csv has no data rows", 2, 1);
            const std::size_t c_strategy = table.column("strategy"), c_eta = table.column("eta"),
                              c_kernel = table.column("kernel"), c_t = table.column("t");
            for (const auto& m : metrics) {
                const std::size_t c_mean = table.column(m.mean_col), c_se = table.column(m.se_col);
                std::map<std::string, std::vector<Series>> groups;
                for (std::size_t r = 0; r < table.rows.size(); ++r) {
                    const auto& row = table.rows[r];
                    const std::string group = "eta" + row[c_eta] + "_" + row[c_kernel];
                    auto& lines = groups[group];
                    auto it = std::find_if(lines.begin(), lines.end(), [&](const Series& s) { return s.name == row[c_strategy]; });
                    if (it == lines.end()) it = lines.insert(lines.end(), Series{row[c_strategy], {}, {}, {}});
                    it->t.push_back(table.number(r, c_t));
                    it->mean.push_back(table.number(r, c_mean));
                    it->stderr_.push_back(table.number(r, c_se));
                }
                for (const auto& [group, lines] : groups) {
                    const fs::path file = results_dir / ("plot_" + std::string(m.file) + "_" + detail::file_safe(group) + ".svg");
                    write_text(file, render_chart(std::string(m.label) + " (" + group + ")", m.label, lines));
                    written.push_back(file);
                }
            }
        } else if (fs::exists(results_dir / "summary.csv")) {
            const CsvTable table = read_csv(results_dir / "summary.csv");
            if (table.rows.empty()) throw ParseError("summary.csv has no data rows", 2, 1);
            const std::string name = detail::run_strategy_name(results_dir);
            const std::size_t c_t = table.column("t");
            for (const auto& m : metrics) {
                const std::size_t c_mean = table.column(m.mean_col), c_se = table.column(m.se_col);
                Series s{name, {}, {}, {}};
                for (std::size_t r = 0; r < table.rows.size(); ++r) {
                    s.t.push_back(table.number(r, c_t));
                    s.mean.push_back(table.number(r, c_mean));
                    s.stderr_.push_back(table.number(r, c_se));
                }
                const fs::path file = results_dir / ("plot_" + std::string(m.file) + ".svg");
                write_text(file, render_chart(m.label, m.label, {s}));
                written.push_back(file);
            }
        } else {
            err << "plot: no summary.csv or sweep.csv in '" << results_dir.string() << "'\n";
            return kExitUsage;
        }
        for (const auto& f : written) out << "wrote " << f.string() << '\n';
        return kExitOk;
    } catch (const ParseError& e) {
        err << "plot: corrupt results: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "plot: " << e.what() << '\n';
        return kExitRuntime;
    }
}

namespace detail {

inline void print_checks(const std::vector<CheckResult>& results, std::ostream& out) {
    for (const auto& r : results) {
        const char* tag = r.informational ? (r.passed ? "INFO-PASS" : "INFO-FAIL") : (r.passed ? "PASS" : "FAIL");
        out << '[' << tag << "] " << r.name;
        if (!r.detail.empty()) out << " -- " << r.detail;
        out << '\n';
    }
}

/// Recorded trials.csv rows must be sane and equal to a fresh replay of the same config.
inline std::vector<CheckResult> check_recorded_trials(const CsvTable& table, const std::vector<TrialRecord>& replay) {
    std::vector<CheckResult> out;
    const std::size_t c_seed = table.column("trial_seed"), c_t = table.column("t"), c_e = table.column("E_t"),
                      c_v = table.column("worst_var");

    CheckResult sane{"recorded metrics nonnegative", true, false, ""};
    for (std::size_t r = 0; r < table.rows.size() && sane.passed; ++r) {
        const double e = table.number(r, c_e), v = table.number(r, c_v);
        if (!(e >= 0.0) || !(v >= 0.0)) {
            sane.passed = false;
            sane.detail = "trials.csv line " + std::to_string(r + 2) + " (trial " + table.rows[r][c_seed] + ", t=" +
                          table.rows[r][c_t] + "): " + (!(e >= 0.0) ? "E_t" : "worst_var") + " = " +
                          format_double(!(e >= 0.0) ? e : v);
        }
    }
    out.push_back(sane);

    CheckResult match{"recorded trials match replay", true, false, ""};
    std::istringstream expected(trials_csv(replay));
    std::string expected_line;
    std::getline(expected, expected_line);  // header
    std::size_t r = 0;
    for (; std::getline(expected, expected_line); ++r) {
        if (r >= table.rows.size()) {
            match.passed = false;
            match.detail = "trials.csv is missing rows after line " + std::to_string(r + 1);
            break;
        }
        std::string recorded;
        for (std::size_t c = 0; c < table.rows[r].size(); ++c) recorded += (c ? "," : "") + table.rows[r][c];
        if (recorded != expected_line) {
            match.passed = false;
            match.detail = "trials.csv line " + std::to_string(r + 2) + " (trial " + table.rows[r][c_seed] + ", t=" +
                           table.rows[r][c_t] + ") differs from replay";
            break;
        }
    }
    if (match.passed && r != table.rows.size()) {
        match.passed = false;
        match.detail = "trials.csv has extra rows";
    }
    out.push_back(match);
    return out;
}

} // namespace detail

/// Replays the invariant suite for a results directory or a config file. Exit 0 only if all pass.
inline int cmd_check(const fs::path& target, const CommandOptions& opts, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        std::vector<CheckResult> results;
        if (fs::is_directory(target)) {
            const fs::path manifest = target / "run.json";
            if (!fs::exists(manifest) || !fs::exists(target / "trials.csv")) {
                err << "check: '" << target.string() << "' lacks run.json or trials.csv\n";
                return int{kExitUsage};
            }
            std::ifstream in(manifest);
            Json doc;
            try {
                doc = Json::parse(in);
            } catch (const Json::parse_error& e) {
                throw ConfigError("run.json", e.what());
            }
            if (!doc.contains("config")) throw ConfigError("run.json", "missing 'config'");
            const ExperimentConfig config = config_from_json(doc["config"]);
            const CsvTable table = read_csv(target / "trials.csv");
            const RunResult replay = execute(config, opts.jobs);
            results = detail::check_recorded_trials(table, replay.records);
            for (auto& r : run_checks(config, replay.records)) results.push_back(std::move(r));
        } else {
            const ResolvedConfig resolved = resolve_config(target.string(), opts.overrides);
            const RunResult run = execute(resolved.config, opts.jobs);
            results = run_checks(resolved.config, run.records);
        }
        detail::print_checks(results, out);
        const bool ok = all_passed(results);
        out << (ok ? "all checks passed\n" : "check failed\n");
        return ok ? int{kExitOk} : int{kExitCheckFailed};
    });
}

} // namespace dral
