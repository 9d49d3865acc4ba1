// Benchmark harness: runs a directory of configuration files for several
// seeds each and reports success rates with min/mean/max timing splits.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fossil/config.hpp"

namespace fossil {

struct SuiteEntry {
    std::string name;
    std::string config_path;  // relative to the suite directory
    CegisStatus expected = CegisStatus::Valid;
    int repeats = 10;
    double success_threshold = 0.5;  // fraction of runs that must succeed
    double time_ceiling_s = 600.0;
    bool substitute = false;  // stands in for an unprinted paper benchmark
};

struct BenchRun {
    std::uint64_t seed = 0;
    CegisStatus status = CegisStatus::Error;
    bool sound = false;  // independent re-verification passed
    double total_s = 0.0, learn_s = 0.0;
    int iterations = 0;
    std::string error;
};

struct BenchEntryResult {
    SuiteEntry entry;
    int n_vars = 0, n_inputs = 0;
    std::string certificate, neurons, activations;
    std::vector<BenchRun> runs;

    int successes() const {
        int n = 0;
        for (const auto& r : runs)
            if (r.status == CegisStatus::Valid && r.sound && r.total_s <= entry.time_ceiling_s) ++n;
        return n;
    }
    double success_rate() const {
        return runs.empty() ? 0.0 : static_cast<double>(successes()) / runs.size();
    }
    bool passed() const {
        if (entry.expected == CegisStatus::Valid) return success_rate() >= entry.success_threshold;
        return successes() == 0;
    }
};

inline std::vector<SuiteEntry> load_suite(const std::string& dir) {
    const auto manifest = std::filesystem::path(dir) / "suite.json";
    std::ifstream in(manifest);
    if (!in) throw ConfigError("cannot open suite manifest: " + manifest.string());
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<SuiteEntry> entries;
    for (const auto& item : j.at("entries")) {
        SuiteEntry e;
        e.name = item.at("name");
        e.config_path = item.at("config");
        if (item.contains("expected")) {
            const std::string expected = item["expected"];
            if (expected == "VALID") e.expected = CegisStatus::Valid;
            else if (expected == "BUDGET_EXHAUSTED") e.expected = CegisStatus::BudgetExhausted;
            else throw ConfigError("suite entry " + e.name + ": unsupported expected status");
        }
        if (item.contains("repeats")) e.repeats = item["repeats"];
        if (item.contains("success_threshold")) e.success_threshold = item["success_threshold"];
        if (item.contains("time_ceiling_s")) e.time_ceiling_s = item["time_ceiling_s"];
        if (item.contains("substitute")) e.substitute = item["substitute"];
        entries.push_back(std::move(e));
    }
    return entries;
}

namespace detail {

inline std::string shape_text(const std::vector<int>& widths) {
    std::string s = "[";
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(widths[i]);
    }
    return s + "]";
}

inline std::string acts_text(const std::vector<Activation>& acts) {
    std::string s = "[";
    for (std::size_t i = 0; i < acts.size(); ++i) {
        if (i) s += ",";
        s += acts[i].name();
    }
    return s + "]";
}

}  // namespace detail

// Runs every entry of the suite; per-entry seeds are base_seed + run index,
// so results are reproducible per entry.
inline std::vector<BenchEntryResult> run_suite(const std::string& dir, int repeats_override = 0,
                                               std::uint64_t base_seed = 1,
                                               const std::string& run_root = "") {
    std::vector<BenchEntryResult> results;
    for (const auto& entry : load_suite(dir)) {
        BenchEntryResult result;
        result.entry = entry;
        const std::string config_path = (std::filesystem::path(dir) / entry.config_path).string();
        CegisConfig cfg;
        try {
            cfg = load_config(config_path);
        } catch (const std::exception& e) {
            BenchRun run;
            run.error = e.what();
            result.runs.push_back(run);
            results.push_back(std::move(result));
            continue;
        }
        result.n_vars = cfg.model.n_vars;
        result.n_inputs = cfg.model.n_inputs;
        result.certificate = kind_name(cfg.kind);
        result.neurons = detail::shape_text(cfg.hidden);
        result.activations = detail::acts_text(cfg.activations);
        if (!cfg.hidden_alt.empty()) {
            result.neurons += ", " + detail::shape_text(cfg.hidden_alt);
            result.activations += ", " + detail::acts_text(cfg.activations_alt);
        }
        const int repeats = repeats_override > 0 ? repeats_override : entry.repeats;
        for (int i = 0; i < repeats; ++i) {
            BenchRun run;
            run.seed = base_seed + static_cast<std::uint64_t>(i);
            auto job = cfg;
            job.seed = run.seed;
            if (!run_root.empty())
                job.run_dir = run_root + "/" + entry.name + "-s" + std::to_string(run.seed);
            try {
                auto report = Cegis(job).synthesise();
                run.status = report.status;
                run.total_s = report.total_time_s;
                run.learn_s = report.learn_time_s;
                run.iterations = report.iterations;
                run.error = report.error;
                if (report.status == CegisStatus::Valid)
                    run.sound = soundness_regression(job, *report.certificate);
            } catch (const std::exception& e) {
                run.status = CegisStatus::Error;
                run.error = e.what();
            }
            result.runs.push_back(std::move(run));
        }
        results.push_back(std::move(result));
    }
    return results;
}

// Table with the reporting convention of the experimental protocol:
// min/mean/max total time over successful runs (learning share in brackets)
// and the success rate S.
inline std::string format_table(const std::vector<BenchEntryResult>& results) {
    std::string out;
    char line[512];
    std::snprintf(line, sizeof(line), "%-28s %4s %4s %-11s %-14s %-24s %25s %8s\n", "Benchmark",
                  "N_s", "N_u", "Certificate", "Neurons", "Activations", "T[s] min/mean/max (learn)",
                  "S[%]");
    out += line;
    out += std::string(124, '-') + "\n";
    for (const auto& r : results) {
        std::vector<const BenchRun*> good;
        for (const auto& run : r.runs)
            if (run.status == CegisStatus::Valid && run.sound && run.total_s <= r.entry.time_ceiling_s)
                good.push_back(&run);
        std::string timing = "—";
        if (!good.empty()) {
            double tmin = 1e300, tmax = 0, tsum = 0, lsum = 0;
            for (const auto* run : good) {
                tmin = std::min(tmin, run->total_s);
                tmax = std::max(tmax, run->total_s);
                tsum += run->total_s;
                lsum += run->learn_s;
            }
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.2f/%.2f/%.2f (%.2f)", tmin, tsum / good.size(), tmax,
                          lsum / good.size());
            timing = buf;
        }
        const std::string name = r.entry.name + (r.entry.substitute ? " (substitute)" : "");
        std::snprintf(line, sizeof(line), "%-28s %4d %4d %-11s %-14s %-24s %25s %8.0f\n", name.c_str(),
                      r.n_vars, r.n_inputs, r.certificate.c_str(), r.neurons.c_str(),
                      r.activations.c_str(), timing.c_str(), 100.0 * r.success_rate());
        out += line;
    }
    return out;
}

inline nlohmann::json results_json(const std::vector<BenchEntryResult>& results) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json entry;
        entry["name"] = r.entry.name;
        entry["substitute"] = r.entry.substitute;
        entry["certificate"] = r.certificate;
        entry["n_vars"] = r.n_vars;
        entry["n_inputs"] = r.n_inputs;
        entry["neurons"] = r.neurons;
        entry["activations"] = r.activations;
        entry["success_rate"] = r.success_rate();
        entry["passed"] = r.passed();
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& run : r.runs)
            runs.push_back({{"seed", run.seed},
                            {"status", status_name(run.status)},
                            {"sound", run.sound},
                            {"total_s", run.total_s},
                            {"learn_s", run.learn_s},
                            {"iterations", run.iterations},
                            {"error", run.error}});
        entry["runs"] = runs;
        j.push_back(entry);
    }
    return j;
}

}  // namespace fossil
