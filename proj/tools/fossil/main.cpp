// Command line frontend: YAML-configured certificate synthesis, verification
// and learning, benchmarking, and trajectory export.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fossil/bench.hpp"
#include "fossil/config.hpp"

namespace {

using namespace fossil;

int finish(const CegisReport& report, const std::string& out_path) {
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << report.to_json().dump(2) << "\n";
    }
    std::cout << "status: " << status_name(report.status) << " (" << report.iterations
              << " iteration" << (report.iterations == 1 ? "" : "s") << ", "
              << report.total_time_s << " s)\n";
    if (report.certificate) {
        std::cout << "V = " << print_infix(report.certificate->V) << "\n";
        if (report.certificate->W) std::cout << "W = " << print_infix(*report.certificate->W) << "\n";
        for (std::size_t i = 0; i < report.certificate->controller.size(); ++i)
            std::cout << "u" << i << " = " << print_infix(report.certificate->controller[i]) << "\n";
    }
    if (!report.error.empty()) std::cout << "diagnostics: " << report.error << "\n";
    return report.status == CegisStatus::Error ? 1 : 0;
}

std::string default_run_dir(const CegisConfig& cfg) {
    return "fossil-runs/" + cfg.name + "-s" + std::to_string(cfg.seed);
}

void snapshot_config(const CegisConfig& cfg) {
    if (cfg.run_dir.empty()) return;
    std::filesystem::create_directories(cfg.run_dir);
    std::ofstream out(cfg.run_dir + "/config.yaml");
    out << dump_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural certificate synthesis for dynamical models"};
    app.require_subcommand(1);

    std::string config_path, out_path, run_dir, cert_path, x0_text;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int max_iters = -1, repeats = 0;
    double horizon = 10.0, dt = 0.01;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "YAML configuration file")->required();
        cmd->add_option("--out", out_path, "write the report JSON here");
        cmd->add_option("--run-dir", run_dir, "run directory (scripts, transcripts, report)");
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](const std::uint64_t& v) { seed = v; seed_set = true; },
               "override the configured seed");
    };

    auto* synth = app.add_subcommand("synth", "synthesise a certificate (and controller)");
    add_common(synth);
    synth->add_option("--max-iters", max_iters, "override CEGIS_MAX_ITERS");

    auto* verify = app.add_subcommand("verify", "verify a given certificate, no training");
    add_common(verify);
    verify->add_option("--certificate", cert_path,
                       "JSON file with infix expressions: {\"V\": ..., \"W\"?, \"beta\"?, "
                       "\"gamma\"?, \"controller\"?: [...]}")
        ->required();

    auto* learn = app.add_subcommand("learn", "train a candidate, skip verification");
    add_common(learn);

    auto* bench = app.add_subcommand("bench", "run a benchmark suite directory");
    std::string suite_dir;
    std::uint64_t bench_seed = 1;
    bench->add_option("suite", suite_dir, "directory containing suite.json")->required();
    bench->add_option("--repeats", repeats, "override per-entry repeat counts");
    bench->add_option("--seed", bench_seed, "base seed (run i uses seed base+i)");
    bench->add_option("--out", out_path, "write raw results JSON here");

    auto* simulate_cmd = app.add_subcommand("simulate", "export a trajectory CSV");
    add_common(simulate_cmd);
    simulate_cmd->add_option("--x0", x0_text, "initial state, comma separated")->required();
    simulate_cmd->add_option("--T", horizon, "time horizon (steps when discrete)");
    simulate_cmd->add_option("--dt", dt, "integration step");
    simulate_cmd->add_option("--certificate", cert_path,
                             "certificate JSON supplying the controller for controlled models");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) {
            auto results = run_suite(suite_dir, repeats, bench_seed);
            std::cout << format_table(results);
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                out << results_json(results).dump(2) << "\n";
            }
            for (const auto& r : results)
                if (!r.passed()) return 1;
            return 0;
        }

        CegisConfig cfg = load_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (max_iters >= 0) cfg.max_iterations = max_iters;
        cfg.run_dir = !run_dir.empty() ? run_dir : default_run_dir(cfg);

        if (simulate_cmd->parsed()) {
            std::vector<double> x0;
            std::stringstream ss(x0_text);
            std::string item;
            while (std::getline(ss, item, ',')) x0.push_back(std::stod(item));
            DynamicalModel model = cfg.model;
            if (!model.autonomous()) {
                if (cert_path.empty())
                    throw ConfigError("controlled model: supply --certificate with a controller");
                std::ifstream in(cert_path);
                if (!in) throw ConfigError("cannot open certificate file: " + cert_path);
                auto j = nlohmann::json::parse(in);
                std::vector<std::string> ctrl = j.at("controller");
                std::vector<Expr> u;
                for (const auto& text : ctrl) u.push_back(parse_expr(text, model.n_vars, 0));
                VectorExpression closed;
                for (const auto& component : model.field)
                    closed.push_back(substitute(component, {}, u));
                model = DynamicalModel{model.n_vars, 0, std::move(closed), model.time_domain};
            }
            auto traj = simulate(model, x0, horizon, dt);
            const std::string csv = traj.to_csv();
            if (out_path.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(out_path);
                out << csv;
            }
            if (traj.truncated) std::cerr << "warning: trajectory left the finite range early\n";
            return 0;
        }

        snapshot_config(cfg);
        Cegis cegis(cfg);
        if (synth->parsed()) return finish(cegis.synthesise(), out_path);
        if (learn->parsed()) return finish(cegis.learn_only(), out_path);

        // verify
        std::ifstream in(cert_path);
        if (!in) throw ConfigError("cannot open certificate file: " + cert_path);
        auto j = nlohmann::json::parse(in);
        std::vector<std::string> ctrl;
        if (j.contains("controller")) ctrl = j["controller"].get<std::vector<std::string>>();
        auto ce = make_expressions(cfg, j.at("V"), j.value("W", ""), ctrl, j.value("beta", 0.0),
                                   j.value("gamma", 0.0));
        return finish(cegis.verify_only(ce), out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
