// The synthesis orchestrator: sample data, then loop train -> freeze ->
// verify -> enrich until every constraint group is UNSAT or the iteration
// budget is spent.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "fossil/learner.hpp"
#include "fossil/verifier.hpp"

namespace fossil {

struct CegisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CegisConfig {
    std::string name = "job";
    DynamicalModel model;
    CertificateKind kind = CertificateKind::Lyapunov;
    SetAssignment sets;
    std::map<SetRole, std::size_t> n_data;

    std::vector<int> hidden;
    std::vector<Activation> activations;
    std::vector<int> hidden_alt;
    std::vector<Activation> activations_alt;
    std::vector<int> ctrl_layer;  // hidden widths plus the output width
    std::vector<Activation> ctrl_activations;

    SolverKind verifier = SolverKind::Z3;
    std::string solver_executable;  // optional override
    double solver_timeout_s = 180.0;
    double delta = 1e-4;

    int max_iterations = 10;
    TrainConfig train;
    CertificateConstants consts;
    std::uint64_t seed = 0;
    std::string run_dir;  // when set: scripts, transcripts, report.json
    VerifyOptions verify_opts;

    void validate() const {
        if (hidden.empty()) throw CegisError("certificate network needs at least one hidden layer");
        if (hidden.size() != activations.size())
            throw CegisError("ACTIVATION length must match N_HIDDEN_NEURONS length");
        if (two_function(kind) == hidden_alt.empty())
            throw CegisError(two_function(kind)
                                 ? std::string(kind_name(kind)) + " needs the ALT network keys"
                                 : "ALT network keys are only valid for two-function certificates");
        if (!hidden_alt.empty() && hidden_alt.size() != activations_alt.size())
            throw CegisError("ACTIVATION_ALT length must match N_HIDDEN_NEURONS_ALT length");
        if (model.autonomous() != ctrl_layer.empty())
            throw CegisError(model.autonomous() ? "controller configured for an autonomous model"
                                                : "controlled model needs CTRLAYER");
        if (!ctrl_layer.empty()) {
            if (ctrl_layer.size() < 2)
                throw CegisError("CTRLAYER must list hidden widths plus the output width");
            if (ctrl_layer.back() != model.n_inputs)
                throw CegisError("CTRLAYER's last entry must equal the number of control inputs");
            if (ctrl_activations.size() != ctrl_layer.size() - 1)
                throw CegisError("CTRLACTIVATION length must match CTRLAYER's hidden layers");
            for (const auto& a : ctrl_activations)
                if (!a.zero_fixing() || !a.symbolic())
                    throw CegisError("controller activations must be LINEAR, POLY, or TANH");
        }
        if (!kind_supports(kind, model.time_domain))
            throw CegisError(std::string(kind_name(kind)) + " does not support " +
                             time_domain_name(model.time_domain));
        for (SetRole r : required_roles(kind))
            if (!sets.has(r))
                throw CegisError(std::string("missing DOMAINS entry for ") + role_name(r));
        for (const auto& a : activations)
            if (!a.symbolic()) throw CegisError("RELU cannot appear in a certificate network");
        for (const auto& a : activations_alt)
            if (!a.symbolic()) throw CegisError("RELU cannot appear in a certificate network");
        if (max_iterations < 0) throw CegisError("CEGIS_MAX_ITERS must be non-negative");
        for (const auto& [role, domain] : sets.sets)
            if (domain.dim() != model.n_vars)
                throw CegisError(std::string("domain ") + role_name(role) +
                                 " dimension does not match the model");
    }

    // Delta-complete backends cannot separate an isolated equilibrium from
    // its neighborhood, so stability-family synthesis needs a torus domain
    // (verifier-only falsification over other shapes is fine).
    void validate_for_synthesis() const {
        validate();
        if (solver_is_delta(verifier) && origin_anchored(kind) &&
            sets.at(SetRole::XD).kind != DomainKind::Torus)
            throw CegisError(std::string(solver_name(verifier)) +
                             " with a stability-family certificate requires a Torus XD domain");
    }
};

enum class CegisStatus { Valid, BudgetExhausted, Error, Unverified };

inline const char* status_name(CegisStatus s) {
    switch (s) {
        case CegisStatus::Valid: return "VALID";
        case CegisStatus::BudgetExhausted: return "BUDGET_EXHAUSTED";
        case CegisStatus::Error: return "ERROR";
        case CegisStatus::Unverified: return "UNVERIFIED";
    }
    return "?";
}

struct IterationRecord {
    int index = 0;
    double loss = 0.0;
    std::size_t violations = 0;
    int epochs = 0;
    double learn_time_s = 0.0;
    double verify_time_s = 0.0;
    std::vector<VerdictGroupResult> verdicts;
    std::vector<std::pair<std::string, std::vector<double>>> counterexamples;  // data_key, point
    std::size_t spurious_discarded = 0;
};

struct CegisReport {
    CegisStatus status = CegisStatus::Error;
    int iterations = 0;
    std::vector<IterationRecord> trace;
    std::optional<Candidate> candidate;
    std::optional<CandidateExpressions> certificate;
    std::string error;
    double total_time_s = 0.0, learn_time_s = 0.0, verify_time_s = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["status"] = status_name(status);
        j["iterations"] = iterations;
        j["certificate"] = nullptr;
        j["controller"] = nullptr;
        if (certificate) {
            nlohmann::json c;
            c["V"] = print_infix(certificate->V);
            if (certificate->W) c["W"] = print_infix(*certificate->W);
            c["beta"] = certificate->beta;
            c["gamma"] = certificate->gamma;
            j["certificate"] = c;
            if (!certificate->controller.empty()) {
                nlohmann::json ctrl = nlohmann::json::array();
                for (const auto& u : certificate->controller) ctrl.push_back(print_infix(u));
                j["controller"] = ctrl;
            }
        }
        if (candidate) {
            j["networks"]["primary"] = candidate->primary.to_json();
            if (candidate->secondary) j["networks"]["secondary"] = candidate->secondary->to_json();
            if (candidate->controller) j["networks"]["controller"] = candidate->controller->to_json();
        }
        j["timings"] = {{"total_s", total_time_s},
                        {"learn_s", learn_time_s},
                        {"verify_s", verify_time_s}};
        nlohmann::json cexes = nlohmann::json::array();
        nlohmann::json trace_json = nlohmann::json::array();
        for (const auto& it : trace) {
            nlohmann::json t;
            t["iteration"] = it.index;
            t["loss"] = it.loss;
            t["violations"] = it.violations;
            t["epochs"] = it.epochs;
            t["learn_time_s"] = it.learn_time_s;
            t["verify_time_s"] = it.verify_time_s;
            nlohmann::json verdicts = nlohmann::json::array();
            for (const auto& v : it.verdicts)
                verdicts.push_back({{"group", v.group},
                                    {"verdict", verdict_name(v.verdict)},
                                    {"time_s", v.wall_time_s}});
            t["verdicts"] = verdicts;
            t["spurious_discarded"] = it.spurious_discarded;
            trace_json.push_back(t);
            for (const auto& [key, point] : it.counterexamples)
                cexes.push_back({{"iteration", it.index}, {"data_key", key}, {"point", point}});
        }
        j["counterexamples"] = cexes;
        j["trace"] = trace_json;
        if (!error.empty()) j["error"] = error;
        return j;
    }
};

// ---------------------------------------------------------------------------

class Cegis {
public:
    explicit Cegis(CegisConfig cfg)
        : cfg_(std::move(cfg)), problem_(cfg_.kind, cfg_.model, cfg_.sets, cfg_.consts) {
        cfg_.validate();
        check_set_relations(cfg_.sets, derive_seed(cfg_.seed, "set-relations"));
    }

    const SynthesisProblem& problem() const { return problem_; }
    const CegisConfig& config() const { return cfg_; }

    Batches initial_data() const {
        Batches data;
        std::size_t index = 0;
        for (const auto& req : problem_.requirements()) {
            auto it = cfg_.n_data.find(req.count_role);
            const std::size_t count = it != cfg_.n_data.end() ? it->second : 500;
            const std::uint64_t seed = derive_seed(cfg_.seed, "data", index++);
            data[req.key] =
                req.boundary ? req.region.boundary_sample(count, seed) : req.region.sample(count, seed);
        }
        return data;
    }

    Candidate initial_candidate() const {
        Candidate cand{
            Network::init(cfg_.model.n_vars, cfg_.hidden, cfg_.activations, 1,
                          /*bias=*/!origin_anchored(cfg_.kind), derive_seed(cfg_.seed, "net-primary"),
                          level_name(cfg_.kind) ? std::vector<std::string>{*level_name(cfg_.kind)}
                                                : std::vector<std::string>{}),
            {}, {}};
        if (two_function(cfg_.kind))
            cand.secondary = Network::init(cfg_.model.n_vars, cfg_.hidden_alt, cfg_.activations_alt, 1,
                                           /*bias=*/true, derive_seed(cfg_.seed, "net-secondary"));
        if (!cfg_.ctrl_layer.empty()) {
            std::vector<int> ctrl_hidden(cfg_.ctrl_layer.begin(), cfg_.ctrl_layer.end() - 1);
            cand.controller =
                Network::init(cfg_.model.n_vars, ctrl_hidden, cfg_.ctrl_activations,
                              cfg_.ctrl_layer.back(), /*bias=*/false, derive_seed(cfg_.seed, "net-ctrl"));
        }
        return cand;
    }

    // The CEGIS loop.
    CegisReport synthesise() {
        const auto t0 = std::chrono::steady_clock::now();
        CegisReport report;
        try {
            cfg_.validate_for_synthesis();
            Batches data = initial_data();
            Candidate cand = initial_candidate();
            Trainer trainer(problem_, cand);
            for (int iteration = 1; iteration <= cfg_.max_iterations; ++iteration) {
                IterationRecord rec;
                rec.index = iteration;
                auto outcome = trainer.train(cand, data, cfg_.train);
                rec.loss = outcome.final_loss;
                rec.epochs = outcome.epochs_used;
                rec.learn_time_s = outcome.learn_time_s;
                rec.violations = outcome.final_violations;
                report.learn_time_s += outcome.learn_time_s;

                const auto v0 = std::chrono::steady_clock::now();
                CandidateExpressions ce = problem_.freeze(cand);
                VerifyOptions vopts = cfg_.verify_opts;
                if (!cfg_.run_dir.empty())
                    vopts.script_dir = cfg_.run_dir + "/iter_" + pad(iteration);
                auto verdicts = verify_groups(problem_.constraint_groups(ce), cfg_.model.n_vars,
                                              backend(), vopts);
                rec.verify_time_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - v0).count();
                report.verify_time_s += rec.verify_time_s;

                bool valid = true, solver_trouble = false;
                for (const auto& v : verdicts) {
                    if (v.verdict == Verdict::Unsat) continue;
                    valid = false;
                    if (v.verdict == Verdict::Sat || v.verdict == Verdict::DeltaSat) {
                        for (const auto& point : v.points) {
                            const double slack = problem_.condition_slack(ce, point, v.condition_id);
                            const double tol =
                                1e-6 + (v.verdict == Verdict::DeltaSat ? cfg_.delta : 0.0);
                            if (slack <= tol) {
                                enrich(data, point, v.data_key, iteration);
                                rec.counterexamples.emplace_back(v.data_key, point);
                            } else {
                                ++rec.spurious_discarded;  // numerically non-violating; logged only
                            }
                        }
                    } else {
                        solver_trouble = true;  // TIMEOUT / SOLVER_ERROR: recorded, never swallowed
                        report.error += (report.error.empty() ? "" : "; ") + v.group + ": " +
                                        verdict_name(v.verdict);
                    }
                }
                rec.verdicts = std::move(verdicts);
                report.trace.push_back(std::move(rec));
                report.iterations = iteration;
                if (valid) {
                    report.status = CegisStatus::Valid;
                    report.candidate = cand;
                    report.certificate = ce;
                    break;
                }
                (void)solver_trouble;
            }
            if (report.status != CegisStatus::Valid) {
                report.status = CegisStatus::BudgetExhausted;
                report.candidate = cand;
                report.certificate = problem_.freeze(cand);
            }
        } catch (const std::exception& e) {
            report.status = CegisStatus::Error;
            report.error = e.what();
        }
        report.total_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_report(report);
        return report;
    }

    // Verifier-only mode: no training, user-supplied (or frozen) expressions.
    CegisReport verify_only(const CandidateExpressions& ce) {
        const auto t0 = std::chrono::steady_clock::now();
        CegisReport report;
        try {
            IterationRecord rec;
            rec.index = 1;
            VerifyOptions vopts = cfg_.verify_opts;
            if (!cfg_.run_dir.empty()) vopts.script_dir = cfg_.run_dir + "/iter_001";
            auto verdicts =
                verify_groups(problem_.constraint_groups(ce), cfg_.model.n_vars, backend(), vopts);
            bool valid = true;
            for (const auto& v : verdicts) {
                if (v.verdict == Verdict::Unsat) continue;
                valid = false;
                for (const auto& point : v.points) rec.counterexamples.emplace_back(v.data_key, point);
                if (v.verdict == Verdict::Timeout || v.verdict == Verdict::SolverError)
                    report.error += (report.error.empty() ? "" : "; ") + v.group + ": " +
                                    verdict_name(v.verdict);
            }
            rec.verify_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rec.verdicts = std::move(verdicts);
            report.verify_time_s = rec.verify_time_s;
            report.trace.push_back(std::move(rec));
            report.iterations = 1;
            report.status = valid ? CegisStatus::Valid : CegisStatus::BudgetExhausted;
            report.certificate = ce;
        } catch (const std::exception& e) {
            report.status = CegisStatus::Error;
            report.error = e.what();
        }
        report.total_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_report(report);
        return report;
    }

    // Learner-only mode: trains once and reports the candidate UNVERIFIED.
    CegisReport learn_only() {
        const auto t0 = std::chrono::steady_clock::now();
        CegisReport report;
        try {
            Batches data = initial_data();
            Candidate cand = initial_candidate();
            Trainer trainer(problem_, cand);
            auto outcome = trainer.train(cand, data, cfg_.train);
            IterationRecord rec;
            rec.index = 1;
            rec.loss = outcome.final_loss;
            rec.epochs = outcome.epochs_used;
            rec.learn_time_s = outcome.learn_time_s;
            rec.violations = outcome.final_violations;
            report.trace.push_back(rec);
            report.iterations = 1;
            report.learn_time_s = outcome.learn_time_s;
            report.status = CegisStatus::Unverified;
            report.candidate = cand;
            report.certificate = problem_.freeze(cand);
        } catch (const std::exception& e) {
            report.status = CegisStatus::Error;
            report.error = e.what();
        }
        report.total_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_report(report);
        return report;
    }

    // Adds the counterexample plus 50 membership-filtered Gaussian neighbors
    // to the dataset of the violated condition's region.
    void enrich(Batches& data, const std::vector<double>& point, const std::string& data_key,
                int iteration) {
        const DataRequirement& req = problem_.requirement(data_key);
        auto& dest = data[data_key];
        dest.insert(dest.end(), point.begin(), point.end());
        const double sigma = 0.05 * req.region.characteristic_radius();
        Rng rng(derive_seed(cfg_.seed, "enrich", static_cast<std::uint64_t>(iteration) * 4096 +
                                                     enrich_counter_++));
        std::vector<double> neighbor(point.size());
        for (int k = 0; k < 50; ++k) {
            for (std::size_t i = 0; i < point.size(); ++i)
                neighbor[i] = point[i] + sigma * rng.gaussian();
            if (req.region.contains(neighbor)) dest.insert(dest.end(), neighbor.begin(), neighbor.end());
        }
    }

    SolverBackend backend() const {
        return make_backend(cfg_.verifier, cfg_.solver_executable, cfg_.solver_timeout_s, cfg_.delta);
    }

private:
    static std::string pad(int v) {
        std::string s = std::to_string(v);
        while (s.size() < 3) s.insert(s.begin(), '0');
        return s;
    }

    void write_report(const CegisReport& report) const {
        if (cfg_.run_dir.empty()) return;
        std::filesystem::create_directories(cfg_.run_dir);
        std::ofstream out(cfg_.run_dir + "/report.json");
        out << report.to_json().dump(2) << "\n";
    }

    CegisConfig cfg_;
    SynthesisProblem problem_;
    std::uint64_t mutable enrich_counter_ = 0;
};

// Independent re-verification of a reported certificate: fresh solver
// processes over re-emitted scripts.  For polynomial certificates the check
// additionally runs on the other polynomial backend when one is installed.
inline bool soundness_regression(const CegisConfig& cfg, const CandidateExpressions& ce,
                                 std::string* detail = nullptr) {
    SynthesisProblem problem(cfg.kind, cfg.model, cfg.sets, cfg.consts);
    auto groups = problem.constraint_groups(ce);
    auto check_with = [&](SolverKind kind) {
        auto backend = make_backend(kind, kind == cfg.verifier ? cfg.solver_executable : "",
                                    cfg.solver_timeout_s, cfg.delta);
        auto results = verify_groups(groups, cfg.model.n_vars, backend);
        if (!all_unsat(results)) {
            if (detail) {
                for (const auto& r : results)
                    if (r.verdict != Verdict::Unsat)
                        *detail += std::string(solver_name(kind)) + ":" + r.group + "=" +
                                   verdict_name(r.verdict) + " ";
            }
            return false;
        }
        return true;
    };
    if (!check_with(cfg.verifier)) return false;
    bool polynomial = formula_is_polynomial(groups.front().formula);
    for (const auto& g : groups) polynomial = polynomial && formula_is_polynomial(g.formula);
    if (polynomial) {
        const SolverKind other = cfg.verifier == SolverKind::Z3 ? SolverKind::Cvc5 : SolverKind::Z3;
        if (resolve_solver_executable(other))
            if (!check_with(other)) return false;
    }
    return true;
}

}  // namespace fossil
