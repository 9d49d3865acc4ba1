// Acceptance suite: one checkable criterion per entry, each printing a
// single PASS/FAIL line.  Criteria that name a specific external solver run
// that solver when its binary is resolvable and fail with a diagnostic when
// it is not; each such criterion has a clearly labeled substitute entry
// (suffix "s") that runs the same pipeline shape on the bundled ICP backend
// so the machinery is exercised end to end either way.
//
//   fossil-acceptance --list
//   fossil-acceptance --run c6
//   fossil-acceptance            (everything)

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "fossil/bench.hpp"
#include "fossil/config.hpp"

using namespace fossil;

namespace {

std::string g_config_dir = "configs";
std::string g_data_dir = "tests/data";

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct SeedStats {
    int valid = 0;
    int sound = 0;
    double max_time = 0.0;
    std::string first_error;
};

SeedStats run_seeds(CegisConfig cfg, int seeds, bool check_soundness) {
    SeedStats stats;
    for (int s = 1; s <= seeds; ++s) {
        cfg.seed = static_cast<std::uint64_t>(s);
        auto report = Cegis(cfg).synthesise();
        stats.max_time = std::max(stats.max_time, report.total_time_s);
        if (report.status == CegisStatus::Valid) {
            ++stats.valid;
            if (!check_soundness || soundness_regression(cfg, *report.certificate)) ++stats.sound;
        } else if (stats.first_error.empty() && !report.error.empty()) {
            stats.first_error = report.error;
        }
    }
    return stats;
}

std::string seed_summary(const SeedStats& s, int seeds) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d/%d VALID (%d sound), max %.1f s", s.valid, seeds, s.sound,
                  s.max_time);
    return buf;
}

// Closed-loop numeric/symbolic coherence at 1000 seeded points.
bool closed_loop_coherent(const CegisConfig& cfg, const Candidate& cand, double tol, double* worst) {
    auto cl = close_loop(cfg.model, *cand.controller);
    std::vector<ExprTape> tapes;
    for (const auto& component : cl.closed.field) tapes.push_back(ExprTape::compile(component));
    FieldEvaluator numeric(cfg.model, &*cand.controller);
    std::vector<double> lo, hi;
    cfg.sets.at(SetRole::XD).bounding_box(lo, hi);
    Rng rng(99);
    std::vector<double> f(cfg.model.n_vars), scratch;
    double max_err = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> x(cfg.model.n_vars);
        for (int d = 0; d < cfg.model.n_vars; ++d) x[d] = rng.uniform(lo[d], hi[d]);
        numeric.eval_point(x, f);
        for (int d = 0; d < cfg.model.n_vars; ++d)
            max_err = std::max(max_err, std::fabs(f[d] - tapes[d].eval(x, {}, scratch)));
    }
    if (worst) *worst = max_err;
    return max_err < tol;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome named_solver_missing(SolverKind kind) {
    return {false, std::string(solver_name(kind)) + " executable not found (set " +
                       std::string(kind == SolverKind::Z3      ? "FOSSIL_Z3"
                                   : kind == SolverKind::Cvc5  ? "FOSSIL_CVC5"
                                   : kind == SolverKind::Dreal ? "FOSSIL_DREAL"
                                                               : "FOSSIL_ICP") +
                       " or install it); substitute run covers the pipeline"};
}

Outcome c1() {
    if (!resolve_solver_executable(SolverKind::Z3)) return named_solver_missing(SolverKind::Z3);
    auto cfg = load_config(g_config_dir + "/lyap_eq10_z3.yaml");
    auto stats = run_seeds(cfg, 10, true);
    Outcome out;
    out.pass = stats.sound >= 8 && stats.max_time <= 120.0;
    out.detail = seed_summary(stats, 10);
    return out;
}

Outcome c1s() {
    auto cfg = load_config(g_config_dir + "/bench/desk/lin2_lyap_icp.yaml");
    auto stats = run_seeds(cfg, 10, true);
    Outcome out;
    out.pass = stats.sound >= 8 && stats.max_time <= 120.0;
    out.detail = seed_summary(stats, 10) + " [substitute: exp-stable linear system, Torus, ICP]";
    return out;
}

Outcome c2() {
    CegisConfig cfg;
    cfg.name = "falsify-energy";
    cfg.model = DynamicalModel::parse({"x1 - x0**3", "-x0"}, 2, 0, TimeDomain::Continuous);
    cfg.kind = CertificateKind::Lyapunov;
    cfg.sets.sets.emplace(SetRole::XD, Domain::sphere({0, 0}, 1.0));
    cfg.hidden = {5};
    cfg.activations = {Activation::square()};
    cfg.verifier = SolverKind::Icp;
    cfg.consts.strict_lyapunov_decrease = true;
    Cegis cegis(cfg);
    auto ce = make_expressions(cfg, "x0**2 + x1**2", "", {});
    auto report = cegis.verify_only(ce);
    for (const auto& v : report.trace.at(0).verdicts) {
        if (v.group != "decrease") continue;
        if (v.verdict != Verdict::Sat && v.verdict != Verdict::DeltaSat)
            return {false, std::string("decrease group was ") + verdict_name(v.verdict)};
        if (v.points.empty()) return {false, "no counterexample point"};
        const auto& p = v.points[0];
        const double vdot = -2.0 * std::pow(p[0], 4.0);  // hand expansion
        char buf[128];
        std::snprintf(buf, sizeof(buf), "cex x0=%.2e, Vdot=%.2e", p[0], vdot);
        return {std::fabs(p[0]) <= 1e-6 && vdot >= -1e-6, buf};
    }
    return {false, "decrease group not present"};
}

Outcome c3() {
    CegisConfig cfg;
    cfg.name = "toy-barrier";
    cfg.model = DynamicalModel::parse({"-x0"}, 1, 0, TimeDomain::Continuous);
    cfg.kind = CertificateKind::Barrier;
    cfg.sets.sets.emplace(SetRole::XD, Domain::rectangle({-3}, {3}));
    cfg.sets.sets.emplace(SetRole::XI, Domain::rectangle({-0.5}, {0.5}));
    cfg.sets.sets.emplace(SetRole::XU, Domain::rectangle({2}, {3}));
    cfg.hidden = {2};
    cfg.activations = {Activation::linear()};
    cfg.verifier = SolverKind::Icp;
    Cegis cegis(cfg);
    auto ce = make_expressions(cfg, "x0 - 1", "", {});
    auto report = cegis.verify_only(ce);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s in %.2f s", status_name(report.status),
                  report.total_time_s);
    return {report.status == CegisStatus::Valid && report.total_time_s <= 10.0, buf};
}

Outcome run_c4(const std::string& config, const char* label) {
    auto cfg = load_config(config);
    SeedStats stats;
    double worst_coherence = 0;
    bool coherent = true;
    for (int s = 1; s <= 10; ++s) {
        auto job = cfg;
        job.seed = static_cast<std::uint64_t>(s);
        auto report = Cegis(job).synthesise();
        stats.max_time = std::max(stats.max_time, report.total_time_s);
        if (report.status != CegisStatus::Valid) continue;
        ++stats.valid;
        if (soundness_regression(job, *report.certificate)) ++stats.sound;
        double err = 0;
        if (!closed_loop_coherent(job, *report.candidate, 1e-9, &err)) coherent = false;
        worst_coherence = std::max(worst_coherence, err);
    }
    Outcome out;
    out.pass = stats.sound >= 5 && stats.max_time <= 300.0 && coherent;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s, coherence max |err| = %.1e%s",
                  seed_summary(stats, 10).c_str(), worst_coherence, label);
    out.detail = buf;
    return out;
}

Outcome c4() {
    if (!resolve_solver_executable(SolverKind::Dreal)) return named_solver_missing(SolverKind::Dreal);
    return run_c4(g_config_dir + "/ctrl_lyap_eq11_dreal.yaml", "");
}

Outcome c4s() { return run_c4(g_config_dir + "/bench/desk/ctrl_lyap_eq11_icp.yaml", " [substitute: ICP]"); }

CegisConfig discrete_cfg(SolverKind backend) {
    CegisConfig cfg;
    cfg.name = "discrete-halving";
    cfg.model = DynamicalModel::parse({"0.5*x0", "0.5*x1"}, 2, 0, TimeDomain::Discrete);
    cfg.kind = CertificateKind::Lyapunov;
    if (solver_is_delta(backend)) {
        cfg.sets.sets.emplace(SetRole::XD, Domain::torus({0, 0}, 1.0, 0.1));
    } else {
        cfg.sets.sets.emplace(SetRole::XD, Domain::sphere({0, 0}, 1.0));
    }
    cfg.n_data[SetRole::XD] = 500;
    cfg.hidden = {2};
    cfg.activations = {Activation::square()};
    cfg.verifier = backend;
    return cfg;
}

Outcome c5() {
    if (!resolve_solver_executable(SolverKind::Z3)) return named_solver_missing(SolverKind::Z3);
    auto stats = run_seeds(discrete_cfg(SolverKind::Z3), 10, true);
    return {stats.sound == 10 && stats.max_time <= 30.0, seed_summary(stats, 10)};
}

Outcome c5s() {
    auto stats = run_seeds(discrete_cfg(SolverKind::Icp), 10, true);
    return {stats.sound == 10 && stats.max_time <= 30.0,
            seed_summary(stats, 10) + " [substitute: Torus, ICP]"};
}

Outcome c6() {
    Outcome out;
    out.pass = true;
    for (const char* name : {"rwa_lin2_icp.yaml", "rswa_lin2_icp.yaml", "rar_lin2_icp.yaml"}) {
        auto cfg = load_config(g_config_dir + "/bench/desk/" + name);
        auto stats = run_seeds(cfg, 10, /*check_soundness=*/true);
        const bool ok = stats.valid >= 5 && stats.sound == stats.valid && stats.max_time <= 600.0;
        out.pass = out.pass && ok;
        out.detail += std::string(kind_name(cfg.kind)) + ": " + seed_summary(stats, 10) + "; ";
    }
    return out;
}

Outcome run_c7(const std::string& config, const char* label) {
    auto cfg = load_config(config);
    auto stats = run_seeds(cfg, 10, true);
    return {stats.sound >= 3 && stats.max_time <= 900.0, seed_summary(stats, 10) + label};
}

Outcome c7() {
    if (!resolve_solver_executable(SolverKind::Dreal)) return named_solver_missing(SolverKind::Dreal);
    return run_c7(g_config_dir + "/pendulum_rar.yaml", "");
}

Outcome c7s() { return run_c7(g_config_dir + "/bench/desk/pendulum_rar_icp.yaml", " [substitute: ICP]"); }

// Property suites: round-trip, derivative oracle, sampler coherence,
// emission determinism, end-to-end reproducibility.
Outcome c8() {
    std::string fail;

    {  // expression round-trip on 10^4 generated trees
        Rng rng(811);
        std::function<Expr(int)> gen = [&](int depth) -> Expr {
            if (depth <= 0 || rng.next_double() < 0.3) {
                const double pick = rng.next_double();
                if (pick < 0.4) return ex::constant(rng.uniform(-3, 3));
                return ex::state(static_cast<int>(rng.next_u64() % 3));
            }
            switch (rng.next_u64() % 9) {
                case 0: return ex::neg(gen(depth - 1));
                case 1: return ex::add(gen(depth - 1), gen(depth - 1));
                case 2: return ex::sub(gen(depth - 1), gen(depth - 1));
                case 3: return ex::mul(gen(depth - 1), gen(depth - 1));
                case 4: return ex::divide(gen(depth - 1), gen(depth - 1));
                case 5: return ex::pow_i(gen(depth - 1), 2 + static_cast<int>(rng.next_u64() % 3));
                case 6: return ex::sin(gen(depth - 1));
                case 7: return ex::sigmoid(gen(depth - 1));
                default: return ex::exp(gen(depth - 1));
            }
        };
        std::function<bool(const Expr&)> finite_constants = [&](const Expr& e) -> bool {
            if (e->op == ExprOp::Constant) return std::isfinite(e->value);
            if (e->a && !finite_constants(e->a)) return false;
            if (e->b && !finite_constants(e->b)) return false;
            return true;
        };
        for (int i = 0; i < 10000 && fail.empty(); ++i) {
            Expr e = gen(5);
            if (!finite_constants(e)) continue;  // folding hit inf; not printable
            if (!expr_equal(e, parse_expr(print_infix(e), 3, 0))) fail = "round-trip mismatch";
        }
    }

    if (fail.empty()) {  // derivative vs central differences, 1e3 cases
        Rng rng(813);
        int checked = 0;
        for (int i = 0; i < 1000; ++i) {
            Expr e = ex::add(ex::mul(ex::constant(rng.uniform(-2, 2)),
                                     ex::pow_i(ex::state(0), 2 + static_cast<int>(rng.next_u64() % 2))),
                             ex::sin(ex::mul(ex::constant(rng.uniform(-2, 2)), ex::state(0))));
            Expr d = differentiate(e, 0);
            double x[1] = {rng.uniform(-1.5, 1.5)};
            const double h = 1e-5;
            double xp[1] = {x[0] + h}, xm[1] = {x[0] - h};
            const double fd = (eval_point(e, xp) - eval_point(e, xm)) / (2 * h);
            const double an = eval_point(d, x);
            if (std::fabs(fd - an) > 1e-5 * std::max({1.0, std::fabs(fd), std::fabs(an)})) {
                fail = "derivative/finite-difference mismatch";
                break;
            }
            ++checked;
        }
        if (checked < 1000 && fail.empty()) fail = "derivative check incomplete";
    }

    if (fail.empty()) {  // sampler/predicate coherence, 1e4 points per kind
        std::vector<Domain> domains = {
            Domain::sphere({0.5, -1}, 2.0),
            Domain::sphere({0, 0}, 1.0, false),
            Domain::rectangle({-1, 0}, {2, 3}),
            Domain::rectangle({-1, 0}, {2, 3}, false),
            Domain::torus({0, 0}, 1.5, 0.2),
            Domain::ellipsoid({1, 1}, {0.5, 2.0}),
            Domain::difference(Domain::rectangle({-2, -2}, {2, 2}), Domain::sphere({0, 0}, 1.0)),
        };
        for (const auto& d : domains) {
            Formula f = d.membership();
            auto pts = d.sample(10000, 4242);
            for (int i = 0; i < 10000; ++i) {
                std::span<const double> p(pts.data() + 2 * i, 2);
                if (!formula_holds(f, p)) {
                    fail = "sampler/predicate incoherence on " + d.to_text();
                    break;
                }
            }
            if (!fail.empty()) break;
        }
    }

    if (fail.empty()) {  // byte-identical script emission
        auto cfg = discrete_cfg(SolverKind::Icp);
        Cegis cegis(cfg);
        auto cand = cegis.initial_candidate();
        auto groups1 = cegis.problem().constraint_groups(cegis.problem().freeze(cand));
        auto groups2 = cegis.problem().constraint_groups(cegis.problem().freeze(cand));
        for (std::size_t i = 0; i < groups1.size(); ++i)
            if (emit_script(SolverKind::Icp, groups1[i], 2) != emit_script(SolverKind::Icp, groups2[i], 2))
                fail = "script emission not byte-stable";
    }

    if (fail.empty()) {  // seeded end-to-end reproducibility of iteration traces
        auto trace_of = [&] {
            auto cfg = discrete_cfg(SolverKind::Icp);
            cfg.seed = 17;
            auto report = Cegis(cfg).synthesise();
            std::string trace;
            for (const auto& it : report.trace) {
                trace += shortest_decimal(it.loss) + "|";
                for (const auto& v : it.verdicts) trace += v.group + "=" + verdict_name(v.verdict) + ";";
            }
            return trace;
        };
        if (trace_of() != trace_of()) fail = "iteration trace not reproducible";
    }

    return {fail.empty(), fail.empty() ? "round-trip, derivative, sampler, emission, reproducibility"
                                       : fail};
}

Outcome corpus_agreement(SolverKind a, SolverKind b) {
    auto backend_a = make_backend(a);
    auto backend_b = make_backend(b);
    backend_a.timeout_s = backend_b.timeout_s = 60;
    int compared = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(std::filesystem::path(g_data_dir) / "corpus")) {
        if (entry.path().extension() != ".smt2") continue;
        std::ifstream in(entry.path());
        std::stringstream script;
        script << in.rdbuf();
        auto sat_bucket = [](Verdict v) { return v == Verdict::Sat || v == Verdict::DeltaSat; };
        auto ra = run_solver(backend_a, script.str(), 3);
        auto rb = run_solver(backend_b, script.str(), 3);
        if (ra.verdict == Verdict::SolverError || rb.verdict == Verdict::SolverError)
            return {false, entry.path().filename().string() + ": solver error"};
        if (sat_bucket(ra.verdict) != sat_bucket(rb.verdict) ||
            (ra.verdict == Verdict::Unsat) != (rb.verdict == Verdict::Unsat))
            return {false, entry.path().filename().string() + ": " +
                               std::string(verdict_name(ra.verdict)) + " vs " +
                               verdict_name(rb.verdict)};
        ++compared;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d scripts, identical verdicts under %s and %s", compared,
                  solver_name(a), solver_name(b));
    return {compared == 20, buf};
}

Outcome c9() {
    if (!resolve_solver_executable(SolverKind::Z3)) return named_solver_missing(SolverKind::Z3);
    if (!resolve_solver_executable(SolverKind::Cvc5)) return named_solver_missing(SolverKind::Cvc5);
    return corpus_agreement(SolverKind::Z3, SolverKind::Cvc5);
}

// Substitute: the same corpus against its constructed truth under ICP.
Outcome c9s() {
    auto backend = make_backend(SolverKind::Icp);
    int checked = 0;
    for (const auto& entry :
         std::filesystem::directory_iterator(std::filesystem::path(g_data_dir) / "corpus")) {
        if (entry.path().extension() != ".smt2") continue;
        std::ifstream in(entry.path());
        std::stringstream script;
        script << in.rdbuf();
        auto r = run_solver(backend, script.str(), 3);
        const bool expect_sat = entry.path().stem().string().find("_sat") != std::string::npos;
        const bool got_sat = r.verdict == Verdict::Sat || r.verdict == Verdict::DeltaSat;
        if (expect_sat != got_sat || (!expect_sat && r.verdict != Verdict::Unsat))
            return {false,
                    entry.path().filename().string() + " answered " + verdict_name(r.verdict)};
        ++checked;
    }
    return {checked == 20, "20 scripts match their constructed verdicts [substitute: ICP]"};
}

struct Criterion {
    const char* id;
    const char* description;
    std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {"c1", "Lyapunov synthesis, cubic system (Sphere, Z3), >=8/10 seeds", c1},
        {"c1s", "substitute: same template on the linear system (Torus, ICP)", c1s},
        {"c2", "verifier-only falsification of the energy candidate (strict decrease)", c2},
        {"c3", "verifier-only validation of the 1D toy barrier, all UNSAT <= 10 s", c3},
        {"c4", "controller co-synthesis, cubic system (Torus, dReal), >=5/10 seeds", c4},
        {"c4s", "substitute: controller co-synthesis on ICP", c4s},
        {"c5", "discrete-time halving map (Z3), 10/10 seeds <= 30 s", c5},
        {"c5s", "substitute: discrete-time halving map (Torus, ICP)", c5s},
        {"c6", "RWA/RSWA/RAR suite on the linear system, >=5/10 seeds each + soundness", c6},
        {"c7", "stretch: pendulum RAR case study (dReal), >=3/10 seeds", c7},
        {"c7s", "substitute: pendulum RAR case study on ICP", c7s},
        {"c8", "property suites: round-trip, derivatives, samplers, emission, reproducibility", c8},
        {"c9", "backend agreement on the 20-script corpus (Z3 vs CVC5)", c9},
        {"c9s", "substitute: corpus verdicts match construction under ICP", c9s},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("FOSSIL_CONFIG_DIR")) g_config_dir = env;
    if (const char* env = std::getenv("FOSSIL_TEST_DATA")) g_data_dir = env;
    std::string only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--list") == 0) {
            for (const auto& c : criteria()) std::printf("%-4s %s\n", c.id, c.description);
            return 0;
        }
        if (std::strcmp(argv[i], "--run") == 0 && i + 1 < argc) only = argv[++i];
    }
    int failures = 0, ran = 0;
    for (const auto& c : criteria()) {
        if (!only.empty() && only != c.id) continue;
        ++ran;
        Outcome outcome;
        try {
            outcome = c.fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %-70s %s%s%s\n", c.id, c.description, outcome.pass ? "PASS" : "FAIL",
                    outcome.detail.empty() ? "" : " — ", outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion: %s\n", only.c_str());
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
