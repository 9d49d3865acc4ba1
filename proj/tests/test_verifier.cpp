#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fossil/verifier.hpp"

using namespace fossil;

namespace {

SolverBackend icp_backend(double timeout_s = 60.0) {
    auto backend = make_backend(SolverKind::Icp);
    backend.timeout_s = timeout_s;
    return backend;
}

// 1D toy barrier: dx = -x, B = x - 1, XD = [-3,3], XI = [-0.5,0.5], XU = [2,3].
SynthesisProblem toy_barrier_problem() {
    auto model = DynamicalModel::parse({"-x0"}, 1, 0, TimeDomain::Continuous);
    SetAssignment sets;
    sets.sets.emplace(SetRole::XD, Domain::rectangle({-3}, {3}));
    sets.sets.emplace(SetRole::XI, Domain::rectangle({-0.5}, {0.5}));
    sets.sets.emplace(SetRole::XU, Domain::rectangle({2}, {3}));
    return SynthesisProblem(CertificateKind::Barrier, model, sets);
}

Candidate toy_barrier_candidate() {
    Network net = Network::init(1, {}, {}, 1, true, 1);
    net.weights[0] = {1.0};
    net.biases[0] = {-1.0};
    return Candidate{net, {}, {}};
}

Network energy_net() {
    Network net = Network::init(2, {2}, {Activation::square()}, 1, false, 1);
    net.weights[0] = {1, 0, 0, 1};
    net.weights[1] = {1, 1};
    return net;
}

}  // namespace

TEST_CASE("emit_script: structure, order, and determinism") {
    ConstraintGroup g{"unit", fm::atom(ex::state(0), Rel::Le, 1.0), "cond", "domain"};
    const std::string script = emit_script(SolverKind::Z3, g, 2);
    const auto logic = script.find("(set-logic QF_NRA)");
    const auto declare0 = script.find("(declare-const x0 Real)");
    const auto declare1 = script.find("(declare-const x1 Real)");
    const auto assert_pos = script.find("(assert ");
    const auto check = script.find("(check-sat)");
    const auto model = script.find("(get-model)");
    CHECK(logic != std::string::npos);
    CHECK(declare0 != std::string::npos);
    CHECK(logic < declare0);
    CHECK(declare0 < declare1);
    CHECK(declare1 < assert_pos);
    CHECK(assert_pos < check);
    CHECK(check < model);

    CHECK(emit_script(SolverKind::Icp, g, 2) == emit_script(SolverKind::Icp, g, 2));

    // Sphere membership appears as the documented conjunct.
    Domain sphere = Domain::sphere({0, 0}, 1.0);
    ConstraintGroup g2{"sphere", sphere.membership(), "cond", "domain"};
    CHECK(emit_script(SolverKind::Z3, g2, 2).find("(<= (+ (* x0 x0) (* x1 x1)) 1.0)") !=
          std::string::npos);
}

TEST_CASE("capability gating: transcendental groups are rejected for Z3/CVC5") {
    ConstraintGroup g{"sig", fm::atom(ex::sigmoid(ex::state(0)), Rel::Ge, 0.5), "cond", "domain"};
    CHECK_THROWS_WITH_AS(static_cast<void>(emit_script(SolverKind::Z3, g, 1)),
                         doctest::Contains("sigmoid"), VerifierError);
    CHECK_NOTHROW(static_cast<void>(emit_script(SolverKind::Dreal, g, 1)));
    CHECK_NOTHROW(static_cast<void>(emit_script(SolverKind::Icp, g, 1)));
}

TEST_CASE("run_solver: trivial sat and unsat scripts through fossil-icp") {
    auto backend = icp_backend();
    ConstraintGroup unsat_g{
        "contradiction",
        fm::conj({fm::atom(ex::state(0), Rel::Gt, 0.0), fm::atom(ex::state(0), Rel::Lt, -1.0)}),
        "cond", "domain"};
    auto r1 = run_solver(backend, emit_script(SolverKind::Icp, unsat_g, 1), 1);
    CHECK(r1.verdict == Verdict::Unsat);

    ConstraintGroup sat_g{
        "band",
        fm::conj({fm::atom(ex::pow_i(ex::state(0), 2), Rel::Le, 1.0),
                  fm::atom(ex::state(0), Rel::Ge, 0.5)}),
        "cond", "domain"};
    auto r2 = run_solver(backend, emit_script(SolverKind::Icp, sat_g, 1), 1);
    REQUIRE(r2.verdict == Verdict::Sat);
    REQUIRE(r2.points.size() == 1);
    CHECK(r2.points[0][0] >= 0.5 - 1e-9);
    CHECK(r2.points[0][0] <= 1.0 + 1e-9);
}

TEST_CASE("run_solver: timeout is enforced by killing the process") {
    SolverBackend slow{SolverKind::Icp, "/bin/sleep", 0.2, 1e-4};
    // /bin/sleep ignores the script argument and naps past the deadline.
    auto backend = slow;
    backend.executable = "sleep";
    std::vector<std::string> argv{"sleep", "5"};
    auto proc = run_process(argv, 0.2);
    CHECK(proc.timed_out);
}

TEST_CASE("run_solver: missing executables surface as solver errors") {
    SolverBackend missing{SolverKind::Z3, "definitely-not-a-solver-binary", 5.0, 1e-4};
    ConstraintGroup g{"g", fm::atom(ex::state(0), Rel::Le, 1.0), "cond", "domain"};
    auto r = run_solver(missing, emit_script(SolverKind::Z3, g, 1), 1);
    CHECK(r.verdict == Verdict::SolverError);
}

TEST_CASE("model parsing: z3-style define-funs including rationals and negatives") {
    std::vector<double> point;
    const std::string z3_out =
        "sat\n(\n  (define-fun x1 () Real\n    (- (/ 1.0 2.0)))\n"
        "  (define-fun x0 () Real\n    0.125)\n)\n";
    REQUIRE(detail::parse_define_funs(z3_out, 2, point));
    CHECK(point[0] == doctest::Approx(0.125));
    CHECK(point[1] == doctest::Approx(-0.5));

    const std::string truncated = "sat\n((define-fun x0 () Real 1.4142135623?))\n";
    REQUIRE(detail::parse_define_funs(truncated, 1, point));
    CHECK(point[0] == doctest::Approx(1.4142135623));
}

TEST_CASE("model parsing: dReal-style interval lines collapse to midpoints") {
    std::vector<double> point;
    const std::string dreal_out =
        "delta-sat with delta = 0.0001\nx0 : [ -0.2, -0.1 ]\nx1 : [ 1.0, 1.0 ]\n";
    REQUIRE(detail::parse_interval_lines(dreal_out, 2, point));
    CHECK(point[0] == doctest::Approx(-0.15));
    CHECK(point[1] == doctest::Approx(1.0));
}

TEST_CASE("verify_candidate: the toy barrier certificate is proven (all UNSAT)") {
    auto prob = toy_barrier_problem();
    auto ce = prob.freeze(toy_barrier_candidate());
    auto results = verify_candidate(prob, ce, icp_backend());
    REQUIRE(results.size() == 3);
    for (const auto& r : results) {
        CAPTURE(r.group);
        CHECK(r.verdict == Verdict::Unsat);
    }
    CHECK(all_unsat(results));
}

TEST_CASE("verify_candidate: widening XU to [0.4, 3] falsifies the unsafe condition") {
    auto model = DynamicalModel::parse({"-x0"}, 1, 0, TimeDomain::Continuous);
    SetAssignment sets;
    sets.sets.emplace(SetRole::XD, Domain::rectangle({-3}, {3}));
    sets.sets.emplace(SetRole::XI, Domain::rectangle({-0.5}, {0.5}));
    sets.sets.emplace(SetRole::XU, Domain::rectangle({0.4}, {3}));
    SynthesisProblem prob(CertificateKind::Barrier, model, sets);
    auto results = verify_candidate(prob, prob.freeze(toy_barrier_candidate()), icp_backend());
    bool unsafe_falsified = false;
    for (const auto& r : results)
        if (r.group == "unsafe" && r.verdict != Verdict::Unsat) unsafe_falsified = true;
    CHECK(unsafe_falsified);
}

TEST_CASE("falsification: strict decrease of the energy candidate on Eq. (10)") {
    auto model = DynamicalModel::parse({"x1 - x0**3", "-x0"}, 2, 0, TimeDomain::Continuous);
    SetAssignment sets;
    sets.sets.emplace(SetRole::XD, Domain::sphere({0, 0}, 1.0));
    CertificateConstants consts;
    consts.strict_lyapunov_decrease = true;
    SynthesisProblem prob(CertificateKind::Lyapunov, model, sets, consts);
    Candidate cand{energy_net(), {}, {}};
    auto results = verify_candidate(prob, prob.freeze(cand), icp_backend());
    bool found = false;
    for (const auto& r : results) {
        if (r.group != "decrease") continue;
        REQUIRE((r.verdict == Verdict::Sat || r.verdict == Verdict::DeltaSat));
        REQUIRE(!r.points.empty());
        const auto& p = r.points[0];
        CHECK(std::fabs(p[0]) <= 1e-6);  // the x0 = 0 degenerate line
        // Numeric Vdot = -2 x0^4 at the witness stays above -1e-6.
        CHECK(-2.0 * std::pow(p[0], 4.0) >= -1e-6);
        // And the counterexample fidelity slack agrees.
        CHECK(prob.condition_slack(cand, p, "decrease") <= 1e-6);
        found = true;
    }
    CHECK(found);
}

TEST_CASE("property: counterexample fidelity across kinds for random candidates") {
    auto model = DynamicalModel::parse({"x1", "-x0 - x1"}, 2, 0, TimeDomain::Continuous);
    SetAssignment sets;
    sets.sets.emplace(SetRole::XD, Domain::rectangle({-3.5, -3.5}, {3.5, 3.5}));
    sets.sets.emplace(SetRole::XS, Domain::rectangle({-3.0, -3.0}, {3.0, 3.0}));
    sets.sets.emplace(SetRole::XI, Domain::rectangle({-2.0, -2.0}, {2.0, 2.0}));
    sets.sets.emplace(SetRole::XG, Domain::rectangle({-0.1, -0.1}, {0.1, 0.1}));
    sets.sets.emplace(SetRole::XF, Domain::rectangle({-0.2, -0.2}, {0.2, 0.2}));
    sets.sets.emplace(SetRole::XU, Domain::rectangle({2.5, 2.5}, {3.4, 3.4}));

    auto backend = icp_backend();
    for (CertificateKind kind : {CertificateKind::Lyapunov, CertificateKind::Barrier,
                                 CertificateKind::Rwa, CertificateKind::Rswa, CertificateKind::Rar}) {
        SynthesisProblem prob(kind, model, sets);
        std::vector<std::string> levels;
        if (auto lvl = level_name(kind)) levels.push_back(*lvl);
        Candidate cand{Network::init(2, {3}, {Activation::square()}, 1, !origin_anchored(kind), 21,
                                     levels),
                       {}, {}};
        if (two_function(kind))
            cand.secondary = Network::init(2, {3}, {Activation::square()}, 1, true, 22);
        if (kind == CertificateKind::Rswa) cand.primary.set_level("gamma", -0.25);
        auto results = verify_candidate(prob, prob.freeze(cand), backend);
        for (const auto& r : results) {
            if (r.verdict == Verdict::Sat) {
                REQUIRE(!r.points.empty());
                const double slack = prob.condition_slack(cand, r.points[0], r.condition_id);
                CAPTURE(kind_name(kind));
                CAPTURE(r.group);
                CAPTURE(slack);
                CHECK(slack <= 1e-6);
            }
        }
    }
}

TEST_CASE("numeric/symbolic agreement through a solver on polynomial trees") {
    // Pin the variables to rational constants and assert the emitted tree
    // differs from the tape evaluation by less than 1e-9: expect sat.
    auto backend = icp_backend();
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Expr e = ex::add(ex::mul(ex::constant(rng.uniform(-2, 2)), ex::pow_i(ex::state(0), 3)),
                         ex::mul(ex::constant(rng.uniform(-2, 2)), ex::mul(ex::state(0), ex::state(1))));
        const double p0 = rng.uniform(-1, 1), p1 = rng.uniform(-1, 1);
        const double v = eval_point(e, std::vector<double>{p0, p1});
        Formula f = fm::conj({fm::atom(ex::state(0), Rel::Eq, ex::constant(p0)),
                              fm::atom(ex::state(1), Rel::Eq, ex::constant(p1)),
                              fm::atom(ex::sub(e, ex::constant(v)), Rel::Le, 1e-9),
                              fm::atom(ex::sub(e, ex::constant(v)), Rel::Ge, -1e-9)});
        ConstraintGroup g{"agreement", f, "cond", "domain"};
        auto r = run_solver(backend, emit_script(SolverKind::Icp, g, 2), 2);
        CHECK(r.verdict == Verdict::Sat);
    }
}

TEST_CASE("verify options: short-circuit stops at the first non-UNSAT group") {
    auto prob = toy_barrier_problem();
    Candidate bad = toy_barrier_candidate();
    bad.primary.biases[0] = {1.0};  // B = x + 1: init condition now fails
    auto groups = prob.constraint_groups(prob.freeze(bad));
    VerifyOptions opts;
    opts.short_circuit = true;
    auto results = verify_groups(groups, 1, icp_backend(), opts);
    CHECK(results.size() < groups.size() + 1);
    CHECK(results.back().verdict != Verdict::Unsat);
}

TEST_CASE("verify options: script_dir persists scripts and transcripts") {
    auto prob = toy_barrier_problem();
    auto dir = std::filesystem::temp_directory_path() / "fossil-test-scripts";
    std::filesystem::remove_all(dir);
    VerifyOptions opts;
    opts.script_dir = dir.string();
    auto results = verify_candidate(prob, prob.freeze(toy_barrier_candidate()), icp_backend(), opts);
    CHECK(std::filesystem::exists(dir / "init.smt2"));
    CHECK(std::filesystem::exists(dir / "init.out"));
    std::ifstream out(dir / "init.out");
    std::string verdict;
    std::getline(out, verdict);
    CHECK(verdict == "UNSAT");
    std::filesystem::remove_all(dir);
}

TEST_CASE("empty group lists are rejected") {
    CHECK_THROWS_AS(verify_groups({}, 1, icp_backend()), VerifierError);
}

TEST_CASE("backend resolution: env var wins, missing binaries are reported") {
    CHECK(resolve_solver_executable(SolverKind::Icp).has_value());
    ::setenv("FOSSIL_CVC5", "/nonexistent/cvc5", 1);
    CHECK(!resolve_solver_executable(SolverKind::Cvc5).has_value());
    ::unsetenv("FOSSIL_CVC5");
    CHECK_THROWS_WITH_AS(static_cast<void>(make_backend(SolverKind::Cvc5, "missing-solver-xyz")),
                         doctest::Contains("CVC5"), VerifierError);
}
