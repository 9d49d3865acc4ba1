#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fossil/models.hpp"
#include "fossil/rng.hpp"

using namespace fossil;

namespace {

DynamicalModel eq10() {
    return DynamicalModel::parse({"x1 - x0**3", "-x0"}, 2, 0, TimeDomain::Continuous);
}

DynamicalModel eq11() {
    return DynamicalModel::parse({"x1 - x0**3", "u0"}, 2, 1, TimeDomain::Continuous);
}

Network linear_controller(std::vector<double> gains) {
    Network net = Network::init(2, {}, {}, 1, false, 1);
    net.weights[0] = std::move(gains);
    return net;
}

Network quadratic_cert() {
    Network net = Network::init(2, {2}, {Activation::square()}, 1, false, 1);
    net.weights[0] = {1, 0, 0, 1};
    net.weights[1] = {1, 1};
    return net;
}

}  // namespace

TEST_CASE("model validation") {
    CHECK_THROWS_AS(DynamicalModel::parse({"x0"}, 2, 0, TimeDomain::Continuous), ModelError);
    CHECK_THROWS_AS(DynamicalModel::parse({"x0", "u0"}, 2, 0, TimeDomain::Continuous), ParseError);
    CHECK_NOTHROW(eq11());
}

TEST_CASE("close_loop: substitution produces the expected field") {
    auto model = eq11();
    auto ctrl = linear_controller({-1.0, -1.0});  // u0 = -x0 - x1
    auto cl = close_loop(model, ctrl);
    CHECK(cl.closed.autonomous());

    // Component 0 is untouched, component 1 becomes -x0 - x1.
    const double x[] = {1.0, 2.0};
    CHECK(eval_point(cl.closed.field[0], x) == doctest::Approx(2.0 - 1.0));
    CHECK(eval_point(cl.closed.field[1], x) == doctest::Approx(-3.0));
}

TEST_CASE("close_loop: autonomous models are rejected") {
    auto model = eq10();
    auto ctrl = linear_controller({-1.0, -1.0});
    CHECK_THROWS_AS(close_loop(model, ctrl), ModelError);
}

TEST_CASE("property: closed-loop numeric/symbolic coherence at 1000 points") {
    auto model = eq11();
    Network ctrl = Network::init(2, {4}, {Activation::tanh()}, 1, false, 99);
    auto cl = close_loop(model, ctrl);
    FieldEvaluator closed_numeric(cl.closed);
    Rng rng(7);
    std::vector<double> fx(2), u(1), scratch;
    for (int i = 0; i < 1000; ++i) {
        double x[2] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        closed_numeric.eval_point(x, fx);
        // Reference: evaluate f at (x, controller(x)) directly.
        ctrl.forward(x, u);
        for (int c = 0; c < 2; ++c) {
            ExprTape tape = ExprTape::compile(model.field[c]);
            const double direct = tape.eval(x, u, scratch);
            CHECK(std::fabs(direct - fx[c]) < 1e-9);
        }
    }
}

TEST_CASE("lie_update: continuous example of the quadratic certificate") {
    auto model = eq10();
    Network cert = quadratic_cert();
    Expr V = cert.to_expression({ex::state(0), ex::state(1)})[0];
    const double states[] = {1.0, 2.0};
    auto lie = lie_update(model, cert, V, states);
    REQUIRE(lie.values.size() == 1);
    CHECK(lie.values[0] == doctest::Approx(-2.0));  // <(2,4),(1,-1)>

    // Hand expansion: Vdot = 2 x0 (x1 - x0^3) - 2 x1 x0 = -2 x0^4.
    const double p1[] = {0.0, 0.5};
    const double p2[] = {1.0, 2.0};
    CHECK(eval_point(lie.symbolic, p1) == doctest::Approx(0.0));
    CHECK(eval_point(lie.symbolic, p2) == doctest::Approx(-2.0));
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        double x[2] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        CHECK(eval_point(lie.symbolic, x) ==
              doctest::Approx(-2.0 * std::pow(x[0], 4)).epsilon(1e-9));
    }
}

TEST_CASE("lie_update: discrete decrement") {
    auto model = DynamicalModel::parse({"0.5*x0", "0.5*x1"}, 2, 0, TimeDomain::Discrete);
    Network cert = quadratic_cert();
    Expr V = cert.to_expression({ex::state(0), ex::state(1)})[0];
    const double states[] = {2.0, 0.0};
    auto lie = lie_update(model, cert, V, states);
    CHECK(lie.values[0] == doctest::Approx(-3.0));  // -0.75 * 4
    const double p[] = {2.0, 0.0};
    CHECK(eval_point(lie.symbolic, p) == doctest::Approx(-3.0));
}

TEST_CASE("simulate: exponential decay matches the closed form") {
    auto model = DynamicalModel::parse({"-x0"}, 1, 0, TimeDomain::Continuous);
    const double x0[] = {1.0};
    auto traj = simulate(model, x0, 1.0, 0.01);
    REQUIRE(traj.rows() == 101);
    CHECK(std::fabs(traj.states.back() - std::exp(-1.0)) < 1e-5);
    CHECK(!traj.truncated);
}

TEST_CASE("simulate: discrete halving map") {
    auto model = DynamicalModel::parse({"0.5*x0"}, 1, 0, TimeDomain::Discrete);
    const double x0[] = {8.0};
    auto traj = simulate(model, x0, 3, 0.0);
    REQUIRE(traj.rows() == 4);
    CHECK(traj.states.back() == doctest::Approx(1.0));
}

TEST_CASE("simulate: zero field stays constant") {
    auto model = DynamicalModel::parse({"0", "0"}, 2, 0, TimeDomain::Continuous);
    const double x0[] = {0.3, -0.4};
    auto traj = simulate(model, x0, 0.5, 0.1);
    for (std::size_t r = 0; r < traj.rows(); ++r) {
        CHECK(traj.states[2 * r] == 0.3);
        CHECK(traj.states[2 * r + 1] == -0.4);
    }
}

TEST_CASE("simulate: finite-time blowup truncates the trajectory") {
    auto model = DynamicalModel::parse({"x0**2", "0"}, 2, 0, TimeDomain::Continuous);
    const double x0[] = {1.0, 0.0};
    auto traj = simulate(model, x0, 5.0, 0.01);
    CHECK(traj.truncated);
    CHECK(traj.rows() < 502);
    for (double v : traj.states) CHECK(std::isfinite(v));
}

TEST_CASE("property: RK4 error drops by >= 8x when dt halves") {
    auto model = DynamicalModel::parse({"-x0"}, 1, 0, TimeDomain::Continuous);
    const double x0[] = {1.0};
    auto err = [&](double dt) {
        auto traj = simulate(model, x0, 1.0, dt);
        return std::fabs(traj.states.back() - std::exp(-1.0));
    };
    const double coarse = err(0.1);
    const double fine = err(0.05);
    CHECK(coarse / fine >= 8.0);
}

TEST_CASE("trajectory CSV header matches the export contract") {
    auto model = DynamicalModel::parse({"-x0", "x0"}, 2, 0, TimeDomain::Continuous);
    const double x0[] = {1.0, 0.0};
    auto traj = simulate(model, x0, 0.2, 0.1);
    auto csv = traj.to_csv();
    CHECK(csv.substr(0, 8) == "t,x0,x1\n");
}
