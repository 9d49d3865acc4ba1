#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fossil/nnet.hpp"

using namespace fossil;

namespace {

// V = x0^2 + x1^2 as a [2]-SQUARE net: identity hidden weights, unit output.
Network quadratic_toy() {
    Network net = Network::init(2, {2}, {Activation::square()}, 1, false, 1);
    net.weights[0] = {1, 0, 0, 1};
    net.weights[1] = {1, 1};
    return net;
}

double param_get(const Network& net, std::size_t flat) {
    for (int l = 0; l < net.layer_count(); ++l) {
        if (flat < net.weights[l].size()) return net.weights[l][flat];
        flat -= net.weights[l].size();
        if (flat < net.biases[l].size()) return net.biases[l][flat];
        flat -= net.biases[l].size();
    }
    return net.level_values[flat];
}

void param_add(Network& net, std::size_t flat, double dv) {
    for (int l = 0; l < net.layer_count(); ++l) {
        if (flat < net.weights[l].size()) {
            net.weights[l][flat] += dv;
            return;
        }
        flat -= net.weights[l].size();
        if (flat < net.biases[l].size()) {
            net.biases[l][flat] += dv;
            return;
        }
        flat -= net.biases[l].size();
    }
    net.level_values[flat] += dv;
}

double grad_get(const NetGrads& g, std::size_t flat) {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        if (flat < g.weights[l].size()) return g.weights[l][flat];
        flat -= g.weights[l].size();
        if (flat < g.biases[l].size()) return g.biases[l][flat];
        flat -= g.biases[l].size();
    }
    return g.levels[flat];
}

// Tangent field used by the pipeline checks (a cubic vector field).
void field_at(std::span<const double> x, std::span<double> t) {
    t[0] = x[1] - x[0] * x[0] * x[0];
    t[1] = -x[0];
}

// L = mean(V^2) + mean(Vdot^2); exercises both backward paths.
double pipeline_loss(const Network& net, std::span<const double> states, std::size_t count,
                     NetGrads* grads = nullptr) {
    std::vector<double> tangents(count * 2);
    for (std::size_t s = 0; s < count; ++s)
        field_at(states.subspan(2 * s, 2), std::span<double>(tangents).subspan(2 * s, 2));
    NetBatch batch;
    batch.forward(net, states, tangents);
    const auto& v = batch.values();
    const auto& vd = batch.tangent_values();
    double loss = 0;
    for (std::size_t s = 0; s < count; ++s) loss += v[s] * v[s] + vd[s] * vd[s];
    loss /= static_cast<double>(count);
    if (grads) {
        std::vector<double> dv(count), dvd(count);
        for (std::size_t s = 0; s < count; ++s) {
            dv[s] = 2.0 * v[s] / static_cast<double>(count);
            dvd[s] = 2.0 * vd[s] / static_cast<double>(count);
        }
        batch.backward(dv, dvd, *grads);
    }
    return loss;
}

}  // namespace

TEST_CASE("init: deterministic per seed, shaped per widths") {
    Network a = Network::init(2, {5}, {Activation::square()}, 1, false, 42);
    Network b = Network::init(2, {5}, {Activation::square()}, 1, false, 42);
    CHECK(a.weights == b.weights);
    Network c = Network::init(2, {5}, {Activation::square()}, 1, false, 43);
    CHECK(a.weights != c.weights);

    Network two = Network::init(3, {4, 5}, {Activation::square(), Activation::tanh()}, 1, true, 7);
    CHECK(two.weights.size() == 3);
    CHECK(two.weights[0].size() == 4 * 3);
    CHECK(two.weights[1].size() == 5 * 4);
    CHECK(two.weights[2].size() == 1 * 5);
    CHECK(two.biases[0].size() == 4);
    CHECK(two.level_values.empty());
}

TEST_CASE("init: bias-free square nets map the origin to zero") {
    Network net = Network::init(2, {5}, {Activation::square()}, 1, false, 9);
    const double zero[] = {0.0, 0.0};
    CHECK(net.forward_one(zero)[0] == 0.0);
}

TEST_CASE("forward_with_gradient: quadratic toy has V(1,2)=5, grad=(2,4)") {
    Network net = quadratic_toy();
    const double x[] = {1.0, 2.0};
    NetBatch batch;
    batch.forward(net, x);
    CHECK(batch.values()[0] == doctest::Approx(5.0));
    auto g = batch.input_gradient(0, 0);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(4.0));

    // Directional derivative along t = (1, -1):
    const double t[] = {1.0, -1.0};
    batch.forward(net, x, t);
    CHECK(batch.tangent_values()[0] == doctest::Approx(2.0 - 4.0));
}

TEST_CASE("forward: duplicated batch rows give duplicated outputs") {
    Network net = Network::init(2, {4}, {Activation::tanh()}, 1, true, 3);
    const double states[] = {0.3, -0.7, 0.3, -0.7, 1.0, 0.2};
    NetBatch batch;
    batch.forward(net, states);
    CHECK(batch.values()[0] == batch.values()[1]);
    CHECK(batch.values()[0] != batch.values()[2]);
}

TEST_CASE("input gradient matches central finite differences") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        Network net = Network::init(2, {5, 4}, {Activation::sigmoid(), Activation::square()}, 1, true, seed);
        Rng rng(seed);
        for (int trial = 0; trial < 20; ++trial) {
            double x[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
            NetBatch batch;
            batch.forward(net, x);
            auto g = batch.input_gradient(0, 0);
            for (int d = 0; d < 2; ++d) {
                const double h = 1e-5;
                double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
                xp[d] += h;
                xm[d] -= h;
                const double fd = (net.forward_one(xp)[0] - net.forward_one(xm)[0]) / (2 * h);
                const double tol = 1e-4 * std::max(1.0, std::fabs(g[d]));
                CHECK(std::fabs(g[d] - fd) <= tol);
            }
        }
    }
}

TEST_CASE("backward: zero loss gradient means zero update") {
    Network net = Network::init(2, {3}, {Activation::square()}, 1, false, 5);
    const double states[] = {0.5, 0.5, -0.3, 0.8};
    NetBatch batch;
    batch.forward(net, states);
    NetGrads grads(net);
    std::vector<double> zero(2, 0.0);
    batch.backward(zero, {}, grads);
    for (const auto& w : grads.weights)
        for (double v : w) CHECK(v == 0.0);
}

TEST_CASE("backward: single linear neuron reproduces 2(wx-y)x") {
    Network net = Network::init(1, {}, {}, 1, false, 2);
    net.weights[0] = {0.7};
    const double x = 1.3, y = 2.0;
    const double states[] = {x};
    NetBatch batch;
    batch.forward(net, states);
    const double pred = batch.values()[0];
    NetGrads grads(net);
    std::vector<double> dv = {2.0 * (pred - y)};
    batch.backward(dv, {}, grads);
    CHECK(grads.weights[0][0] == doctest::Approx(2.0 * (0.7 * x - y) * x));
}

TEST_CASE("property: full-pipeline parameter gradients match finite differences") {
    for (std::uint64_t seed : {21u, 22u}) {
        Network net =
            Network::init(2, {4, 3}, {Activation::sigmoid(), Activation::square()}, 1, true, seed,
                          {"beta"});
        Rng rng(seed * 31);
        std::vector<double> states(2 * 16);
        for (auto& v : states) v = rng.uniform(-1.2, 1.2);
        NetGrads grads(net);
        pipeline_loss(net, states, 16, &grads);
        CHECK(grads.finite());
        const std::size_t params = net.parameter_count();
        for (std::size_t p = 0; p < params; ++p) {
            const double h = 1e-6 * std::max(1.0, std::fabs(param_get(net, p)));
            Network plus = net, minus = net;
            param_add(plus, p, h);
            param_add(minus, p, -h);
            const double fd =
                (pipeline_loss(plus, states, 16) - pipeline_loss(minus, states, 16)) / (2 * h);
            const double an = grad_get(grads, p);
            const double tol = 1e-4 * std::max({1.0, std::fabs(an), std::fabs(fd)});
            if (std::fabs(an - fd) > tol) {
                CAPTURE(p);
                CAPTURE(an);
                CAPTURE(fd);
                CHECK(std::fabs(an - fd) <= tol);
                return;
            }
        }
    }
    CHECK(true);
}

TEST_CASE("backward returns the loss gradient w.r.t. the tangent input") {
    Network net = Network::init(2, {4}, {Activation::square()}, 1, false, 8);
    const double states[] = {0.4, -0.9};
    std::vector<double> tangents = {0.3, 0.6};
    NetBatch batch;
    batch.forward(net, states, tangents);
    const double vd0 = batch.tangent_values()[0];
    NetGrads grads(net);
    std::vector<double> dv = {0.0}, dvd = {2.0 * vd0};  // d/dVdot of Vdot^2
    auto dtan = batch.backward(dv, dvd, grads).dtangent;
    REQUIRE(dtan.size() == 2);
    for (int d = 0; d < 2; ++d) {
        const double h = 1e-6;
        auto tp = tangents, tm = tangents;
        tp[d] += h;
        tm[d] -= h;
        NetBatch bp, bm;
        bp.forward(net, states, tp);
        bm.forward(net, states, tm);
        const double fd =
            (bp.tangent_values()[0] * bp.tangent_values()[0] - bm.tangent_values()[0] * bm.tangent_values()[0]) /
            (2 * h);
        CHECK(dtan[d] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("backward's input gradient agrees with input_gradient()") {
    Network net = Network::init(2, {4}, {Activation::tanh()}, 1, true, 17);
    const double states[] = {0.2, -0.6};
    NetBatch batch;
    batch.forward(net, states);
    NetGrads grads(net);
    std::vector<double> dv = {1.0};
    auto back = batch.backward(dv, {}, grads);
    auto direct = batch.input_gradient(0, 0);
    CHECK(back.dinput[0] == doctest::Approx(direct[0]));
    CHECK(back.dinput[1] == doctest::Approx(direct[1]));
}

TEST_CASE("to_expression: numeric and symbolic interpretations coincide") {
    Network toy = quadratic_toy();
    auto exprs = toy.to_expression({ex::state(0), ex::state(1)});
    REQUIRE(exprs.size() == 1);
    const double x[] = {1.0, 2.0};
    CHECK(eval_point(exprs[0], x) == doctest::Approx(5.0));

    for (std::uint64_t seed : {31u, 32u, 33u}) {
        Network net = Network::init(2, {5, 4}, {Activation::sigmoid(), Activation::square()}, 1, true,
                                    seed);
        auto sym = net.to_expression({ex::state(0), ex::state(1)})[0];
        ExprTape tape = ExprTape::compile(sym);
        Expr d0 = differentiate(sym, 0), d1 = differentiate(sym, 1);
        ExprTape td0 = ExprTape::compile(d0), td1 = ExprTape::compile(d1);
        Rng rng(seed + 100);
        std::vector<double> scratch;
        NetBatch batch;
        for (int i = 0; i < 1000; ++i) {
            double p[2] = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const double numeric = net.forward_one(p)[0];
            const double symbolic = tape.eval(p, {}, scratch);
            CHECK(std::fabs(numeric - symbolic) < 1e-9);
            if (i % 100 == 0) {
                batch.forward(net, std::span<const double>(p, 2));
                auto g = batch.input_gradient(0, 0);
                CHECK(std::fabs(g[0] - td0.eval(p, {}, scratch)) < 1e-6);
                CHECK(std::fabs(g[1] - td1.eval(p, {}, scratch)) < 1e-6);
            }
        }
    }
}

TEST_CASE("to_expression rejects RELU layers") {
    Network net = Network::init(2, {3}, {Activation::relu()}, 1, true, 1);
    CHECK_THROWS_AS(net.to_expression({ex::state(0), ex::state(1)}), NetError);
}

TEST_CASE("step applies the update in place") {
    Network net = Network::init(1, {}, {}, 1, false, 4);
    const double w0 = net.weights[0][0];
    NetGrads grads(net);
    grads.weights[0][0] = 0.5;
    step(net, grads, 0.1);
    CHECK(net.weights[0][0] == doctest::Approx(w0 - 0.05));
}

TEST_CASE("level parameters: zero-initialized, named, serialized") {
    Network net = Network::init(2, {2}, {Activation::square()}, 1, false, 6, {"beta"});
    CHECK(net.level("beta") == 0.0);
    net.set_level("beta", 0.25);
    CHECK(net.level("beta") == 0.25);
    CHECK_THROWS_AS(net.level("gamma"), NetError);
    auto j = net.to_json();
    CHECK(j["levels"]["beta"] == 0.25);
    CHECK(j["activations"][0] == "SQUARE");
}

TEST_CASE("activation vocabulary round-trips by name") {
    for (const char* name : {"LINEAR", "SQUARE", "SIGMOID", "TANH", "SOFTPLUS", "RELU", "POLY3"}) {
        CHECK(Activation::from_name(name).name() == name);
    }
    CHECK_THROWS_AS(Activation::from_name("CUBIC"), NetError);
    CHECK(Activation::poly(2).name() == "SQUARE");
    CHECK(Activation::square().zero_fixing());
    CHECK(!Activation::sigmoid().zero_fixing());
}
