// Miniature feed-forward networks used as certificate and controller
// templates.  The same parameters drive three interpretations that must
// agree: a numeric forward pass, a forward-tangent pass (directional
// derivative along a supplied vector, which is how lie derivatives are
// trained), and an exact unrolling into the expression IR for verification.
//
// Reverse-mode gradients run through both the value and the tangent
// computation, so losses over V and over Vdot update the same weights.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fossil/expr.hpp"
#include "fossil/rng.hpp"

namespace fossil {

struct NetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Activations

struct Activation {
    enum class Kind { Linear, Poly, Sigmoid, Tanh, Softplus, Relu };
    Kind kind = Kind::Linear;
    int order = 1;  // Poly only

    static Activation linear() { return {Kind::Linear, 1}; }
    static Activation poly(int order) {
        if (order < 1) throw NetError("POLY activation order must be >= 1");
        return {Kind::Poly, order};
    }
    static Activation square() { return poly(2); }
    static Activation sigmoid() { return {Kind::Sigmoid, 1}; }
    static Activation tanh() { return {Kind::Tanh, 1}; }
    static Activation softplus() { return {Kind::Softplus, 1}; }
    static Activation relu() { return {Kind::Relu, 1}; }

    double value(double z) const {
        switch (kind) {
            case Kind::Linear: return z;
            case Kind::Poly: {
                double v = z;
                for (int k = 1; k < order; ++k) v *= z;
                return v;
            }
            case Kind::Sigmoid: return ex::sigmoid_value(z);
            case Kind::Tanh: return std::tanh(z);
            case Kind::Softplus: return ex::softplus_value(z);
            case Kind::Relu: return z > 0 ? z : 0.0;
        }
        return z;
    }

    double grad(double z) const {
        switch (kind) {
            case Kind::Linear: return 1.0;
            case Kind::Poly: {
                if (order == 1) return 1.0;
                double v = z;
                for (int k = 2; k < order; ++k) v *= z;
                return order * v;
            }
            case Kind::Sigmoid: {
                const double s = ex::sigmoid_value(z);
                return s * (1.0 - s);
            }
            case Kind::Tanh: {
                const double t = std::tanh(z);
                return 1.0 - t * t;
            }
            case Kind::Softplus: return ex::sigmoid_value(z);
            case Kind::Relu: return z > 0 ? 1.0 : 0.0;
        }
        return 0.0;
    }

    double grad2(double z) const {
        switch (kind) {
            case Kind::Linear: return 0.0;
            case Kind::Poly: {
                if (order <= 2) return order == 2 ? 2.0 : 0.0;
                double v = z;
                for (int k = 3; k < order; ++k) v *= z;
                return order * (order - 1) * v;
            }
            case Kind::Sigmoid: {
                const double s = ex::sigmoid_value(z);
                return s * (1.0 - s) * (1.0 - 2.0 * s);
            }
            case Kind::Tanh: {
                const double t = std::tanh(z);
                return -2.0 * t * (1.0 - t * t);
            }
            case Kind::Softplus: {
                const double s = ex::sigmoid_value(z);
                return s * (1.0 - s);
            }
            case Kind::Relu: return 0.0;
        }
        return 0.0;
    }

    // Activations with phi(0) == 0 preserve the origin when biases are off.
    bool zero_fixing() const {
        return kind == Kind::Linear || kind == Kind::Poly || kind == Kind::Tanh || kind == Kind::Relu;
    }

    bool symbolic() const { return kind != Kind::Relu; }

    Expr unroll(const Expr& z) const {
        switch (kind) {
            case Kind::Linear: return z;
            case Kind::Poly: return ex::pow_i(z, order);
            case Kind::Sigmoid: return ex::sigmoid(z);
            case Kind::Tanh: return ex::tanh(z);
            case Kind::Softplus: return ex::softplus(z);
            case Kind::Relu: throw NetError("RELU is training-only and has no symbolic form");
        }
        return z;
    }

    std::string name() const {
        switch (kind) {
            case Kind::Linear: return "LINEAR";
            case Kind::Poly: return order == 2 ? "SQUARE" : "POLY" + std::to_string(order);
            case Kind::Sigmoid: return "SIGMOID";
            case Kind::Tanh: return "TANH";
            case Kind::Softplus: return "SOFTPLUS";
            case Kind::Relu: return "RELU";
        }
        return "LINEAR";
    }

    static Activation from_name(std::string_view name) {
        if (name == "LINEAR") return linear();
        if (name == "SQUARE") return square();
        if (name == "SIGMOID") return sigmoid();
        if (name == "TANH") return tanh();
        if (name == "SOFTPLUS") return softplus();
        if (name == "RELU") return relu();
        if (name.substr(0, 4) == "POLY" && name.size() > 4) {
            int order = 0;
            for (char c : name.substr(4)) {
                if (!std::isdigit(static_cast<unsigned char>(c)))
                    throw NetError("unknown activation: " + std::string(name));
                order = order * 10 + (c - '0');
            }
            return poly(order);
        }
        throw NetError("unknown activation: " + std::string(name));
    }

    bool operator==(const Activation&) const = default;
};

// ---------------------------------------------------------------------------
// Network

struct Network {
    int input_dim = 0;
    std::vector<int> hidden;
    int output_dim = 1;
    std::vector<Activation> activations;  // per hidden layer
    bool bias_enabled = true;
    std::vector<std::vector<double>> weights;  // layer matrices, row-major [out][in]
    std::vector<std::vector<double>> biases;   // zero-length rows when disabled
    std::vector<std::string> level_names;      // trainable scalars (beta, gamma)
    std::vector<double> level_values;

    int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
    int layer_in(int l) const { return l == 0 ? input_dim : hidden[l - 1]; }
    int layer_out(int l) const { return l == layer_count() - 1 ? output_dim : hidden[l]; }
    bool is_hidden(int l) const { return l < layer_count() - 1; }

    double level(std::string_view name) const {
        for (std::size_t i = 0; i < level_names.size(); ++i)
            if (level_names[i] == name) return level_values[i];
        throw NetError("unknown level parameter: " + std::string(name));
    }

    void set_level(std::string_view name, double v) {
        for (std::size_t i = 0; i < level_names.size(); ++i)
            if (level_names[i] == name) {
                level_values[i] = v;
                return;
            }
        throw NetError("unknown level parameter: " + std::string(name));
    }

    std::size_t parameter_count() const {
        std::size_t n = level_values.size();
        for (int l = 0; l < layer_count(); ++l) {
            n += weights[l].size();
            n += biases[l].size();
        }
        return n;
    }

    static Network init(int input_dim, std::vector<int> hidden, std::vector<Activation> acts,
                        int output_dim, bool bias_enabled, std::uint64_t seed,
                        std::vector<std::string> levels = {}) {
        if (hidden.size() != acts.size())
            throw NetError("hidden layer count and activation count differ");
        for (int w : hidden)
            if (w <= 0) throw NetError("hidden layer width must be positive");
        if (input_dim <= 0 || output_dim <= 0) throw NetError("network dimensions must be positive");
        Network net;
        net.input_dim = input_dim;
        net.hidden = std::move(hidden);
        net.output_dim = output_dim;
        net.activations = std::move(acts);
        net.bias_enabled = bias_enabled;
        net.level_names = std::move(levels);
        net.level_values.assign(net.level_names.size(), 0.0);
        Rng rng(derive_seed(seed, "net-init"));
        for (int l = 0; l < net.layer_count(); ++l) {
            const int rows = net.layer_out(l), cols = net.layer_in(l);
            std::vector<double> w(static_cast<std::size_t>(rows) * cols);
            const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
            for (auto& v : w) v = rng.uniform(-scale, scale);
            net.weights.push_back(std::move(w));
            net.biases.emplace_back(bias_enabled ? rows : 0, 0.0);
        }
        return net;
    }

    // Plain forward pass for one sample.
    void forward(std::span<const double> x, std::span<double> out) const {
        std::vector<double> a(x.begin(), x.end()), next;
        for (int l = 0; l < layer_count(); ++l) {
            const int rows = layer_out(l), cols = layer_in(l);
            next.assign(rows, 0.0);
            for (int j = 0; j < rows; ++j) {
                double z = 0.0;
                for (int k = 0; k < cols; ++k) z += weights[l][j * cols + k] * a[k];
                if (!biases[l].empty()) z += biases[l][j];
                next[j] = is_hidden(l) ? activations[l].value(z) : z;
            }
            a.swap(next);
        }
        for (int j = 0; j < output_dim; ++j) out[j] = a[j];
    }

    std::vector<double> forward_one(std::span<const double> x) const {
        std::vector<double> out(output_dim);
        forward(x, out);
        return out;
    }

    // Exact symbolic unrolling; affine maps expand termwise in the same
    // order the numeric loop accumulates.
    std::vector<Expr> to_expression(const std::vector<Expr>& inputs) const {
        if (static_cast<int>(inputs.size()) != input_dim)
            throw NetError("to_expression: input arity mismatch");
        std::vector<Expr> a = inputs, next;
        for (int l = 0; l < layer_count(); ++l) {
            const int rows = layer_out(l), cols = layer_in(l);
            next.assign(rows, nullptr);
            for (int j = 0; j < rows; ++j) {
                Expr z;
                for (int k = 0; k < cols; ++k) {
                    Expr term = ex::mul(ex::constant(weights[l][j * cols + k]), a[k]);
                    z = z ? ex::add(z, term) : term;
                }
                if (!z) z = ex::constant(0.0);
                if (!biases[l].empty()) z = ex::add(z, ex::constant(biases[l][j]));
                next[j] = is_hidden(l) ? activations[l].unroll(z) : z;
            }
            a.swap(next);
        }
        return a;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["input_dim"] = input_dim;
        j["hidden"] = hidden;
        j["output_dim"] = output_dim;
        std::vector<std::string> act_names;
        for (const auto& a : activations) act_names.push_back(a.name());
        j["activations"] = act_names;
        j["bias_enabled"] = bias_enabled;
        j["weights"] = weights;
        j["biases"] = biases;
        nlohmann::json levels = nlohmann::json::object();
        for (std::size_t i = 0; i < level_names.size(); ++i) levels[level_names[i]] = level_values[i];
        j["levels"] = levels;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Parameter gradients

struct NetGrads {
    std::vector<std::vector<double>> weights, biases;
    std::vector<double> levels;

    explicit NetGrads(const Network& net) {
        for (int l = 0; l < net.layer_count(); ++l) {
            weights.emplace_back(net.weights[l].size(), 0.0);
            biases.emplace_back(net.biases[l].size(), 0.0);
        }
        levels.assign(net.level_values.size(), 0.0);
    }

    void zero() {
        for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
        for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
        std::fill(levels.begin(), levels.end(), 0.0);
    }

    bool finite() const {
        auto ok = [](const std::vector<double>& v) {
            for (double x : v)
                if (!std::isfinite(x)) return false;
            return true;
        };
        for (const auto& w : weights)
            if (!ok(w)) return false;
        for (const auto& b : biases)
            if (!ok(b)) return false;
        return ok(levels);
    }
};

// Plain gradient step; the learner's optimizer builds on top of this layout.
inline void step(Network& net, const NetGrads& grads, double learning_rate) {
    for (int l = 0; l < net.layer_count(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i)
            net.weights[l][i] -= learning_rate * grads.weights[l][i];
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
            net.biases[l][i] -= learning_rate * grads.biases[l][i];
    }
    for (std::size_t i = 0; i < net.level_values.size(); ++i)
        net.level_values[i] -= learning_rate * grads.levels[i];
}

// ---------------------------------------------------------------------------
// Batched forward/backward engine.
//
// Caches one batch worth of per-layer pre-activations and activations (and
// their tangents when a direction field is supplied), so backward() can run
// without recomputation.  Output width is assumed small (certificates use 1,
// controllers use the model input count).

class NetBatch {
public:
    // states: count x input_dim row-major.  tangents: empty, or same shape;
    // when present the pass also computes the directional derivative of every
    // output along the tangent (for certificates: Vdot along the field).
    void forward(const Network& net, std::span<const double> states,
                 std::span<const double> tangents = {}) {
        net_ = &net;
        count_ = net.input_dim > 0 ? states.size() / net.input_dim : 0;
        with_tangent_ = !tangents.empty();
        const int L = net.layer_count();
        z_.assign(L, {});
        a_.assign(L, {});
        zt_.assign(L, {});
        at_.assign(L, {});
        in_.assign(states.begin(), states.end());
        int_.assign(tangents.begin(), tangents.end());
        for (int l = 0; l < L; ++l) {
            const int rows = net.layer_out(l), cols = net.layer_in(l);
            z_[l].assign(count_ * rows, 0.0);
            a_[l].assign(count_ * rows, 0.0);
            if (with_tangent_) {
                zt_[l].assign(count_ * rows, 0.0);
                at_[l].assign(count_ * rows, 0.0);
            }
            const double* prev_a = l == 0 ? in_.data() : a_[l - 1].data();
            const double* prev_at = l == 0 ? int_.data() : at_[l - 1].data();
            for (std::size_t s = 0; s < count_; ++s) {
                for (int j = 0; j < rows; ++j) {
                    double z = 0.0, zt = 0.0;
                    const double* w = net.weights[l].data() + static_cast<std::size_t>(j) * cols;
                    const double* ap = prev_a + s * cols;
                    for (int k = 0; k < cols; ++k) z += w[k] * ap[k];
                    if (with_tangent_) {
                        const double* atp = prev_at + s * cols;
                        for (int k = 0; k < cols; ++k) zt += w[k] * atp[k];
                    }
                    if (!net.biases[l].empty()) z += net.biases[l][j];
                    const std::size_t idx = s * rows + j;
                    z_[l][idx] = z;
                    if (net.is_hidden(l)) {
                        a_[l][idx] = net.activations[l].value(z);
                        if (with_tangent_) {
                            zt_[l][idx] = zt;
                            at_[l][idx] = net.activations[l].grad(z) * zt;
                        }
                    } else {
                        a_[l][idx] = z;
                        if (with_tangent_) {
                            zt_[l][idx] = zt;
                            at_[l][idx] = zt;
                        }
                    }
                }
            }
        }
    }

    std::size_t count() const { return count_; }

    // Output values, count x output_dim.
    const std::vector<double>& values() const { return a_.back(); }

    // Directional derivatives of outputs, count x output_dim.
    const std::vector<double>& tangent_values() const { return at_.back(); }

    // Exact input gradient d out[o] / d x for one sample via reverse pass.
    std::vector<double> input_gradient(std::size_t sample, int output) const {
        const Network& net = *net_;
        const int L = net.layer_count();
        std::vector<double> ga(net.layer_out(L - 1), 0.0);
        ga[output] = 1.0;
        for (int l = L - 1; l >= 0; --l) {
            const int rows = net.layer_out(l), cols = net.layer_in(l);
            std::vector<double> gz(rows);
            for (int j = 0; j < rows; ++j) {
                const double g = net.is_hidden(l) ? net.activations[l].grad(z_[l][sample * rows + j]) : 1.0;
                gz[j] = ga[j] * g;
            }
            std::vector<double> gprev(cols, 0.0);
            for (int j = 0; j < rows; ++j) {
                const double* w = net.weights[l].data() + static_cast<std::size_t>(j) * cols;
                for (int k = 0; k < cols; ++k) gprev[k] += w[k] * gz[j];
            }
            ga.swap(gprev);
        }
        return ga;
    }

    struct BackwardResult {
        std::vector<double> dinput;   // d loss / d x, count x input_dim
        std::vector<double> dtangent;  // d loss / d tangent input, count x input_dim
    };

    // Reverse pass over values and tangents.  dvalues / dtangents are
    // count x output_dim loss gradients; accumulates parameter gradients and
    // returns loss gradients with respect to the inputs and the supplied
    // direction field (the latter chains into controller parameters).
    BackwardResult backward(std::span<const double> dvalues, std::span<const double> dtangents,
                            NetGrads& grads) const {
        const Network& net = *net_;
        const int L = net.layer_count();
        const bool tangents = with_tangent_ && !dtangents.empty();
        std::vector<double> ga(dvalues.begin(), dvalues.end());
        std::vector<double> gat;
        if (tangents)
            gat.assign(dtangents.begin(), dtangents.end());
        else
            gat.assign(dvalues.size(), 0.0);
        for (int l = L - 1; l >= 0; --l) {
            const int rows = net.layer_out(l), cols = net.layer_in(l);
            const double* prev_a = l == 0 ? in_.data() : a_[l - 1].data();
            const double* prev_at = l == 0 ? int_.data() : at_[l - 1].data();
            std::vector<double> gprev(count_ * cols, 0.0);
            std::vector<double> gprev_t(count_ * cols, 0.0);
            for (std::size_t s = 0; s < count_; ++s) {
                for (int j = 0; j < rows; ++j) {
                    const std::size_t idx = s * rows + j;
                    double gz, gzt = 0.0;
                    if (net.is_hidden(l)) {
                        const double d1 = net.activations[l].grad(z_[l][idx]);
                        gz = ga[idx] * d1;
                        if (with_tangent_) {
                            const double d2 = net.activations[l].grad2(z_[l][idx]);
                            gz += gat[idx] * d2 * zt_[l][idx];
                            gzt = gat[idx] * d1;
                        }
                    } else {
                        gz = ga[idx];
                        gzt = with_tangent_ ? gat[idx] : 0.0;
                    }
                    double* gw = grads.weights[l].data() + static_cast<std::size_t>(j) * cols;
                    const double* ap = prev_a + s * cols;
                    const double* atp = prev_at + s * cols;
                    const double* w = net.weights[l].data() + static_cast<std::size_t>(j) * cols;
                    for (int k = 0; k < cols; ++k) {
                        gw[k] += gz * ap[k];
                        if (with_tangent_) gw[k] += gzt * atp[k];
                        gprev[s * cols + k] += w[k] * gz;
                        if (with_tangent_) gprev_t[s * cols + k] += w[k] * gzt;
                    }
                    if (!grads.biases[l].empty()) grads.biases[l][j] += gz;
                }
            }
            ga.swap(gprev);
            gat.swap(gprev_t);
        }
        return {std::move(ga), std::move(gat)};
    }

private:
    const Network* net_ = nullptr;
    std::size_t count_ = 0;
    bool with_tangent_ = false;
    std::vector<double> in_, int_;
    std::vector<std::vector<double>> z_, a_, zt_, at_;
};

}  // namespace fossil
