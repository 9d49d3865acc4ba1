// Dynamical models: a vector field over states (and optionally inputs) with
// continuous or discrete time semantics, closed-loop composition against a
// controller network, lie updates for certificates, and a fixed-step
// simulator for trajectory export.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fossil/expr.hpp"
#include "fossil/nnet.hpp"

namespace fossil {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TimeDomain { Continuous, Discrete };

inline const char* time_domain_name(TimeDomain td) {
    return td == TimeDomain::Continuous ? "CONTINUOUS" : "DISCRETE";
}

struct DynamicalModel {
    int n_vars = 0;
    int n_inputs = 0;
    VectorExpression field;
    TimeDomain time_domain = TimeDomain::Continuous;

    bool autonomous() const { return n_inputs == 0; }

    static DynamicalModel make(int n_vars, int n_inputs, VectorExpression field, TimeDomain td) {
        if (static_cast<int>(field.size()) != n_vars)
            throw ModelError("field component count must equal the state dimension");
        for (const auto& component : field) {
            int max_state = -1, max_input = -1;
            expr_var_extent(component, max_state, max_input);
            if (max_state >= n_vars) throw ModelError("field references state beyond n_vars");
            if (max_input >= n_inputs) throw ModelError("field references input beyond n_inputs");
        }
        return DynamicalModel{n_vars, n_inputs, std::move(field), td};
    }

    static DynamicalModel parse(const std::vector<std::string>& components, int n_vars, int n_inputs,
                                TimeDomain td) {
        VectorExpression field;
        for (const auto& text : components) field.push_back(parse_expr(text, n_vars, n_inputs));
        return make(n_vars, n_inputs, std::move(field), td);
    }
};

// ---------------------------------------------------------------------------
// Closed-loop composition

struct ClosedLoopModel {
    DynamicalModel open;
    Network controller;
    DynamicalModel closed;  // autonomous; u substituted by controller expressions
};

inline ClosedLoopModel close_loop(const DynamicalModel& model, const Network& controller) {
    if (model.autonomous()) throw ModelError("close_loop: model has no control inputs");
    if (controller.input_dim != model.n_vars || controller.output_dim != model.n_inputs)
        throw ModelError("close_loop: controller shape does not match the model");
    std::vector<Expr> state_inputs;
    for (int i = 0; i < model.n_vars; ++i) state_inputs.push_back(ex::state(i));
    std::vector<Expr> u = controller.to_expression(state_inputs);
    VectorExpression closed_field;
    for (const auto& component : model.field)
        closed_field.push_back(substitute(component, {}, u));
    for (const auto& component : closed_field)
        if (expr_uses_inputs(component)) throw ModelError("close_loop: substitution left an input variable");
    return ClosedLoopModel{model, controller,
                           DynamicalModel{model.n_vars, 0, std::move(closed_field), model.time_domain}};
}

// ---------------------------------------------------------------------------
// Batched field evaluation

// Compiled tapes for the field; for controlled models the controller network
// supplies u(x) numerically, so the numeric path is the exact counterpart of
// the substituted symbolic field.
class FieldEvaluator {
public:
    explicit FieldEvaluator(const DynamicalModel& model, const Network* controller = nullptr)
        : model_(&model), controller_(controller) {
        if (!model.autonomous() && !controller)
            throw ModelError("field evaluation of a controlled model needs a controller");
        for (const auto& component : model.field) tapes_.push_back(ExprTape::compile(component));
    }

    int n_vars() const { return model_->n_vars; }
    int n_inputs() const { return model_->n_inputs; }

    // values: count x n_vars field values; inputs (optional out): count x n_inputs.
    void eval(std::span<const double> states, std::vector<double>& values,
              std::vector<double>* inputs = nullptr) const {
        const int n = model_->n_vars, m = model_->n_inputs;
        const std::size_t count = states.size() / n;
        values.assign(count * n, 0.0);
        if (inputs) inputs->assign(count * m, 0.0);
        std::vector<double> u(m), scratch;
        for (std::size_t s = 0; s < count; ++s) {
            std::span<const double> x = states.subspan(s * n, n);
            if (m > 0) {
                controller_->forward(x, u);
                if (inputs) std::copy(u.begin(), u.end(), inputs->begin() + s * m);
            }
            for (int i = 0; i < n; ++i) values[s * n + i] = tapes_[i].eval(x, u, scratch, s);
        }
    }

    void eval_point(std::span<const double> x, std::span<double> out) const {
        const int m = model_->n_inputs;
        std::vector<double> u(m), scratch;
        if (m > 0) controller_->forward(x, u);
        for (int i = 0; i < model_->n_vars; ++i) out[i] = tapes_[i].eval(x, u, scratch);
    }

private:
    const DynamicalModel* model_;
    const Network* controller_;
    std::vector<ExprTape> tapes_;
};

// d f_i / d u_j tapes, for chaining loss gradients into controller parameters.
class InputJacobian {
public:
    explicit InputJacobian(const DynamicalModel& model) : n_(model.n_vars), m_(model.n_inputs) {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < m_; ++j)
                tapes_.push_back(ExprTape::compile(differentiate_input(model.field[i], j)));
    }

    // J: n x m row-major at one sample.
    void eval(std::span<const double> x, std::span<const double> u, std::span<double> jac) const {
        std::vector<double> scratch;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < m_; ++j) jac[i * m_ + j] = tapes_[i * m_ + j].eval(x, u, scratch);
    }

private:
    int n_, m_;
    std::vector<ExprTape> tapes_;
};

// ---------------------------------------------------------------------------
// Lie update

struct LieUpdate {
    std::vector<double> values;  // batched Vdot (continuous) or delta-V (discrete)
    Expr symbolic;
};

// Continuous: Vdot = <grad V, f>; discrete: V(f(x)) - V(x).  The model must be
// autonomous (compose the closed loop first for controlled models).
inline LieUpdate lie_update(const DynamicalModel& model, const Network& certificate,
                            const Expr& certificate_expr, std::span<const double> states) {
    if (!model.autonomous()) throw ModelError("lie_update: model must be autonomous or closed-loop");
    LieUpdate out;
    const int n = model.n_vars;
    const std::size_t count = states.size() / n;
    FieldEvaluator field(model);
    if (model.time_domain == TimeDomain::Continuous) {
        std::vector<double> f;
        field.eval(states, f);
        NetBatch batch;
        batch.forward(certificate, states, f);
        out.values = batch.tangent_values();
        Expr sum;
        for (int i = 0; i < n; ++i) {
            Expr term = ex::mul(differentiate(certificate_expr, i), model.field[i]);
            sum = sum ? ex::add(sum, term) : term;
        }
        out.symbolic = sum;
    } else {
        std::vector<double> f;
        field.eval(states, f);
        NetBatch at_x, at_fx;
        at_x.forward(certificate, states);
        at_fx.forward(certificate, f);
        out.values.resize(count);
        for (std::size_t s = 0; s < count; ++s) out.values[s] = at_fx.values()[s] - at_x.values()[s];
        out.symbolic = ex::sub(substitute(certificate_expr, model.field, {}), certificate_expr);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation (fixed-step RK4 / map iteration; plotting support only)

struct Trajectory {
    std::vector<double> times;
    std::vector<double> states;  // row-major, one row per time
    int n_vars = 0;
    bool truncated = false;  // hit a non-finite state and stopped early

    std::size_t rows() const { return times.size(); }

    std::string to_csv() const {
        std::string out = "t";
        for (int i = 0; i < n_vars; ++i) out += ",x" + std::to_string(i);
        out += "\n";
        for (std::size_t r = 0; r < rows(); ++r) {
            out += shortest_decimal(times[r]);
            for (int i = 0; i < n_vars; ++i) out += "," + shortest_decimal(states[r * n_vars + i]);
            out += "\n";
        }
        return out;
    }
};

inline Trajectory simulate(const DynamicalModel& model, std::span<const double> x0, double horizon,
                           double dt, const Network* controller = nullptr) {
    if (static_cast<int>(x0.size()) != model.n_vars) throw ModelError("simulate: x0 dimension mismatch");
    FieldEvaluator field(model, controller);
    const int n = model.n_vars;
    Trajectory traj;
    traj.n_vars = n;
    std::vector<double> x(x0.begin(), x0.end());
    auto finite = [&](const std::vector<double>& v) {
        for (double c : v)
            if (!std::isfinite(c)) return false;
        return true;
    };
    const std::size_t steps = model.time_domain == TimeDomain::Discrete
                                  ? static_cast<std::size_t>(horizon)
                                  : static_cast<std::size_t>(std::llround(horizon / dt));
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    double t = 0.0;
    for (std::size_t step = 0; step <= steps; ++step) {
        traj.times.push_back(model.time_domain == TimeDomain::Discrete ? static_cast<double>(step) : t);
        traj.states.insert(traj.states.end(), x.begin(), x.end());
        if (step == steps) break;
        if (model.time_domain == TimeDomain::Discrete) {
            field.eval_point(x, tmp);
            x = tmp;
        } else {
            field.eval_point(x, k1);
            for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
            field.eval_point(tmp, k2);
            for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
            field.eval_point(tmp, k3);
            for (int i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
            field.eval_point(tmp, k4);
            for (int i = 0; i < n; ++i) x[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            t += dt;
        }
        if (!finite(x)) {
            traj.truncated = true;
            break;
        }
    }
    return traj;
}

}  // namespace fossil
