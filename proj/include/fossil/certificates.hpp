// One sub-component per verifiable property.  Each certificate kind declares
// the set roles it needs, how training data is drawn, the loss over sampled
// data, and the negated symbolic conditions ("constraint groups") handed to
// the verifier.  Satisfiability of a group is equivalent to the existence of
// a counterexample to the corresponding condition.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fossil/domains.hpp"
#include "fossil/models.hpp"
#include "fossil/nnet.hpp"

namespace fossil {

struct CertificateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CertificateKind { Lyapunov, Roa, Barrier, Swa, Rwa, Rswa, Rar };

inline const char* kind_name(CertificateKind k) {
    switch (k) {
        case CertificateKind::Lyapunov: return "Lyapunov";
        case CertificateKind::Roa: return "ROA";
        case CertificateKind::Barrier: return "Barrier";
        case CertificateKind::Swa: return "SWA";
        case CertificateKind::Rwa: return "RWA";
        case CertificateKind::Rswa: return "RSWA";
        case CertificateKind::Rar: return "RAR";
    }
    return "?";
}

inline CertificateKind kind_from_name(std::string_view name) {
    for (auto k : {CertificateKind::Lyapunov, CertificateKind::Roa, CertificateKind::Barrier,
                   CertificateKind::Swa, CertificateKind::Rwa, CertificateKind::Rswa,
                   CertificateKind::Rar})
        if (name == kind_name(k)) return k;
    throw CertificateError("unknown certificate kind: " + std::string(name));
}

inline std::vector<SetRole> required_roles(CertificateKind k) {
    switch (k) {
        case CertificateKind::Lyapunov: return {SetRole::XD};
        case CertificateKind::Roa: return {SetRole::XD, SetRole::XI};
        case CertificateKind::Barrier: return {SetRole::XD, SetRole::XI, SetRole::XU};
        case CertificateKind::Swa: return {SetRole::XD, SetRole::XI, SetRole::XU};
        case CertificateKind::Rwa: return {SetRole::XD, SetRole::XI, SetRole::XS, SetRole::XG};
        case CertificateKind::Rswa: return {SetRole::XD, SetRole::XI, SetRole::XS, SetRole::XF};
        case CertificateKind::Rar:
            return {SetRole::XD, SetRole::XS, SetRole::XI, SetRole::XG, SetRole::XF};
    }
    return {};
}

inline bool kind_supports(CertificateKind k, TimeDomain td) {
    if (td == TimeDomain::Continuous) return true;
    return k == CertificateKind::Lyapunov || k == CertificateKind::Barrier;
}

inline bool two_function(CertificateKind k) {
    return k == CertificateKind::Swa || k == CertificateKind::Rar;
}

// Trainable level parameter owned by the primary network, if any.
inline std::optional<std::string> level_name(CertificateKind k) {
    if (k == CertificateKind::Roa) return "beta";
    if (k == CertificateKind::Rswa) return "gamma";
    return std::nullopt;
}

// Zero-at-origin requirement applies to the stability family, whose
// positivity condition is anchored at the equilibrium.
inline bool origin_anchored(CertificateKind k) {
    return k == CertificateKind::Lyapunov || k == CertificateKind::Roa || k == CertificateKind::Swa;
}

struct CertificateConstants {
    double eps_v = 1e-4;             // decrease rate for reach-family lie conditions
    double band = 1e-4;              // |B| band replacing the zero-level equality
    double margin = 0.05;            // training margin inside every relu
    double boundary_band_rel = 1e-3; // relative width of the ROA boundary band
    double train_band = 0.1;         // |B| band used to select lie-training samples
    bool strict_lyapunov_decrease = false;  // verify Vdot < 0 instead of Vdot <= 0
};

struct Candidate {
    Network primary;
    std::optional<Network> secondary;   // B for SWA, W for RAR
    std::optional<Network> controller;
};

struct CandidateGrads {
    NetGrads primary;
    std::optional<NetGrads> secondary;
    std::optional<NetGrads> controller;

    explicit CandidateGrads(const Candidate& c) : primary(c.primary) {
        if (c.secondary) secondary.emplace(*c.secondary);
        if (c.controller) controller.emplace(*c.controller);
    }

    void zero() {
        primary.zero();
        if (secondary) secondary->zero();
        if (controller) controller->zero();
    }

    bool finite() const {
        return primary.finite() && (!secondary || secondary->finite()) &&
               (!controller || controller->finite());
    }
};

// ---------------------------------------------------------------------------
// Data requirements

struct DataRequirement {
    std::string key;       // dataset name; counterexamples route back by this
    Domain region;         // geometric region (sampling and enrichment filter)
    SetRole count_role;    // N_DATA entry that sizes the initial sample
    bool boundary = false; // draw from the boundary instead of the interior
};

inline std::vector<DataRequirement> data_requirements(CertificateKind k, const SetAssignment& sets) {
    for (SetRole r : required_roles(k)) (void)sets.at(r);  // presence check
    auto diff = [&](SetRole outer, SetRole inner) {
        return Domain::difference(sets.at(outer), sets.at(inner));
    };
    switch (k) {
        case CertificateKind::Lyapunov: return {{"domain", sets.at(SetRole::XD), SetRole::XD, false}};
        case CertificateKind::Roa:
            return {{"domain", sets.at(SetRole::XD), SetRole::XD, false},
                    {"init", sets.at(SetRole::XI), SetRole::XI, false},
                    {"domain_boundary", sets.at(SetRole::XD), SetRole::XD, true}};
        case CertificateKind::Barrier:
        case CertificateKind::Swa:
            return {{"domain", sets.at(SetRole::XD), SetRole::XD, false},
                    {"init", sets.at(SetRole::XI), SetRole::XI, false},
                    {"unsafe", sets.at(SetRole::XU), SetRole::XU, false}};
        case CertificateKind::Rwa:
            return {{"init", sets.at(SetRole::XI), SetRole::XI, false},
                    {"outside_safe", diff(SetRole::XD, SetRole::XS), SetRole::XD, false},
                    {"safe_transit", diff(SetRole::XS, SetRole::XG), SetRole::XS, false}};
        case CertificateKind::Rswa:
            return {{"init", sets.at(SetRole::XI), SetRole::XI, false},
                    {"outside_safe", diff(SetRole::XD, SetRole::XS), SetRole::XD, false},
                    {"safe", sets.at(SetRole::XS), SetRole::XS, false},
                    {"safe_not_final", diff(SetRole::XS, SetRole::XF), SetRole::XS, false}};
        case CertificateKind::Rar:
            return {{"init", sets.at(SetRole::XI), SetRole::XI, false},
                    {"outside_safe", diff(SetRole::XD, SetRole::XS), SetRole::XD, false},
                    {"safe_transit", diff(SetRole::XS, SetRole::XG), SetRole::XS, false},
                    {"goal", sets.at(SetRole::XG), SetRole::XG, false},
                    {"outside_final", diff(SetRole::XD, SetRole::XF), SetRole::XD, false},
                    {"final", sets.at(SetRole::XF), SetRole::XF, false}};
    }
    return {};
}

// Dataset the cosine control loss averages over.
inline const char* control_data_key(CertificateKind k) {
    switch (k) {
        case CertificateKind::Rwa:
        case CertificateKind::Rar: return "safe_transit";
        case CertificateKind::Rswa: return "safe";
        default: return "domain";
    }
}

using Batches = std::map<std::string, std::vector<double>>;  // key -> row-major points

// ---------------------------------------------------------------------------
// Numeric evaluation unit: V (and optionally its lie update) over one
// dataset, with reverse-mode chaining through the certificate network and,
// when present, the controller.

class EvalUnit {
public:
    void forward(const Network& net, const Network* controller, const DynamicalModel& model,
                 std::span<const double> states, bool need_lie) {
        net_ = &net;
        controller_ = controller;
        model_ = &model;
        states_.assign(states.begin(), states.end());
        const int n = model.n_vars;
        count_ = n > 0 ? states.size() / n : 0;
        need_lie_ = need_lie;
        if (controller) {
            ctrl_batch_.forward(*controller, states);
            u_ = ctrl_batch_.values();
        } else {
            u_.clear();
        }
        if (need_lie) {
            field_values(states);
            if (model.time_domain == TimeDomain::Continuous) {
                batch_.forward(net, states, f_);
                lie_ = batch_.tangent_values();
            } else {
                batch_.forward(net, states);
                fx_batch_.forward(net, f_);
                lie_.resize(count_);
                for (std::size_t s = 0; s < count_; ++s)
                    lie_[s] = fx_batch_.values()[s] - batch_.values()[s];
            }
        } else {
            batch_.forward(net, states);
            lie_.clear();
        }
    }

    std::size_t count() const { return count_; }
    const std::vector<double>& V() const { return batch_.values(); }
    const std::vector<double>& lie() const { return lie_; }
    const std::vector<double>& inputs() const { return u_; }

    // dV / dLie: per-sample loss gradients (empty dLie allowed).  Accumulates
    // into the certificate grads and chains lie/control dependencies into the
    // controller grads when present.
    void backward(std::span<const double> dV, std::span<const double> dLie, NetGrads& net_grads,
                  NetGrads* ctrl_grads) {
        const int n = model_->n_vars;
        const int m = model_->n_inputs;
        std::vector<double> dLdu(count_ * std::max(1, m), 0.0);
        bool have_du = false;
        if (!need_lie_ || lie_.empty() || dLie.empty()) {
            std::vector<double> zero(count_, 0.0);
            batch_.backward(dV.empty() ? zero : dV, {}, net_grads);
        } else if (model_->time_domain == TimeDomain::Continuous) {
            auto back = batch_.backward(dV, dLie, net_grads);
            if (controller_ && ctrl_grads) {
                // dL/du = J^T dL/df with J = df/du at (x, u).
                std::vector<double> jac(n * m);
                for (std::size_t s = 0; s < count_; ++s) {
                    jacobian_->eval(std::span<const double>(states_).subspan(s * n, n),
                                    std::span<const double>(u_).subspan(s * m, m),
                                    std::span<double>(jac));
                    for (int j = 0; j < m; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < n; ++i) acc += jac[i * m + j] * back.dtangent[s * n + i];
                        dLdu[s * m + j] = acc;
                    }
                }
                have_du = true;
            }
        } else {
            // delta-V = V(f(x)) - V(x).
            std::vector<double> dx(count_), dy(count_);
            for (std::size_t s = 0; s < count_; ++s) {
                dx[s] = (dV.empty() ? 0.0 : dV[s]) - dLie[s];
                dy[s] = dLie[s];
            }
            batch_.backward(dx, {}, net_grads);
            auto back_y = fx_batch_.backward(dy, {}, net_grads);
            if (controller_ && ctrl_grads) {
                std::vector<double> jac(n * m);
                for (std::size_t s = 0; s < count_; ++s) {
                    jacobian_->eval(std::span<const double>(states_).subspan(s * n, n),
                                    std::span<const double>(u_).subspan(s * m, m),
                                    std::span<double>(jac));
                    for (int j = 0; j < m; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < n; ++i) acc += jac[i * m + j] * back_y.dinput[s * n + i];
                        dLdu[s * m + j] = acc;
                    }
                }
                have_du = true;
            }
        }
        if (have_du && ctrl_grads) ctrl_batch_.backward(dLdu, {}, *ctrl_grads);
    }

    // Adds extra dL/du contributions (from the control loss) into the
    // controller parameters using the cached controller forward pass.
    void backward_control_only(std::span<const double> dLdu, NetGrads& ctrl_grads) {
        ctrl_batch_.backward(dLdu, {}, ctrl_grads);
    }

    const std::vector<double>& field() const { return f_; }

private:
    void field_values(std::span<const double> states) {
        const int n = model_->n_vars, m = model_->n_inputs;
        f_.assign(count_ * n, 0.0);
        if (!tapes_) {
            tapes_.emplace();
            for (const auto& c : model_->field) tapes_->push_back(ExprTape::compile(c));
            if (m > 0) jacobian_.emplace(*model_);
        }
        std::vector<double> scratch;
        for (std::size_t s = 0; s < count_; ++s) {
            std::span<const double> x = states.subspan(s * n, n);
            std::span<const double> urow =
                m > 0 ? std::span<const double>(u_).subspan(s * m, m) : std::span<const double>{};
            for (int i = 0; i < n; ++i) f_[s * n + i] = (*tapes_)[i].eval(x, urow, scratch, s);
        }
    }

    const Network* net_ = nullptr;
    const Network* controller_ = nullptr;
    const DynamicalModel* model_ = nullptr;
    std::vector<double> states_, u_, f_, lie_;
    NetBatch batch_, fx_batch_, ctrl_batch_;
    std::optional<std::vector<ExprTape>> tapes_;
    std::optional<InputJacobian> jacobian_;
    std::size_t count_ = 0;
    bool need_lie_ = false;
};

// ---------------------------------------------------------------------------
// Constraint groups

struct ConstraintGroup {
    std::string name;
    Formula formula;           // negated condition conjoined with its region
    std::string condition_id;  // stable id used by fidelity re-evaluation
    std::string data_key;      // dataset that receives counterexamples
};

struct CandidateExpressions {
    Expr V;
    Expr V_lie;  // Vdot (continuous) or delta-V (discrete), closed loop composed
    std::optional<Expr> W;
    std::optional<Expr> W_lie;
    std::vector<Expr> controller;  // one expression per input, when present
    double beta = 0.0;
    double gamma = 0.0;
};

// ---------------------------------------------------------------------------
// The synthesis problem: loss, groups, and fidelity slacks for one kind.

class SynthesisProblem {
public:
    CertificateKind kind;
    DynamicalModel model;  // open loop
    SetAssignment sets;
    CertificateConstants consts;

    SynthesisProblem(CertificateKind kind, DynamicalModel model, SetAssignment sets,
                     CertificateConstants consts = {})
        : kind(kind), model(std::move(model)), sets(std::move(sets)), consts(consts) {
        if (!kind_supports(kind, this->model.time_domain))
            throw CertificateError(std::string(kind_name(kind)) + " does not support " +
                                   time_domain_name(this->model.time_domain));
        reqs_ = data_requirements(kind, this->sets);
    }

    const std::vector<DataRequirement>& requirements() const { return reqs_; }

    const DataRequirement& requirement(const std::string& key) const {
        for (const auto& r : reqs_)
            if (r.key == key) return r;
        throw CertificateError("unknown data requirement: " + key);
    }

    // ------------------------------------------------------------------
    // Loss

    struct LossResult {
        double loss = 0.0;
        std::map<std::string, std::size_t> violations;  // per condition id
        std::size_t violations_total = 0;
    };

    // Sum over conditions of mean(relu(margin - s)); optional gradient
    // accumulation.  Conditions are enumerated per kind below.
    LossResult loss(Candidate& cand, const Batches& data, CandidateGrads* grads) const {
        LossResult out;
        const Network* ctrl = cand.controller ? &*cand.controller : nullptr;
        NetGrads* ctrl_grads = grads && grads->controller ? &*grads->controller : nullptr;

        auto unit = [&](const std::string& key, const Network& net, bool lie) -> EvalUnit& {
            EvalUnit& u = units_[key + "#" + (lie ? "L" : "V") + (&net == &cand.primary ? "p" : "s")];
            auto it = data.find(key);
            if (it == data.end() || it->second.empty())
                throw CertificateError("no data for requirement: " + key);
            u.forward(net, ctrl, model, it->second, lie);
            return u;
        };

        // One relu term: slack s per sample, gradient routed via callback.
        struct Term {
            EvalUnit* unit;
            std::vector<double> dV, dLie;
            NetGrads* net_grads;
        };
        std::vector<Term> terms;

        auto add_condition = [&](const std::string& id, EvalUnit& u, NetGrads* net_grads,
                                 auto&& slack_fn, auto&& grad_fn) {
            const std::size_t count = u.count();
            Term t{&u, std::vector<double>(count, 0.0), std::vector<double>(count, 0.0), net_grads};
            double sum = 0.0;
            std::size_t active = 0, violated = 0;
            for (std::size_t s = 0; s < count; ++s) {
                const auto slack = slack_fn(s);
                if (!slack.has_value()) continue;  // masked out
                ++active;
                if (*slack < 0) ++violated;
                const double r = consts.margin - *slack;
                if (r > 0) {
                    sum += r;
                    grad_fn(s, t);  // writes d(-s)/d(V,lie,levels) scaled later
                }
            }
            const double scale = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
            out.loss += sum * scale;
            out.violations[id] += violated;
            out.violations_total += violated;
            if (grads) {
                for (auto& v : t.dV) v *= scale;
                for (auto& v : t.dLie) v *= scale;
                terms.push_back(std::move(t));
            }
        };

        NetGrads* pg = grads ? &grads->primary : nullptr;
        NetGrads* sg = grads && grads->secondary ? &*grads->secondary : nullptr;

        auto level_grad = [&](Network& net, const char* name, double g) {
            if (!grads) return;
            for (std::size_t i = 0; i < net.level_names.size(); ++i)
                if (net.level_names[i] == name) grads->primary.levels[i] += g;
        };

        switch (kind) {
            case CertificateKind::Lyapunov: {
                EvalUnit& u = unit("domain", cand.primary, true);
                add_condition(
                    "positivity", u, pg, [&](std::size_t s) { return std::optional(u.V()[s]); },
                    [&](std::size_t s, Term& t) { t.dV[s] += -1.0; });
                add_condition(
                    "decrease", u, pg, [&](std::size_t s) { return std::optional(-u.lie()[s]); },
                    [&](std::size_t s, Term& t) { t.dLie[s] += 1.0; });
                break;
            }
            case CertificateKind::Roa: {
                const double beta = cand.primary.level("beta");
                EvalUnit& ud = unit("domain", cand.primary, true);
                add_condition(
                    "positivity", ud, pg,
                    [&](std::size_t s) {
                        return ud.V()[s] <= beta ? std::optional(ud.V()[s]) : std::nullopt;
                    },
                    [&](std::size_t s, Term& t) { t.dV[s] += -1.0; });
                add_condition(
                    "decrease", ud, pg,
                    [&](std::size_t s) {
                        return ud.V()[s] <= beta ? std::optional(-ud.lie()[s]) : std::nullopt;
                    },
                    [&](std::size_t s, Term& t) { t.dLie[s] += 1.0; });
                EvalUnit& ui = unit("init", cand.primary, false);
                add_condition(
                    "init_level", ui, pg,
                    [&](std::size_t s) { return std::optional(beta - ui.V()[s]); },
                    [&](std::size_t s, Term& t) {
                        t.dV[s] += 1.0;
                        level_grad(cand.primary, "beta", -1.0 / static_cast<double>(ui.count()));
                    });
                EvalUnit& ub = unit("domain_boundary", cand.primary, false);
                add_condition(
                    "boundary_level", ub, pg,
                    [&](std::size_t s) { return std::optional(ub.V()[s] - beta); },
                    [&](std::size_t s, Term& t) {
                        t.dV[s] += -1.0;
                        level_grad(cand.primary, "beta", 1.0 / static_cast<double>(ub.count()));
                    });
                break;
            }
            case CertificateKind::Barrier: {
                barrier_conditions(cand.primary, "", cand, data, unit, add_condition, pg);
                break;
            }
            case CertificateKind::Swa: {
                EvalUnit& u = unit("domain", cand.primary, true);
                add_condition(
                    "positivity", u, pg, [&](std::size_t s) { return std::optional(u.V()[s]); },
                    [&](std::size_t s, Term& t) { t.dV[s] += -1.0; });
                add_condition(
                    "decrease", u, pg, [&](std::size_t s) { return std::optional(-u.lie()[s]); },
                    [&](std::size_t s, Term& t) { t.dLie[s] += 1.0; });
                if (!cand.secondary) throw CertificateError("SWA needs a secondary network");
                barrier_conditions(*cand.secondary, "barrier_", cand, data, unit, add_condition, sg);
                break;
            }
            case CertificateKind::Rwa: {
                rwa_conditions(cand.primary, "", "safe_transit", cand, data, unit, add_condition, pg);
                break;
            }
            case CertificateKind::Rswa: {
                const double gamma = cand.primary.level("gamma");
                EvalUnit& ui = unit("init", cand.primary, false);
                add_condition(
                    "init", ui, pg, [&](std::size_t s) { return std::optional(-ui.V()[s]); },
                    [&](std::size_t s, Term& t) { t.dV[s] += 1.0; });
                EvalUnit& uo = unit("outside_safe", cand.primary, false);
                add_condition(
                    "outside", uo, pg, [&](std::size_t s) { return std::optional(uo.V()[s]); },
                    [&](std::size_t s, Term& t) { t.dV[s] += -1.0; });
                EvalUnit& uc = unit("safe_not_final", cand.primary, false);
                add_condition(
                    "containment", uc, pg,
                    [&](std::size_t s) { return std::optional(uc.V()[s] - gamma); },
                    [&](std::size_t s, Term& t) {
                        t.dV[s] += -1.0;
                        level_grad(cand.primary, "gamma", 1.0 / static_cast<double>(uc.count()));
                    });
                EvalUnit& us = unit("safe", cand.primary, true);
                add_condition(
                    "transit_decrease", us, pg,
                    [&](std::size_t s) {
                        const double v = us.V()[s];
                        if (v < gamma || v > 0.0) return std::optional<double>();
                        return std::optional(-us.lie()[s] - consts.eps_v);
                    },
                    [&](std::size_t s, Term& t) { t.dLie[s] += 1.0; });
                break;
            }
            case CertificateKind::Rar: {
                rwa_conditions(cand.primary, "", "safe_transit", cand, data, unit, add_condition, pg);
                if (!cand.secondary) throw CertificateError("RAR needs a secondary network");
                Network& W = *cand.secondary;
                EvalUnit& ug = unit("goal", W, false);
                add_condition(
                    "goal", ug, sg, [&](std::size_t s) { return std::optional(-ug.V()[s]); },
                    [&](std::size_t s, Term& t) { t.dV[s] += 1.0; });
                EvalUnit& uo = unit("outside_final", W, false);
                add_condition(
                    "outside_final", uo, sg, [&](std::size_t s) { return std::optional(uo.V()[s]); },
                    [&](std::size_t s, Term& t) { t.dV[s] += -1.0; });
                EvalUnit& uf = unit("final", W, true);
                add_condition(
                    "final_band", uf, sg,
                    [&](std::size_t s) {
                        if (std::fabs(uf.V()[s]) > consts.train_band) return std::optional<double>();
                        return std::optional(-uf.lie()[s]);
                    },
                    [&](std::size_t s, Term& t) { t.dLie[s] += 1.0; });
                break;
            }
        }

        if (grads) {
            for (auto& t : terms) t.unit->backward(t.dV, t.dLie, *t.net_grads, ctrl_grads);
        }
        return out;
    }

    // Cosine-similarity control loss plus an optional quadratic input
    // penalty; only defined for controlled models.
    double control_loss(Candidate& cand, const Batches& data, CandidateGrads* grads,
                        double lambda = 0.0) const {
        if (!cand.controller) throw CertificateError("control_loss: no controller present");
        const std::string key = control_data_key(kind);
        auto it = data.find(key);
        if (it == data.end()) throw CertificateError("control_loss: no data for " + key);
        EvalUnit& u = units_["ctrl#" + key];
        u.forward(cand.primary, &*cand.controller, model, it->second, /*need_lie=*/true);
        const int n = model.n_vars, m = model.n_inputs;
        const std::size_t count = u.count();
        const auto& f = u.field();
        const auto& uu = u.inputs();
        const auto& states = it->second;
        double loss = 0.0;
        std::vector<double> dLdf(count * n, 0.0), dLdu(count * m, 0.0);
        const double eps = 1e-8;
        for (std::size_t s = 0; s < count; ++s) {
            double dot = 0, a2 = 0, b2 = 0;
            for (int i = 0; i < n; ++i) {
                const double d = states[s * n + i], fv = f[s * n + i];
                dot += d * fv;
                a2 += d * d;
                b2 += fv * fv;
            }
            const double a = std::sqrt(a2), b = std::sqrt(b2);
            const double denom = a * b + eps;
            loss += dot / denom;
            if (grads) {
                for (int i = 0; i < n; ++i) {
                    const double d = states[s * n + i], fv = f[s * n + i];
                    double g = d / denom;
                    if (b > 1e-12) g -= dot * a * (fv / b) / (denom * denom);
                    dLdf[s * n + i] = g / static_cast<double>(count);
                }
            }
            for (int j = 0; j < m; ++j) {
                const double uj = uu[s * m + j];
                loss += lambda * uj * uj;
                if (grads) dLdu[s * m + j] += 2.0 * lambda * uj / static_cast<double>(count);
            }
        }
        loss = loss / static_cast<double>(count);
        if (grads && grads->controller) {
            // Chain dL/df through df/du into the controller, then add the
            // direct quadratic-penalty gradient.
            InputJacobian jac(model);
            std::vector<double> jbuf(n * m);
            for (std::size_t s = 0; s < count; ++s) {
                jac.eval(std::span<const double>(states).subspan(s * n, n),
                         std::span<const double>(uu).subspan(s * m, m), std::span<double>(jbuf));
                for (int j = 0; j < m; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += jbuf[i * m + j] * dLdf[s * n + i];
                    dLdu[s * m + j] += acc;
                }
            }
            u.backward_control_only(dLdu, *grads->controller);
        }
        return loss;
    }

    // ------------------------------------------------------------------
    // Symbolic side

    // Freeze the candidate into expressions (closing the loop first when a
    // controller is present).
    CandidateExpressions freeze(const Candidate& cand) const {
        CandidateExpressions out;
        DynamicalModel closed = model;
        std::vector<Expr> state_vars;
        for (int i = 0; i < model.n_vars; ++i) state_vars.push_back(ex::state(i));
        if (cand.controller) {
            auto cl = close_loop(model, *cand.controller);
            closed = cl.closed;
            out.controller = cand.controller->to_expression(state_vars);
        } else if (!model.autonomous()) {
            throw CertificateError("controlled model frozen without a controller");
        }
        out.V = cand.primary.to_expression(state_vars)[0];
        out.V_lie = lie_expr(closed, out.V);
        if (cand.secondary) {
            out.W = cand.secondary->to_expression(state_vars)[0];
            out.W_lie = lie_expr(closed, *out.W);
        }
        if (auto lvl = level_name(kind)) {
            const double v = cand.primary.level(*lvl);
            if (*lvl == "beta") out.beta = v;
            if (*lvl == "gamma") out.gamma = v;
        }
        return out;
    }

    std::vector<ConstraintGroup> constraint_groups(const CandidateExpressions& ce) const {
        std::vector<ConstraintGroup> out;
        const Formula domain = sets.has(SetRole::XD) ? sets.at(SetRole::XD).membership() : nullptr;
        auto origin = [&] {
            std::vector<Formula> parts;
            for (int i = 0; i < model.n_vars; ++i)
                parts.push_back(fm::atom(ex::state(i), Rel::Ne, 0.0));
            return fm::disj(std::move(parts));
        };

        auto lyapunov_groups = [&](const std::string& prefix) {
            out.push_back({prefix + "positivity",
                           fm::conj({fm::atom(ce.V, Rel::Le, 0.0), domain, origin()}), "positivity",
                           "domain"});
            if (consts.strict_lyapunov_decrease) {
                out.push_back({prefix + "decrease",
                               fm::conj({fm::atom(ce.V_lie, Rel::Ge, 0.0), domain, origin()}),
                               "decrease", "domain"});
            } else {
                out.push_back({prefix + "decrease",
                               fm::conj({fm::atom(ce.V_lie, Rel::Gt, 0.0), domain}), "decrease",
                               "domain"});
            }
        };

        auto barrier_groups = [&](const Expr& B, const Expr& B_lie, const std::string& prefix,
                                  const std::string& init_key, const std::string& unsafe_key) {
            out.push_back({prefix + "init",
                           fm::conj({fm::atom(B, Rel::Gt, 0.0), sets.at(SetRole::XI).membership()}),
                           prefix + "init", init_key});
            out.push_back({prefix + "unsafe",
                           fm::conj({fm::atom(B, Rel::Le, 0.0), sets.at(SetRole::XU).membership()}),
                           prefix + "unsafe", unsafe_key});
            if (model.time_domain == TimeDomain::Continuous) {
                out.push_back({prefix + "band",
                               fm::conj({fm::atom(B_lie, Rel::Ge, 0.0), domain,
                                         fm::atom(B, Rel::Ge, -consts.band),
                                         fm::atom(B, Rel::Le, consts.band)}),
                               prefix + "band", "domain"});
            } else {
                out.push_back({prefix + "band",
                               fm::conj({fm::atom(B_lie, Rel::Gt, 0.0), domain,
                                         fm::atom(B, Rel::Ge, 0.0)}),
                               prefix + "band", "domain"});
            }
        };

        auto rwa_groups = [&](const Expr& V, const Expr& V_lie, SetRole goal_role) {
            out.push_back({"init",
                           fm::conj({fm::atom(V, Rel::Gt, 0.0), sets.at(SetRole::XI).membership()}),
                           "init", "init"});
            out.push_back({"outside_safe",
                           fm::conj({fm::atom(V, Rel::Le, 0.0), domain,
                                     fm::negate(sets.at(SetRole::XS).interior_membership())}),
                           "outside", "outside_safe"});
            out.push_back(
                {"transit_decrease",
                 fm::conj({fm::atom(V_lie, Rel::Gt, ex::constant(-consts.eps_v)),
                           sets.at(SetRole::XS).membership(),
                           fm::negate(sets.at(goal_role).membership()), fm::atom(V, Rel::Le, 0.0)}),
                 "transit_decrease", "safe_transit"});
        };

        switch (kind) {
            case CertificateKind::Lyapunov: lyapunov_groups(""); break;
            case CertificateKind::Roa: {
                Expr beta = ex::constant(ce.beta);
                out.push_back({"positivity",
                               fm::conj({fm::atom(ce.V, Rel::Le, 0.0), fm::atom(ce.V, Rel::Le, beta),
                                         domain, origin()}),
                               "positivity", "domain"});
                out.push_back({"decrease",
                               fm::conj({fm::atom(ce.V_lie, Rel::Gt, 0.0),
                                         fm::atom(ce.V, Rel::Le, beta), domain}),
                               "decrease", "domain"});
                out.push_back({"init_level",
                               fm::conj({fm::atom(ce.V, Rel::Gt, beta),
                                         sets.at(SetRole::XI).membership()}),
                               "init_level", "init"});
                out.push_back({"boundary_level",
                               fm::conj({fm::atom(ce.V, Rel::Le, beta),
                                         sets.at(SetRole::XD).boundary_band(consts.boundary_band_rel)}),
                               "boundary_level", "domain_boundary"});
                break;
            }
            case CertificateKind::Barrier:
                barrier_groups(ce.V, ce.V_lie, "", "init", "unsafe");
                break;
            case CertificateKind::Swa:
                lyapunov_groups("");
                if (!ce.W) throw CertificateError("SWA expressions need the barrier function");
                barrier_groups(*ce.W, *ce.W_lie, "barrier_", "init", "unsafe");
                break;
            case CertificateKind::Rwa: rwa_groups(ce.V, ce.V_lie, SetRole::XG); break;
            case CertificateKind::Rswa: {
                Expr gamma = ex::constant(ce.gamma);
                out.push_back({"init",
                               fm::conj({fm::atom(ce.V, Rel::Gt, 0.0),
                                         sets.at(SetRole::XI).membership()}),
                               "init", "init"});
                out.push_back({"outside_safe",
                               fm::conj({fm::atom(ce.V, Rel::Le, 0.0), domain,
                                         fm::negate(sets.at(SetRole::XS).interior_membership())}),
                               "outside", "outside_safe"});
                out.push_back({"containment",
                               fm::conj({sets.at(SetRole::XS).membership(),
                                         fm::atom(ce.V, Rel::Le, gamma),
                                         fm::negate(sets.at(SetRole::XF).membership())}),
                               "containment", "safe_not_final"});
                out.push_back({"transit_decrease",
                               fm::conj({fm::atom(ce.V_lie, Rel::Gt, ex::constant(-consts.eps_v)),
                                         sets.at(SetRole::XS).membership(),
                                         fm::atom(ce.V, Rel::Ge, gamma), fm::atom(ce.V, Rel::Le, 0.0)}),
                               "transit_decrease", "safe"});
                break;
            }
            case CertificateKind::Rar: {
                rwa_groups(ce.V, ce.V_lie, SetRole::XG);
                if (!ce.W) throw CertificateError("RAR expressions need the second function");
                out.push_back({"goal",
                               fm::conj({fm::atom(*ce.W, Rel::Gt, 0.0),
                                         sets.at(SetRole::XG).membership()}),
                               "goal", "goal"});
                out.push_back({"outside_final",
                               fm::conj({fm::atom(*ce.W, Rel::Le, 0.0), domain,
                                         fm::negate(sets.at(SetRole::XF).interior_membership())}),
                               "outside_final", "outside_final"});
                out.push_back({"final_band",
                               fm::conj({fm::atom(*ce.W_lie, Rel::Ge, 0.0),
                                         sets.at(SetRole::XF).membership(),
                                         fm::atom(*ce.W, Rel::Ge, -consts.band),
                                         fm::atom(*ce.W, Rel::Le, consts.band)}),
                               "final_band", "final"});
                break;
            }
        }
        return out;
    }

    // Signed slack of the (non-negated) condition at a point; negative means
    // the point violates the condition.  Evaluated through the frozen
    // expressions, so it works for user-supplied certificates too.
    double condition_slack(const CandidateExpressions& ce, std::span<const double> point,
                           const std::string& condition_id) const {
        auto at = [&](const Expr& e) { return eval_point(e, point); };
        if (condition_id == "positivity") return at(ce.V);
        if (condition_id == "decrease") return -at(ce.V_lie);
        if (condition_id == "init_level") return ce.beta - at(ce.V);
        if (condition_id == "boundary_level") return at(ce.V) - ce.beta;
        if (condition_id == "outside") return at(ce.V);
        if (condition_id == "transit_decrease") return -at(ce.V_lie) - consts.eps_v;
        if (condition_id == "containment") return at(ce.V) - ce.gamma;
        if (condition_id == "goal") return -at(*ce.W);
        if (condition_id == "outside_final") return at(*ce.W);
        if (condition_id == "final_band") return -at(*ce.W_lie);
        // Barrier-style conditions live on the primary function except for
        // SWA, whose barrier is the second network.
        const bool on_secondary = condition_id.rfind("barrier_", 0) == 0;
        const Expr& B = on_secondary ? *ce.W : ce.V;
        const Expr& B_lie = on_secondary ? *ce.W_lie : ce.V_lie;
        if (condition_id == "init" || condition_id == "barrier_init") return -at(B);
        if (condition_id == "unsafe" || condition_id == "barrier_unsafe") return at(B);
        if (condition_id == "band" || condition_id == "barrier_band") return -at(B_lie);
        throw CertificateError("unknown condition id: " + condition_id);
    }

    double condition_slack(const Candidate& cand, std::span<const double> point,
                           const std::string& condition_id) const {
        return condition_slack(freeze(cand), point, condition_id);
    }

private:
    static Expr lie_expr(const DynamicalModel& closed, const Expr& V) {
        if (closed.time_domain == TimeDomain::Continuous) {
            Expr sum;
            for (int i = 0; i < closed.n_vars; ++i) {
                Expr term = ex::mul(differentiate(V, i), closed.field[i]);
                sum = sum ? ex::add(sum, term) : term;
            }
            return sum;
        }
        return ex::sub(substitute(V, closed.field, {}), V);
    }

    template <class UnitFn, class AddFn>
    void barrier_conditions(Network& B, const std::string& prefix, Candidate& cand,
                            const Batches& data, UnitFn& unit, AddFn& add_condition,
                            NetGrads* g) const {
        (void)cand;
        (void)data;
        EvalUnit& ui = unit("init", B, false);
        add_condition(
            prefix + "init", ui, g, [&](std::size_t s) { return std::optional(-ui.V()[s]); },
            [&](std::size_t s, auto& t) { t.dV[s] += 1.0; });
        EvalUnit& uu = unit("unsafe", B, false);
        add_condition(
            prefix + "unsafe", uu, g, [&](std::size_t s) { return std::optional(uu.V()[s]); },
            [&](std::size_t s, auto& t) { t.dV[s] += -1.0; });
        EvalUnit& ud = unit("domain", B, true);
        const bool discrete = model.time_domain == TimeDomain::Discrete;
        add_condition(
            prefix + "band", ud, g,
            [&](std::size_t s) {
                const double b = ud.V()[s];
                if (discrete ? b < -consts.train_band : std::fabs(b) > consts.train_band)
                    return std::optional<double>();
                return std::optional(-ud.lie()[s]);
            },
            [&](std::size_t s, auto& t) { t.dLie[s] += 1.0; });
    }

    template <class UnitFn, class AddFn>
    void rwa_conditions(Network& V, const std::string& prefix, const std::string& transit_key,
                        Candidate& cand, const Batches& data, UnitFn& unit, AddFn& add_condition,
                        NetGrads* g) const {
        (void)cand;
        (void)data;
        EvalUnit& ui = unit("init", V, false);
        add_condition(
            prefix + "init", ui, g, [&](std::size_t s) { return std::optional(-ui.V()[s]); },
            [&](std::size_t s, auto& t) { t.dV[s] += 1.0; });
        EvalUnit& uo = unit("outside_safe", V, false);
        add_condition(
            prefix + "outside", uo, g, [&](std::size_t s) { return std::optional(uo.V()[s]); },
            [&](std::size_t s, auto& t) { t.dV[s] += -1.0; });
        EvalUnit& ut = unit(transit_key, V, true);
        add_condition(
            prefix + "transit_decrease", ut, g,
            [&](std::size_t s) {
                if (ut.V()[s] > 0.0) return std::optional<double>();
                return std::optional(-ut.lie()[s] - consts.eps_v);
            },
            [&](std::size_t s, auto& t) { t.dLie[s] += 1.0; });
    }

    std::vector<DataRequirement> reqs_;
    mutable std::map<std::string, EvalUnit> units_;
};

}  // namespace fossil
