// SMT-LIB 2 serialization of expressions and formulas.
//
// Two serializers: a plain recursive one (small terms, matches the documented
// output forms exactly) and a let-binding one that preserves DAG sharing so
// unrolled network expressions do not explode the script size.  Constants are
// printed as exact decimal expansions of the underlying double.

#pragma once

#include <string>
#include <unordered_map>

#include "fossil/decimal.hpp"
#include "fossil/expr.hpp"
#include "fossil/formula.hpp"

namespace fossil {

namespace detail {

inline void smt_term(const Expr& e, std::string& out);

inline void smt_unary(const char* fn, const Expr& arg, std::string& out) {
    out += "(";
    out += fn;
    out += " ";
    smt_term(arg, out);
    out += ")";
}

inline void smt_term(const Expr& e, std::string& out) {
    switch (e->op) {
        case ExprOp::Constant:
            if (e->value < 0) {
                out += "(- " + exact_decimal_magnitude(e->value) + ")";
            } else {
                out += exact_decimal_magnitude(e->value);
            }
            return;
        case ExprOp::StateVar: out += "x" + std::to_string(e->index); return;
        case ExprOp::InputVar: out += "u" + std::to_string(e->index); return;
        case ExprOp::Neg: smt_unary("-", e->a, out); return;
        case ExprOp::Add:
            out += "(+ ";
            smt_term(e->a, out);
            out += " ";
            smt_term(e->b, out);
            out += ")";
            return;
        case ExprOp::Sub:
            out += "(- ";
            smt_term(e->a, out);
            out += " ";
            smt_term(e->b, out);
            out += ")";
            return;
        case ExprOp::Mul:
            out += "(* ";
            smt_term(e->a, out);
            out += " ";
            smt_term(e->b, out);
            out += ")";
            return;
        case ExprOp::Div:
            out += "(/ ";
            smt_term(e->a, out);
            out += " ";
            smt_term(e->b, out);
            out += ")";
            return;
        case ExprOp::Pow: {
            // Expanded to repeated multiplication so the script stays in NRA.
            out += "(*";
            for (int k = 0; k < e->exponent; ++k) {
                out += " ";
                smt_term(e->a, out);
            }
            out += ")";
            return;
        }
        case ExprOp::Sin: smt_unary("sin", e->a, out); return;
        case ExprOp::Cos: smt_unary("cos", e->a, out); return;
        case ExprOp::Exp: smt_unary("exp", e->a, out); return;
        case ExprOp::Sigmoid:
            out += "(/ 1.0 (+ 1.0 (exp (- ";
            smt_term(e->a, out);
            out += "))))";
            return;
        case ExprOp::Tanh: smt_unary("tanh", e->a, out); return;
        case ExprOp::Softplus:
            out += "(log (+ 1.0 (exp ";
            smt_term(e->a, out);
            out += ")))";
            return;
    }
}

inline const char* rel_symbol(Rel r) {
    switch (r) {
        case Rel::Le: return "<=";
        case Rel::Lt: return "<";
        case Rel::Ge: return ">=";
        case Rel::Gt: return ">";
        case Rel::Eq: return "=";
        case Rel::Ne: return "distinct";
    }
    return "<=";
}

}  // namespace detail

inline std::string to_smtlib(const Expr& e) {
    std::string out;
    detail::smt_term(e, out);
    return out;
}

inline std::string to_smtlib(const Formula& f) {
    switch (f->kind) {
        case FormulaNode::Kind::Atom: {
            // Ne is emitted as a strict disjunction; it keeps scripts in the
            // common subset every driven solver accepts.
            if (f->rel == Rel::Ne) {
                std::string a = to_smtlib(f->lhs), b = to_smtlib(f->rhs);
                return "(or (< " + a + " " + b + ") (> " + a + " " + b + "))";
            }
            return std::string("(") + detail::rel_symbol(f->rel) + " " + to_smtlib(f->lhs) + " " +
                   to_smtlib(f->rhs) + ")";
        }
        case FormulaNode::Kind::And:
        case FormulaNode::Kind::Or: {
            std::string out = f->kind == FormulaNode::Kind::And ? "(and" : "(or";
            for (const auto& c : f->children) out += " " + to_smtlib(c);
            out += ")";
            return out;
        }
    }
    return "";
}

// ---------------------------------------------------------------------------
// Sharing-aware serialization.  Expression nodes referenced more than once in
// the formula DAG become let bindings (t0, t1, ... in topological order), so
// a candidate network unrolled into a deep shared DAG emits in linear size.

namespace detail {

struct LetEmitter {
    std::unordered_map<const ExprNode*, int> refs;
    std::unordered_map<const ExprNode*, std::string> names;
    std::vector<const ExprNode*> order;  // nodes needing bindings, topo order

    void count(const Expr& e) {
        auto [it, fresh] = refs.try_emplace(e.get(), 0);
        it->second++;
        if (!fresh) return;
        if (e->a) count(e->a);
        if (e->b) count(e->b);
    }

    bool bindable(const ExprNode& n) const {
        return n.op != ExprOp::Constant && n.op != ExprOp::StateVar && n.op != ExprOp::InputVar;
    }

    void collect(const Expr& e) {
        if (names.count(e.get())) return;
        if (e->a) collect(e->a);
        if (e->b) collect(e->b);
        if (bindable(*e) && refs[e.get()] > 1) {
            names.emplace(e.get(), "t" + std::to_string(order.size()));
            order.push_back(e.get());
        }
    }

    void term(const Expr& e, std::string& out, bool as_binding_body = false) {
        if (!as_binding_body) {
            if (auto it = names.find(e.get()); it != names.end()) {
                out += it->second;
                return;
            }
        }
        switch (e->op) {
            case ExprOp::Pow: {
                out += "(*";
                for (int k = 0; k < e->exponent; ++k) {
                    out += " ";
                    term(e->a, out);
                }
                out += ")";
                return;
            }
            case ExprOp::Sigmoid:
                out += "(/ 1.0 (+ 1.0 (exp (- ";
                term(e->a, out);
                out += "))))";
                return;
            case ExprOp::Softplus:
                out += "(log (+ 1.0 (exp ";
                term(e->a, out);
                out += ")))";
                return;
            case ExprOp::Neg:
            case ExprOp::Sin:
            case ExprOp::Cos:
            case ExprOp::Exp:
            case ExprOp::Tanh: {
                const char* fn = e->op == ExprOp::Neg   ? "-"
                                 : e->op == ExprOp::Sin ? "sin"
                                 : e->op == ExprOp::Cos ? "cos"
                                 : e->op == ExprOp::Exp ? "exp"
                                                        : "tanh";
                out += "(";
                out += fn;
                out += " ";
                term(e->a, out);
                out += ")";
                return;
            }
            case ExprOp::Add:
            case ExprOp::Sub:
            case ExprOp::Mul:
            case ExprOp::Div: {
                const char* fn = e->op == ExprOp::Add   ? "+"
                                 : e->op == ExprOp::Sub ? "-"
                                 : e->op == ExprOp::Mul ? "*"
                                                        : "/";
                out += "(";
                out += fn;
                out += " ";
                term(e->a, out);
                out += " ";
                term(e->b, out);
                out += ")";
                return;
            }
            default: smt_term(e, out); return;
        }
    }

    void formula(const Formula& f, std::string& out) {
        switch (f->kind) {
            case FormulaNode::Kind::Atom: {
                if (f->rel == Rel::Ne) {
                    std::string a, b;
                    term(f->lhs, a);
                    term(f->rhs, b);
                    out += "(or (< " + a + " " + b + ") (> " + a + " " + b + "))";
                    return;
                }
                out += "(";
                out += rel_symbol(f->rel);
                out += " ";
                term(f->lhs, out);
                out += " ";
                term(f->rhs, out);
                out += ")";
                return;
            }
            case FormulaNode::Kind::And:
            case FormulaNode::Kind::Or: {
                out += f->kind == FormulaNode::Kind::And ? "(and" : "(or";
                for (const auto& c : f->children) {
                    out += " ";
                    formula(c, out);
                }
                out += ")";
                return;
            }
        }
    }
};

}  // namespace detail

// Serialize a formula with let bindings for shared subterms.
inline std::string to_smtlib_shared(const Formula& f) {
    detail::LetEmitter em;
    // Count references across the whole formula first.
    {
        // Traverse atoms without double-counting formula structure.
        std::vector<const FormulaNode*> stack{f.get()};
        while (!stack.empty()) {
            const FormulaNode* n = stack.back();
            stack.pop_back();
            if (n->kind == FormulaNode::Kind::Atom) {
                em.count(n->lhs);
                em.count(n->rhs);
            } else {
                for (const auto& c : n->children) stack.push_back(c.get());
            }
        }
    }
    {
        std::vector<const FormulaNode*> stack{f.get()};
        while (!stack.empty()) {
            const FormulaNode* n = stack.back();
            stack.pop_back();
            if (n->kind == FormulaNode::Kind::Atom) {
                // collect is order-sensitive; use recursive DFS from each atom.
                struct Walk {
                    detail::LetEmitter& em;
                    void operator()(const Expr& e) { em.collect(e); }
                } walk{em};
                walk(n->lhs);
                walk(n->rhs);
            } else {
                for (auto it = n->children.rbegin(); it != n->children.rend(); ++it)
                    stack.push_back(it->get());
            }
        }
    }
    if (em.order.empty()) {
        std::string out;
        em.formula(f, out);
        return out;
    }
    std::string out;
    for (const auto* node : em.order) {
        out += "(let ((" + em.names[node] + " ";
        // Bind using previously bound names for subterms.
        Expr holder(node, [](const ExprNode*) {});  // non-owning alias
        em.term(holder, out, /*as_binding_body=*/true);
        out += ")) ";
    }
    em.formula(f, out);
    for (std::size_t i = 0; i < em.order.size(); ++i) out += ")";
    return out;
}

}  // namespace fossil
