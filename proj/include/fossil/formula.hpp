// Quantifier-free predicates over expressions: atoms (term REL term) combined
// with and/or, kept in negation normal form.  These encode set membership and
// certificate constraint groups.

#pragma once

#include <memory>
#include <span>
#include <vector>

#include "fossil/expr.hpp"

namespace fossil {

enum class Rel { Le, Lt, Ge, Gt, Eq, Ne };

struct FormulaNode;
using Formula = std::shared_ptr<const FormulaNode>;

struct FormulaNode {
    enum class Kind { Atom, And, Or } kind;
    // Atom
    Expr lhs, rhs;
    Rel rel = Rel::Le;
    // And / Or
    std::vector<Formula> children;
};

namespace fm {

inline Formula atom(Expr lhs, Rel rel, Expr rhs) {
    auto n = std::make_shared<FormulaNode>();
    n->kind = FormulaNode::Kind::Atom;
    n->lhs = std::move(lhs);
    n->rel = rel;
    n->rhs = std::move(rhs);
    return n;
}

inline Formula atom(Expr lhs, Rel rel, double rhs) { return atom(std::move(lhs), rel, ex::constant(rhs)); }

inline Formula conj(std::vector<Formula> children) {
    if (children.size() == 1) return children[0];
    auto n = std::make_shared<FormulaNode>();
    n->kind = FormulaNode::Kind::And;
    n->children = std::move(children);
    return n;
}

inline Formula disj(std::vector<Formula> children) {
    if (children.size() == 1) return children[0];
    auto n = std::make_shared<FormulaNode>();
    n->kind = FormulaNode::Kind::Or;
    n->children = std::move(children);
    return n;
}

inline Rel negate_rel(Rel r) {
    switch (r) {
        case Rel::Le: return Rel::Gt;
        case Rel::Lt: return Rel::Ge;
        case Rel::Ge: return Rel::Lt;
        case Rel::Gt: return Rel::Le;
        case Rel::Eq: return Rel::Ne;
        case Rel::Ne: return Rel::Eq;
    }
    return Rel::Le;
}

// Negation in NNF: flips atoms, swaps and/or.
inline Formula negate(const Formula& f) {
    if (f->kind == FormulaNode::Kind::Atom) return atom(f->lhs, negate_rel(f->rel), f->rhs);
    std::vector<Formula> neg;
    neg.reserve(f->children.size());
    for (const auto& c : f->children) neg.push_back(negate(c));
    auto n = std::make_shared<FormulaNode>();
    n->kind = f->kind == FormulaNode::Kind::And ? FormulaNode::Kind::Or : FormulaNode::Kind::And;
    n->children = std::move(neg);
    return n;
}

}  // namespace fm

inline bool rel_holds(double lhs, Rel rel, double rhs) {
    switch (rel) {
        case Rel::Le: return lhs <= rhs;
        case Rel::Lt: return lhs < rhs;
        case Rel::Ge: return lhs >= rhs;
        case Rel::Gt: return lhs > rhs;
        case Rel::Eq: return lhs == rhs;
        case Rel::Ne: return lhs != rhs;
    }
    return false;
}

// Pointwise truth of a formula, evaluated in doubles.
inline bool formula_holds(const Formula& f, std::span<const double> state) {
    switch (f->kind) {
        case FormulaNode::Kind::Atom:
            return rel_holds(eval_point(f->lhs, state), f->rel, eval_point(f->rhs, state));
        case FormulaNode::Kind::And:
            for (const auto& c : f->children)
                if (!formula_holds(c, state)) return false;
            return true;
        case FormulaNode::Kind::Or:
            for (const auto& c : f->children)
                if (formula_holds(c, state)) return true;
            return false;
    }
    return false;
}

inline bool formula_is_polynomial(const Formula& f) {
    if (f->kind == FormulaNode::Kind::Atom)
        return expr_is_polynomial(f->lhs) && expr_is_polynomial(f->rhs);
    for (const auto& c : f->children)
        if (!formula_is_polynomial(c)) return false;
    return true;
}

inline bool formula_equal(const Formula& a, const Formula& b) {
    if (a->kind != b->kind) return false;
    if (a->kind == FormulaNode::Kind::Atom)
        return a->rel == b->rel && expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
    if (a->children.size() != b->children.size()) return false;
    for (std::size_t i = 0; i < a->children.size(); ++i)
        if (!formula_equal(a->children[i], b->children[i])) return false;
    return true;
}

}  // namespace fossil
