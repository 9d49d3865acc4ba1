// Arithmetic expression IR over state variables x0.. and input variables u0..
//
// One tree, two interpretations: batched numeric evaluation (via a compiled
// tape) for the learner, and SMT-LIB text (see smt2.hpp) for the verifier.
// Nodes are immutable and shared; construction does constant folding and 0/1
// identities, nothing more, so both interpretations stay trivially aligned.

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fossil/decimal.hpp"

namespace fossil {

enum class ExprOp {
    Constant,
    StateVar,
    InputVar,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,  // non-negative integer exponent only
    Sin,
    Cos,
    Exp,
    Sigmoid,
    Tanh,
    Softplus,
};

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    ExprOp op;
    double value = 0.0;  // Constant
    int index = -1;      // StateVar / InputVar
    int exponent = 0;    // Pow
    Expr a, b;           // children; unary ops use a only
};

struct ExprError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : ExprError {
    ParseError(const std::string& msg, std::size_t pos)
        : ExprError(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
    std::size_t position;
};

struct EvalError : ExprError {
    EvalError(const std::string& msg, std::size_t sample)
        : ExprError(msg + " (sample " + std::to_string(sample) + ")"), sample_index(sample) {}
    std::size_t sample_index;
};

// ---------------------------------------------------------------------------
// Construction

namespace ex {

inline Expr constant(double v) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::Constant;
    n->value = v;
    return n;
}

inline Expr state(int i) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::StateVar;
    n->index = i;
    return n;
}

inline Expr input(int i) {
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::InputVar;
    n->index = i;
    return n;
}

inline bool is_const(const Expr& e, double v) { return e->op == ExprOp::Constant && e->value == v; }

inline Expr neg(Expr e) {
    if (e->op == ExprOp::Constant) return constant(-e->value);
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::Neg;
    n->a = std::move(e);
    return n;
}

inline Expr binary(ExprOp op, Expr a, Expr b) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

inline Expr add(Expr a, Expr b) {
    if (a->op == ExprOp::Constant && b->op == ExprOp::Constant) return constant(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return binary(ExprOp::Add, std::move(a), std::move(b));
}

inline Expr sub(Expr a, Expr b) {
    if (a->op == ExprOp::Constant && b->op == ExprOp::Constant) return constant(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return neg(std::move(b));
    return binary(ExprOp::Sub, std::move(a), std::move(b));
}

inline Expr mul(Expr a, Expr b) {
    if (a->op == ExprOp::Constant && b->op == ExprOp::Constant) return constant(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    return binary(ExprOp::Mul, std::move(a), std::move(b));
}

inline Expr divide(Expr a, Expr b) {
    if (a->op == ExprOp::Constant && b->op == ExprOp::Constant && b->value != 0.0)
        return constant(a->value / b->value);
    if (is_const(b, 1.0)) return a;
    return binary(ExprOp::Div, std::move(a), std::move(b));
}

inline Expr pow_i(Expr base, int exponent) {
    if (exponent < 0) throw ExprError("pow: exponent must be non-negative");
    if (exponent == 0) return constant(1.0);
    if (exponent == 1) return base;
    if (base->op == ExprOp::Constant) return constant(std::pow(base->value, exponent));
    auto n = std::make_shared<ExprNode>();
    n->op = ExprOp::Pow;
    n->a = std::move(base);
    n->exponent = exponent;
    return n;
}

inline Expr unary(ExprOp op, Expr e, double (*fold)(double)) {
    if (e->op == ExprOp::Constant) return constant(fold(e->value));
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->a = std::move(e);
    return n;
}

inline double sigmoid_value(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus_value(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline Expr sin(Expr e) { return unary(ExprOp::Sin, std::move(e), +[](double v) { return std::sin(v); }); }
inline Expr cos(Expr e) { return unary(ExprOp::Cos, std::move(e), +[](double v) { return std::cos(v); }); }
inline Expr exp(Expr e) { return unary(ExprOp::Exp, std::move(e), +[](double v) { return std::exp(v); }); }
inline Expr sigmoid(Expr e) { return unary(ExprOp::Sigmoid, std::move(e), &sigmoid_value); }
inline Expr tanh(Expr e) { return unary(ExprOp::Tanh, std::move(e), +[](double v) { return std::tanh(v); }); }
inline Expr softplus(Expr e) { return unary(ExprOp::Softplus, std::move(e), &softplus_value); }

}  // namespace ex

inline Expr operator+(const Expr& a, const Expr& b) { return ex::add(a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return ex::sub(a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return ex::mul(a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return ex::divide(a, b); }
inline Expr operator-(const Expr& a) { return ex::neg(a); }

// Vector field: one component expression per state dimension.
using VectorExpression = std::vector<Expr>;

// ---------------------------------------------------------------------------
// Structural equality

inline bool expr_equal(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return true;
    if (a->op != b->op) return false;
    switch (a->op) {
        case ExprOp::Constant: return a->value == b->value;
        case ExprOp::StateVar:
        case ExprOp::InputVar: return a->index == b->index;
        case ExprOp::Pow: return a->exponent == b->exponent && expr_equal(a->a, b->a);
        case ExprOp::Add:
        case ExprOp::Sub:
        case ExprOp::Mul:
        case ExprOp::Div: return expr_equal(a->a, b->a) && expr_equal(a->b, b->b);
        default: return expr_equal(a->a, b->a);
    }
}

// Highest variable indices used; -1 when none.
inline void expr_var_extent(const Expr& e, int& max_state, int& max_input) {
    switch (e->op) {
        case ExprOp::Constant: return;
        case ExprOp::StateVar: max_state = std::max(max_state, e->index); return;
        case ExprOp::InputVar: max_input = std::max(max_input, e->index); return;
        default:
            if (e->a) expr_var_extent(e->a, max_state, max_input);
            if (e->b) expr_var_extent(e->b, max_state, max_input);
    }
}

inline bool expr_uses_inputs(const Expr& e) {
    int s = -1, u = -1;
    expr_var_extent(e, s, u);
    return u >= 0;
}

inline bool expr_is_polynomial(const Expr& e) {
    switch (e->op) {
        case ExprOp::Sin:
        case ExprOp::Cos:
        case ExprOp::Exp:
        case ExprOp::Sigmoid:
        case ExprOp::Tanh:
        case ExprOp::Softplus: return false;
        case ExprOp::Div: return expr_is_polynomial(e->a) && expr_is_polynomial(e->b);
        default:
            if (e->a && !expr_is_polynomial(e->a)) return false;
            if (e->b && !expr_is_polynomial(e->b)) return false;
            return true;
    }
}

// ---------------------------------------------------------------------------
// Parser
//
// Infix grammar: + - * / with standard precedence, ** (tightest, integer
// literal exponent), unary minus, parentheses, sin/cos/exp/sigmoid/tanh/
// softplus, decimal literals.  Variables are x0..x{n_vars-1}, u0..u{n_inputs-1}.

namespace detail {

class ExprParser {
public:
    ExprParser(std::string_view src, int n_vars, int n_inputs)
        : src_(src), n_vars_(n_vars), n_inputs_(n_inputs) {}

    Expr parse() {
        Expr e = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    Expr parse_sum() {
        Expr e = parse_term();
        for (;;) {
            skip_ws();
            if (accept('+')) {
                e = ex::binary(ExprOp::Add, e, parse_term());
            } else if (peek() == '-' && !peek2('*')) {  // "- " binary minus, "-*" impossible
                ++pos_;
                e = ex::binary(ExprOp::Sub, e, parse_term());
            } else {
                return e;
            }
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            skip_ws();
            if (peek() == '*' && !peek2('*')) {
                ++pos_;
                e = ex::binary(ExprOp::Mul, e, parse_factor());
            } else if (accept('/')) {
                e = ex::binary(ExprOp::Div, e, parse_factor());
            } else {
                return e;
            }
        }
    }

    Expr parse_factor() {
        skip_ws();
        if (accept('-')) {
            Expr inner = parse_factor();
            // Fold a literal sign so "-0.5" round-trips as a signed constant.
            if (inner->op == ExprOp::Constant) return ex::constant(-inner->value);
            return ex::neg(inner);
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        skip_ws();
        if (peek() == '*' && peek2('*')) {
            pos_ += 2;
            skip_ws();
            const std::size_t at = pos_;
            if (!std::isdigit(peek()))
                throw ParseError("exponent must be a non-negative integer literal", at);
            double num = lex_number();
            if (num != std::floor(num) || num < 0 || num > 1e9)
                throw ParseError("exponent must be a non-negative integer literal", at);
            return ex::pow_i(base, static_cast<int>(num));
        }
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        const std::size_t at = pos_;
        if (accept('(')) {
            Expr e = parse_sum();
            skip_ws();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(peek()) || peek() == '.') return ex::constant(lex_number());
        if (std::isalpha(peek())) {
            std::string name;
            while (std::isalnum(peek()) || peek() == '_') name.push_back(src_[pos_++]);
            if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u') &&
                std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(c); })) {
                const int idx = std::stoi(name.substr(1));
                const int limit = name[0] == 'x' ? n_vars_ : n_inputs_;
                if (idx >= limit)
                    throw ParseError("variable index out of range: " + name, at);
                return name[0] == 'x' ? ex::state(idx) : ex::input(idx);
            }
            skip_ws();
            if (accept('(')) {
                Expr arg = parse_sum();
                skip_ws();
                if (!accept(')')) throw ParseError("expected ')'", pos_);
                if (name == "sin") return ex::sin(arg);
                if (name == "cos") return ex::cos(arg);
                if (name == "exp") return ex::exp(arg);
                if (name == "sigmoid") return ex::sigmoid(arg);
                if (name == "tanh") return ex::tanh(arg);
                if (name == "softplus") return ex::softplus(arg);
                throw ParseError("unknown function: " + name, at);
            }
            throw ParseError("unknown identifier: " + name, at);
        }
        throw ParseError("expected expression", pos_);
    }

    double lex_number() {
        const std::size_t start = pos_;
        while (std::isdigit(peek())) ++pos_;
        if (peek() == '.') {
            ++pos_;
            while (std::isdigit(peek())) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E') {
            std::size_t mark = pos_;
            ++pos_;
            if (peek() == '+' || peek() == '-') ++pos_;
            if (std::isdigit(peek())) {
                while (std::isdigit(peek())) ++pos_;
            } else {
                pos_ = mark;  // not an exponent suffix
            }
        }
        if (pos_ == start) throw ParseError("expected number", start);
        return std::stod(std::string(src_.substr(start, pos_ - start)));
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    bool peek2(char c) const { return pos_ + 1 < src_.size() && src_[pos_ + 1] == c; }
    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int n_vars_;
    int n_inputs_;
};

}  // namespace detail

inline Expr parse_expr(std::string_view source, int n_vars, int n_inputs = 0) {
    return detail::ExprParser(source, n_vars, n_inputs).parse();
}

// ---------------------------------------------------------------------------
// Infix printing; parse(print_infix(e)) is structurally equal to e.

namespace detail {

inline int precedence(const ExprNode& n) {
    switch (n.op) {
        case ExprOp::Add:
        case ExprOp::Sub: return 1;
        case ExprOp::Mul:
        case ExprOp::Div: return 2;
        case ExprOp::Neg: return 3;
        case ExprOp::Pow: return 4;
        default: return 5;
    }
}

inline void print_rec(const Expr& e, std::string& out) {
    auto child = [&](const Expr& c, int min_prec) {
        if (precedence(*c) < min_prec) {
            out.push_back('(');
            print_rec(c, out);
            out.push_back(')');
        } else {
            print_rec(c, out);
        }
    };
    switch (e->op) {
        case ExprOp::Constant:
            if (e->value < 0 || (e->value == 0 && std::signbit(e->value))) {
                out.push_back('-');
                out += shortest_decimal(-e->value);
            } else {
                out += shortest_decimal(e->value);
            }
            return;
        case ExprOp::StateVar: out += "x" + std::to_string(e->index); return;
        case ExprOp::InputVar: out += "u" + std::to_string(e->index); return;
        case ExprOp::Neg:
            out.push_back('-');
            child(e->a, 4);  // parenthesize anything looser than **
            return;
        case ExprOp::Add:
            child(e->a, 1);
            out += " + ";
            child(e->b, 2);
            return;
        case ExprOp::Sub:
            child(e->a, 1);
            out += " - ";
            child(e->b, 2);
            return;
        case ExprOp::Mul:
            child(e->a, 2);
            out.push_back('*');
            child(e->b, 3);
            return;
        case ExprOp::Div:
            child(e->a, 2);
            out.push_back('/');
            child(e->b, 3);
            return;
        case ExprOp::Pow:
            child(e->a, 5);
            out += "**" + std::to_string(e->exponent);
            return;
        case ExprOp::Sin: out += "sin("; print_rec(e->a, out); out.push_back(')'); return;
        case ExprOp::Cos: out += "cos("; print_rec(e->a, out); out.push_back(')'); return;
        case ExprOp::Exp: out += "exp("; print_rec(e->a, out); out.push_back(')'); return;
        case ExprOp::Sigmoid: out += "sigmoid("; print_rec(e->a, out); out.push_back(')'); return;
        case ExprOp::Tanh: out += "tanh("; print_rec(e->a, out); out.push_back(')'); return;
        case ExprOp::Softplus: out += "softplus("; print_rec(e->a, out); out.push_back(')'); return;
    }
}

}  // namespace detail

inline std::string print_infix(const Expr& e) {
    std::string out;
    detail::print_rec(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Differentiation (exact, recursive, memoized over the shared DAG)

namespace detail {

struct DiffCtx {
    ExprOp var_kind;  // StateVar or InputVar
    int index;
    std::unordered_map<const ExprNode*, Expr> memo;
};

inline Expr diff_rec(const Expr& e, DiffCtx& ctx) {
    if (auto it = ctx.memo.find(e.get()); it != ctx.memo.end()) return it->second;
    Expr d;
    switch (e->op) {
        case ExprOp::Constant: d = ex::constant(0.0); break;
        case ExprOp::StateVar:
        case ExprOp::InputVar:
            d = ex::constant(e->op == ctx.var_kind && e->index == ctx.index ? 1.0 : 0.0);
            break;
        case ExprOp::Neg: d = ex::neg(diff_rec(e->a, ctx)); break;
        case ExprOp::Add: d = ex::add(diff_rec(e->a, ctx), diff_rec(e->b, ctx)); break;
        case ExprOp::Sub: d = ex::sub(diff_rec(e->a, ctx), diff_rec(e->b, ctx)); break;
        case ExprOp::Mul:
            d = ex::add(ex::mul(diff_rec(e->a, ctx), e->b), ex::mul(e->a, diff_rec(e->b, ctx)));
            break;
        case ExprOp::Div:
            d = ex::divide(ex::sub(ex::mul(diff_rec(e->a, ctx), e->b), ex::mul(e->a, diff_rec(e->b, ctx))),
                           ex::pow_i(e->b, 2));
            break;
        case ExprOp::Pow:
            d = ex::mul(ex::mul(ex::constant(e->exponent), ex::pow_i(e->a, e->exponent - 1)),
                        diff_rec(e->a, ctx));
            break;
        case ExprOp::Sin: d = ex::mul(ex::cos(e->a), diff_rec(e->a, ctx)); break;
        case ExprOp::Cos: d = ex::neg(ex::mul(ex::sin(e->a), diff_rec(e->a, ctx))); break;
        case ExprOp::Exp: d = ex::mul(ex::exp(e->a), diff_rec(e->a, ctx)); break;
        case ExprOp::Sigmoid:
            d = ex::mul(ex::mul(ex::sigmoid(e->a), ex::sub(ex::constant(1.0), ex::sigmoid(e->a))),
                        diff_rec(e->a, ctx));
            break;
        case ExprOp::Tanh:
            d = ex::mul(ex::sub(ex::constant(1.0), ex::pow_i(ex::tanh(e->a), 2)), diff_rec(e->a, ctx));
            break;
        case ExprOp::Softplus: d = ex::mul(ex::sigmoid(e->a), diff_rec(e->a, ctx)); break;
    }
    ctx.memo.emplace(e.get(), d);
    return d;
}

}  // namespace detail

inline Expr differentiate(const Expr& e, int state_index) {
    detail::DiffCtx ctx{ExprOp::StateVar, state_index, {}};
    return detail::diff_rec(e, ctx);
}

inline Expr differentiate_input(const Expr& e, int input_index) {
    detail::DiffCtx ctx{ExprOp::InputVar, input_index, {}};
    return detail::diff_rec(e, ctx);
}

// ---------------------------------------------------------------------------
// Substitution (used for closed-loop composition and discrete lie updates)

namespace detail {

inline Expr subst_rec(const Expr& e, std::span<const Expr> states, std::span<const Expr> inputs,
                      std::unordered_map<const ExprNode*, Expr>& memo) {
    if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
    Expr r;
    switch (e->op) {
        case ExprOp::Constant: r = e; break;
        case ExprOp::StateVar:
            r = e->index < static_cast<int>(states.size()) && states[e->index] ? states[e->index] : e;
            break;
        case ExprOp::InputVar:
            if (e->index >= static_cast<int>(inputs.size()) || !inputs[e->index])
                throw ExprError("substitute: no replacement for u" + std::to_string(e->index));
            r = inputs[e->index];
            break;
        case ExprOp::Neg: r = ex::neg(subst_rec(e->a, states, inputs, memo)); break;
        case ExprOp::Add:
            r = ex::add(subst_rec(e->a, states, inputs, memo), subst_rec(e->b, states, inputs, memo));
            break;
        case ExprOp::Sub:
            r = ex::sub(subst_rec(e->a, states, inputs, memo), subst_rec(e->b, states, inputs, memo));
            break;
        case ExprOp::Mul:
            r = ex::mul(subst_rec(e->a, states, inputs, memo), subst_rec(e->b, states, inputs, memo));
            break;
        case ExprOp::Div:
            r = ex::divide(subst_rec(e->a, states, inputs, memo), subst_rec(e->b, states, inputs, memo));
            break;
        case ExprOp::Pow: r = ex::pow_i(subst_rec(e->a, states, inputs, memo), e->exponent); break;
        case ExprOp::Sin: r = ex::sin(subst_rec(e->a, states, inputs, memo)); break;
        case ExprOp::Cos: r = ex::cos(subst_rec(e->a, states, inputs, memo)); break;
        case ExprOp::Exp: r = ex::exp(subst_rec(e->a, states, inputs, memo)); break;
        case ExprOp::Sigmoid: r = ex::sigmoid(subst_rec(e->a, states, inputs, memo)); break;
        case ExprOp::Tanh: r = ex::tanh(subst_rec(e->a, states, inputs, memo)); break;
        case ExprOp::Softplus: r = ex::softplus(subst_rec(e->a, states, inputs, memo)); break;
    }
    memo.emplace(e.get(), r);
    return r;
}

}  // namespace detail

// Replace input variables (and optionally state variables) by expressions.
// An empty entry in `states` leaves that state variable untouched.
inline Expr substitute(const Expr& e, std::span<const Expr> states, std::span<const Expr> inputs) {
    std::unordered_map<const ExprNode*, Expr> memo;
    return detail::subst_rec(e, states, inputs, memo);
}

// ---------------------------------------------------------------------------
// Compiled evaluation tape.  Shared subtrees evaluate once; the instruction
// order (and hence the floating-point operation order) is fixed per
// expression, so results are reproducible.

class ExprTape {
public:
    static ExprTape compile(const Expr& e) {
        ExprTape t;
        std::unordered_map<const ExprNode*, int> memo;
        t.result_ = t.emit(e, memo);
        return t;
    }

    std::size_t size() const { return code_.size(); }

    // Evaluates one sample; asks for a scratch buffer so batch loops do not
    // allocate.  Division by an exact zero raises EvalError.
    double eval(std::span<const double> state, std::span<const double> input,
                std::vector<double>& scratch, std::size_t sample_index = 0) const {
        scratch.resize(code_.size());
        for (std::size_t i = 0; i < code_.size(); ++i) {
            const Ins& ins = code_[i];
            double v = 0.0;
            switch (ins.op) {
                case ExprOp::Constant: v = ins.value; break;
                case ExprOp::StateVar: v = state[ins.index]; break;
                case ExprOp::InputVar:
                    if (ins.index >= static_cast<int>(input.size()))
                        throw EvalError("input variable u" + std::to_string(ins.index) +
                                            " evaluated without input data",
                                        sample_index);
                    v = input[ins.index];
                    break;
                case ExprOp::Neg: v = -scratch[ins.a]; break;
                case ExprOp::Add: v = scratch[ins.a] + scratch[ins.b]; break;
                case ExprOp::Sub: v = scratch[ins.a] - scratch[ins.b]; break;
                case ExprOp::Mul: v = scratch[ins.a] * scratch[ins.b]; break;
                case ExprOp::Div:
                    if (scratch[ins.b] == 0.0) throw EvalError("division by zero", sample_index);
                    v = scratch[ins.a] / scratch[ins.b];
                    break;
                case ExprOp::Pow: {
                    v = scratch[ins.a];
                    for (int k = 1; k < ins.index; ++k) v *= scratch[ins.a];
                    break;
                }
                case ExprOp::Sin: v = std::sin(scratch[ins.a]); break;
                case ExprOp::Cos: v = std::cos(scratch[ins.a]); break;
                case ExprOp::Exp: v = std::exp(scratch[ins.a]); break;
                case ExprOp::Sigmoid: v = ex::sigmoid_value(scratch[ins.a]); break;
                case ExprOp::Tanh: v = std::tanh(scratch[ins.a]); break;
                case ExprOp::Softplus: v = ex::softplus_value(scratch[ins.a]); break;
            }
            scratch[i] = v;
        }
        return scratch[result_];
    }

private:
    struct Ins {
        ExprOp op;
        int a = -1, b = -1;
        double value = 0.0;
        int index = 0;  // variable index, or Pow exponent
    };

    int emit(const Expr& e, std::unordered_map<const ExprNode*, int>& memo) {
        if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
        Ins ins;
        ins.op = e->op;
        switch (e->op) {
            case ExprOp::Constant: ins.value = e->value; break;
            case ExprOp::StateVar:
            case ExprOp::InputVar: ins.index = e->index; break;
            case ExprOp::Pow:
                ins.a = emit(e->a, memo);
                ins.index = e->exponent;
                break;
            default:
                ins.a = emit(e->a, memo);
                if (e->b) ins.b = emit(e->b, memo);
        }
        code_.push_back(ins);
        const int slot = static_cast<int>(code_.size()) - 1;
        memo.emplace(e.get(), slot);
        return slot;
    }

    std::vector<Ins> code_;
    int result_ = 0;
};

// Elementwise evaluation over a batch of state rows (and optional input rows).
inline std::vector<double> eval_batch(const Expr& e, std::span<const double> states, int n_vars,
                                      std::span<const double> inputs = {}, int n_inputs = 0) {
    const std::size_t count = n_vars > 0 ? states.size() / n_vars : 0;
    ExprTape tape = ExprTape::compile(e);
    std::vector<double> out(count);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < count; ++i) {
        std::span<const double> row(states.data() + i * n_vars, n_vars);
        std::span<const double> urow =
            n_inputs > 0 ? std::span<const double>(inputs.data() + i * n_inputs, n_inputs)
                         : std::span<const double>{};
        out[i] = tape.eval(row, urow, scratch, i);
    }
    return out;
}

inline double eval_point(const Expr& e, std::span<const double> state, std::span<const double> input = {}) {
    ExprTape tape = ExprTape::compile(e);
    std::vector<double> scratch;
    return tape.eval(state, input, scratch, 0);
}

}  // namespace fossil
