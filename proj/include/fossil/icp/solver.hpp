// Branch-and-prune delta-decision procedure for quantifier-free nonlinear
// real arithmetic over bounded boxes, with sin/cos/exp/log/tanh support.
//
// The procedure is an interval constraint propagation (HC4) loop around a
// DFS box split:
//   * UNSAT answers are sound: a box is discarded only when outward-rounded
//     interval evaluation proves a constraint infeasible over it.
//   * SAT answers carry a concrete witness that satisfies every constraint
//     under IEEE double evaluation (the same semantics the numeric training
//     pipeline uses); underflow can make such a witness differ from exact
//     real arithmetic on degenerate constraint boundaries.
//   * When a box shrinks below the precision delta without either outcome,
//     the instance is delta-sat and the box midpoint is reported (the same
//     weakened semantics dReal gives, and the same caveat: the witness may
//     be spurious and must be revalidated downstream).
//
// Input is an SMT-LIB 2 script: set-logic/set-option/set-info, declare-const
// or nullary declare-fun over Real, assert (and/or/not over <,<=,>,>=,=,
// distinct atoms with let bindings), check-sat, get-model.

#pragma once

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fossil/icp/interval.hpp"

namespace fossil::icp {

struct IcpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Term store: hash-consed DAG in topological (creation) order.

enum class TermOp : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Neg, Exp, Log, Sin, Cos, Tanh };

struct Term {
    TermOp op;
    int a = -1, b = -1;
    double value = 0.0;  // Const
    int var = -1;        // Var
};

class TermStore {
public:
    int constant(double v) { return intern({TermOp::Const, -1, -1, v, -1}); }
    int variable(int index) { return intern({TermOp::Var, -1, -1, 0.0, index}); }
    int unary(TermOp op, int a) { return intern({op, a, -1, 0.0, -1}); }
    int binary(TermOp op, int a, int b) { return intern({op, a, b, 0.0, -1}); }

    const std::vector<Term>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

private:
    int intern(Term t) {
        std::uint64_t key = static_cast<std::uint64_t>(t.op);
        auto mix = [&](std::uint64_t v) {
            key ^= v + 0x9e3779b97f4a7c15ull + (key << 6) + (key >> 2);
        };
        mix(static_cast<std::uint64_t>(t.a) + 1);
        mix(static_cast<std::uint64_t>(t.b) + 1);
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(t.value));
        std::memcpy(&bits, &t.value, sizeof(bits));
        mix(bits);
        mix(static_cast<std::uint64_t>(t.var) + 1);
        auto range = dedup_.equal_range(key);
        for (auto it = range.first; it != range.second; ++it) {
            const Term& o = nodes_[it->second];
            if (o.op == t.op && o.a == t.a && o.b == t.b && o.var == t.var &&
                std::memcmp(&o.value, &t.value, sizeof(double)) == 0)
                return it->second;
        }
        nodes_.push_back(t);
        const int id = static_cast<int>(nodes_.size()) - 1;
        dedup_.emplace(key, id);
        return id;
    }

    std::vector<Term> nodes_;
    std::unordered_multimap<std::uint64_t, int> dedup_;
};

// ---------------------------------------------------------------------------
// Formulas

enum class AtomRel : std::uint8_t { Le, Lt, Ge, Gt, Eq, Ne };

struct IcpFormula {
    enum class Kind { Atom, And, Or } kind = Kind::And;
    int term = -1;  // Atom: term REL 0
    AtomRel rel = AtomRel::Le;
    std::vector<IcpFormula> children;

    static IcpFormula atom(int term, AtomRel rel) {
        IcpFormula f;
        f.kind = Kind::Atom;
        f.term = term;
        f.rel = rel;
        return f;
    }
};

inline AtomRel negate_rel(AtomRel r) {
    switch (r) {
        case AtomRel::Le: return AtomRel::Gt;
        case AtomRel::Lt: return AtomRel::Ge;
        case AtomRel::Ge: return AtomRel::Lt;
        case AtomRel::Gt: return AtomRel::Le;
        case AtomRel::Eq: return AtomRel::Ne;
        case AtomRel::Ne: return AtomRel::Eq;
    }
    return AtomRel::Le;
}

inline IcpFormula negate(const IcpFormula& f) {
    if (f.kind == IcpFormula::Kind::Atom) return IcpFormula::atom(f.term, negate_rel(f.rel));
    IcpFormula out;
    out.kind = f.kind == IcpFormula::Kind::And ? IcpFormula::Kind::Or : IcpFormula::Kind::And;
    for (const auto& c : f.children) out.children.push_back(negate(c));
    return out;
}

// ---------------------------------------------------------------------------
// Script parsing

namespace detail {

struct Sexp {
    std::string atom;
    std::vector<Sexp> kids;
    bool leaf = true;
};

class SexpReader {
public:
    explicit SexpReader(std::string_view text) : text_(text) {}

    std::vector<Sexp> read_all() {
        std::vector<Sexp> out;
        skip();
        while (pos_ < text_.size()) {
            out.push_back(read());
            skip();
        }
        return out;
    }

private:
    Sexp read() {
        skip();
        if (pos_ >= text_.size()) throw IcpError("unexpected end of script");
        if (text_[pos_] == '(') {
            ++pos_;
            Sexp s;
            s.leaf = false;
            skip();
            while (pos_ < text_.size() && text_[pos_] != ')') {
                s.kids.push_back(read());
                skip();
            }
            if (pos_ >= text_.size()) throw IcpError("missing ')'");
            ++pos_;
            return s;
        }
        Sexp s;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
               text_[pos_] != '(' && text_[pos_] != ')')
            ++pos_;
        s.atom = std::string(text_.substr(start, pos_ - start));
        return s;
    }

    void skip() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ < text_.size() && text_[pos_] == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                continue;
            }
            return;
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

struct Problem {
    TermStore terms;
    std::vector<std::string> var_names;
    std::vector<IcpFormula> asserts;
    double precision = 1e-4;  // overridable via (set-option :precision d)
    bool check_sat_requested = false;
};

class ScriptParser {
public:
    Problem parse(std::string_view text) {
        Problem p;
        auto forms = detail::SexpReader(text).read_all();
        for (const auto& form : forms) {
            if (form.leaf || form.kids.empty()) throw IcpError("malformed command");
            const std::string& head = form.kids[0].atom;
            if (head == "set-logic" || head == "set-info" || head == "exit" || head == "get-model") {
                continue;
            } else if (head == "set-option") {
                if (form.kids.size() == 3 && form.kids[1].atom == ":precision")
                    p.precision = std::stod(form.kids[2].atom);
                continue;
            } else if (head == "declare-const" || head == "declare-fun") {
                const std::string& name = form.kids[1].atom;
                if (vars_.count(name)) throw IcpError("redeclared variable: " + name);
                const int idx = static_cast<int>(p.var_names.size());
                vars_[name] = p.terms.variable(idx);
                p.var_names.push_back(name);
            } else if (head == "assert") {
                if (form.kids.size() != 2) throw IcpError("assert takes one formula");
                Env env;
                p.asserts.push_back(formula(form.kids[1], p.terms, env, false));
            } else if (head == "check-sat") {
                p.check_sat_requested = true;
            } else {
                throw IcpError("unsupported command: " + head);
            }
        }
        return p;
    }

private:
    struct Env {
        std::map<std::string, int> terms;  // let bindings
    };

    static bool numeric(const std::string& s) {
        if (s.empty()) return false;
        const char c = s[0];
        return std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+' || c == '.') && s.size() > 1 &&
                std::isdigit(static_cast<unsigned char>(s[1])));
    }

    int term(const detail::Sexp& s, TermStore& store, Env& env) {
        if (s.leaf) {
            if (auto it = env.terms.find(s.atom); it != env.terms.end()) return it->second;
            if (auto it = vars_.find(s.atom); it != vars_.end()) return it->second;
            if (numeric(s.atom)) return store.constant(std::stod(s.atom));
            throw IcpError("unknown symbol: " + s.atom);
        }
        if (s.kids.empty()) throw IcpError("empty term");
        const std::string& head = s.kids[0].atom;
        auto arg = [&](std::size_t i) { return term(s.kids[i], store, env); };
        if (head == "+") {
            int acc = arg(1);
            for (std::size_t i = 2; i < s.kids.size(); ++i) acc = store.binary(TermOp::Add, acc, arg(i));
            return acc;
        }
        if (head == "-") {
            if (s.kids.size() == 2) return store.unary(TermOp::Neg, arg(1));
            int acc = arg(1);
            for (std::size_t i = 2; i < s.kids.size(); ++i) acc = store.binary(TermOp::Sub, acc, arg(i));
            return acc;
        }
        if (head == "*") {
            // Balanced folding: (* x x x x) becomes sqr(sqr(x)) via the
            // hash-consed store, so even powers keep their sign information
            // in interval evaluation.
            std::vector<int> factors;
            for (std::size_t i = 1; i < s.kids.size(); ++i) factors.push_back(arg(i));
            while (factors.size() > 1) {
                std::vector<int> next;
                for (std::size_t i = 0; i + 1 < factors.size(); i += 2)
                    next.push_back(store.binary(TermOp::Mul, factors[i], factors[i + 1]));
                if (factors.size() % 2 == 1) next.push_back(factors.back());
                factors = std::move(next);
            }
            return factors[0];
        }
        if (head == "/") {
            int acc = arg(1);
            for (std::size_t i = 2; i < s.kids.size(); ++i) acc = store.binary(TermOp::Div, acc, arg(i));
            return acc;
        }
        if (head == "^") {
            if (s.kids.size() != 3) throw IcpError("^ takes two arguments");
            const double e = std::stod(s.kids[2].atom);
            if (e != std::floor(e) || e < 0) throw IcpError("^ exponent must be a non-negative integer");
            const int base = arg(1);
            if (e == 0) return store.constant(1.0);
            int acc = base;
            for (int k = 1; k < static_cast<int>(e); ++k) acc = store.binary(TermOp::Mul, acc, base);
            return acc;
        }
        if (head == "exp") return store.unary(TermOp::Exp, arg(1));
        if (head == "log" || head == "ln") return store.unary(TermOp::Log, arg(1));
        if (head == "sin") return store.unary(TermOp::Sin, arg(1));
        if (head == "cos") return store.unary(TermOp::Cos, arg(1));
        if (head == "tanh") return store.unary(TermOp::Tanh, arg(1));
        if (head == "let") return let_body<int>(s, store, env, [&](const detail::Sexp& body, Env& e) {
            return term(body, store, e);
        });
        throw IcpError("unsupported term operator: " + head);
    }

    template <class R, class Fn>
    R let_body(const detail::Sexp& s, TermStore& store, Env& env, Fn body_fn) {
        if (s.kids.size() != 3) throw IcpError("let takes bindings and a body");
        Env scoped = env;
        for (const auto& binding : s.kids[1].kids) {
            if (binding.leaf || binding.kids.size() != 2) throw IcpError("malformed let binding");
            scoped.terms[binding.kids[0].atom] = term(binding.kids[1], store, scoped);
        }
        return body_fn(s.kids[2], scoped);
    }

    IcpFormula formula(const detail::Sexp& s, TermStore& store, Env& env, bool negated) {
        if (s.leaf) {
            if (s.atom == "true" || s.atom == "false") {
                // Encode as 0 <= 0 or its negation.
                const int zero = store.constant(0.0);
                const bool truth = (s.atom == "true") != negated;
                return IcpFormula::atom(zero, truth ? AtomRel::Le : AtomRel::Gt);
            }
            throw IcpError("expected formula, got symbol: " + s.atom);
        }
        const std::string& head = s.kids[0].atom;
        if (head == "and" || head == "or") {
            IcpFormula f;
            const bool is_and = (head == "and") != negated;
            f.kind = is_and ? IcpFormula::Kind::And : IcpFormula::Kind::Or;
            for (std::size_t i = 1; i < s.kids.size(); ++i)
                f.children.push_back(formula(s.kids[i], store, env, negated));
            return f;
        }
        if (head == "not") {
            if (s.kids.size() != 2) throw IcpError("not takes one argument");
            return formula(s.kids[1], store, env, !negated);
        }
        if (head == "let")
            return let_body<IcpFormula>(s, store, env, [&](const detail::Sexp& body, Env& e) {
                return formula(body, store, e, negated);
            });
        static const std::map<std::string, AtomRel> rels = {
            {"<=", AtomRel::Le}, {"<", AtomRel::Lt},      {">=", AtomRel::Ge},
            {">", AtomRel::Gt},  {"=", AtomRel::Eq},      {"distinct", AtomRel::Ne},
        };
        auto it = rels.find(head);
        if (it == rels.end()) throw IcpError("unsupported predicate: " + head);
        if (s.kids.size() != 3) throw IcpError("relations take two arguments");
        const int lhs = term(s.kids[1], store, env);
        const int rhs = term(s.kids[2], store, env);
        const Term& rterm = store.nodes()[rhs];
        const int diff = (rterm.op == TermOp::Const && rterm.value == 0.0)
                             ? lhs
                             : store.binary(TermOp::Sub, lhs, rhs);
        return IcpFormula::atom(diff, negated ? negate_rel(it->second) : it->second);
    }

    std::map<std::string, int> vars_;
};

// ---------------------------------------------------------------------------
// Solver

struct IcpResult {
    enum class Kind { Sat, DeltaSat, Unsat, Unknown } kind = Kind::Unknown;
    std::vector<double> model;  // per variable, for Sat / DeltaSat
    double delta = 0.0;
    std::string reason;  // for Unknown
    std::uint64_t boxes_processed = 0;
};

struct SolverOptions {
    double precision = 1e-4;
    std::uint64_t max_boxes = 2000000;
    double timeout_s = 0.0;  // 0 = none
    int contract_rounds = 3;
};

class IcpSolver {
public:
    IcpSolver(const Problem& problem, SolverOptions options)
        : problem_(problem), opts_(options) {
        if (problem.asserts.empty()) throw IcpError("no assertions");
        goal_.kind = IcpFormula::Kind::And;
        goal_.children = problem.asserts;
        fwd_.resize(problem.terms.size());
        back_.resize(problem.terms.size());
        point_vals_.resize(problem.terms.size());
    }

    IcpResult solve() {
        const int n = static_cast<int>(problem_.var_names.size());
        if (n == 0) return {IcpResult::Kind::Unknown, {}, 0.0, "no variables declared", 0};
        start_ = std::chrono::steady_clock::now();

        std::vector<Interval> root(n, Interval{-1e15, 1e15});
        // Initial propagation establishes the search box; variables the
        // constraints fail to bound are handled by splitting (and ultimately
        // the box budget).
        for (int round = 0; round < 12; ++round)
            if (!contract(goal_, root)) return finish_unsat();

        std::vector<std::vector<Interval>> stack{root};
        while (!stack.empty()) {
            if (++boxes_ > opts_.max_boxes)
                return {IcpResult::Kind::Unknown, {}, 0.0, "box budget exhausted", boxes_};
            if (opts_.timeout_s > 0 && (boxes_ & 1023) == 0) {
                const double elapsed =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
                if (elapsed > opts_.timeout_s)
                    return {IcpResult::Kind::Unknown, {}, 0.0, "timeout", boxes_};
            }
            std::vector<Interval> box = std::move(stack.back());
            stack.pop_back();
            bool alive = true;
            for (int round = 0; round < opts_.contract_rounds && alive; ++round)
                alive = contract(goal_, box);
            if (!alive) continue;

            if (try_exact_witness(box)) {
                IcpResult r;
                r.kind = IcpResult::Kind::Sat;
                r.model = witness_;
                r.boxes_processed = boxes_;
                return r;
            }

            int widest = 0;
            double width = 0.0;
            for (int i = 0; i < n; ++i)
                if (box[i].width() > width) width = box[i].width(), widest = i;
            if (width <= opts_.precision) {
                IcpResult r;
                r.kind = IcpResult::Kind::DeltaSat;
                r.delta = opts_.precision;
                r.model.resize(n);
                for (int i = 0; i < n; ++i) r.model[i] = box[i].mid();
                r.boxes_processed = boxes_;
                return r;
            }
            const double mid = box[widest].mid();
            if (!(mid > box[widest].lo && mid < box[widest].hi)) {
                IcpResult r;  // cannot split further; numerically a point
                r.kind = IcpResult::Kind::DeltaSat;
                r.delta = opts_.precision;
                r.model.resize(n);
                for (int i = 0; i < n; ++i) r.model[i] = box[i].mid();
                r.boxes_processed = boxes_;
                return r;
            }
            std::vector<Interval> left = box, right = std::move(box);
            left[widest].hi = mid;
            right[widest].lo = mid;
            // Left half on top: explore small magnitudes first, which finds
            // near-origin witnesses before wandering toward huge bounds.
            stack.push_back(std::move(right));
            stack.push_back(std::move(left));
        }
        return finish_unsat();
    }

private:
    IcpResult finish_unsat() const {
        IcpResult r;
        r.kind = IcpResult::Kind::Unsat;
        r.boxes_processed = boxes_;
        return r;
    }

    // ------------------------------------------------------------------
    // Interval propagation

    void forward(const std::vector<Interval>& box) {
        const auto& nodes = problem_.terms.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Term& t = nodes[i];
            switch (t.op) {
                case TermOp::Const: fwd_[i] = Interval::point(t.value); break;
                case TermOp::Var: fwd_[i] = box[t.var]; break;
                case TermOp::Add: fwd_[i] = iadd(fwd_[t.a], fwd_[t.b]); break;
                case TermOp::Sub: fwd_[i] = isub(fwd_[t.a], fwd_[t.b]); break;
                case TermOp::Mul:
                    fwd_[i] = t.a == t.b ? isqr(fwd_[t.a]) : imul(fwd_[t.a], fwd_[t.b]);
                    break;
                case TermOp::Div: fwd_[i] = idiv(fwd_[t.a], fwd_[t.b]); break;
                case TermOp::Neg: fwd_[i] = ineg(fwd_[t.a]); break;
                case TermOp::Exp: fwd_[i] = iexp(fwd_[t.a]); break;
                case TermOp::Log: fwd_[i] = ilog(fwd_[t.a]); break;
                case TermOp::Sin: fwd_[i] = isin(fwd_[t.a]); break;
                case TermOp::Cos: fwd_[i] = icos(fwd_[t.a]); break;
                case TermOp::Tanh: fwd_[i] = itanh(fwd_[t.a]); break;
            }
        }
    }

    static Interval rel_projection(AtomRel rel, double precision) {
        switch (rel) {
            case AtomRel::Le:
            case AtomRel::Lt: return {-kInf, 0.0};
            case AtomRel::Ge:
            case AtomRel::Gt: return {0.0, kInf};
            case AtomRel::Eq: return {0.0, 0.0};
            // t != 0 only excludes a single point; no interval contraction.
            case AtomRel::Ne: return Interval::whole();
        }
        (void)precision;
        return Interval::whole();
    }

    // HC4-revise of one atom; returns false when the box is proven empty.
    bool revise(const IcpFormula& atom, std::vector<Interval>& box) {
        forward(box);
        const int root = atom.term;
        if (fwd_[root].is_empty()) return false;
        // Refutation test first (also catches Ne).
        const Interval r = fwd_[root];
        switch (atom.rel) {
            case AtomRel::Le:
                if (r.lo > 0.0) return false;
                break;
            case AtomRel::Lt:
                if (r.lo >= 0.0) return false;
                break;
            case AtomRel::Ge:
                if (r.hi < 0.0) return false;
                break;
            case AtomRel::Gt:
                if (r.hi <= 0.0) return false;
                break;
            case AtomRel::Eq:
                if (!r.contains_zero()) return false;
                break;
            case AtomRel::Ne:
                if (r.lo == 0.0 && r.hi == 0.0) return false;
                break;
        }
        const Interval target = fwd_[root].intersect(rel_projection(atom.rel, opts_.precision));
        if (target.is_empty()) return false;

        const auto& nodes = problem_.terms.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) back_[i] = fwd_[i];
        back_[root] = target;
        for (std::size_t idx = nodes.size(); idx-- > 0;) {
            const Term& t = nodes[idx];
            const Interval& out = back_[idx];
            if (out.is_empty()) return false;
            switch (t.op) {
                case TermOp::Const:
                    if (!out.contains(t.value)) return false;
                    break;
                case TermOp::Var: box[t.var] = box[t.var].intersect(out);
                    if (box[t.var].is_empty()) return false;
                    break;
                case TermOp::Add:
                    back_[t.a] = back_[t.a].intersect(isub(out, fwd_[t.b]));
                    back_[t.b] = back_[t.b].intersect(isub(out, fwd_[t.a]));
                    break;
                case TermOp::Sub:
                    back_[t.a] = back_[t.a].intersect(iadd(out, fwd_[t.b]));
                    back_[t.b] = back_[t.b].intersect(isub(fwd_[t.a], out));
                    break;
                case TermOp::Mul:
                    if (t.a == t.b) {
                        back_[t.a] = back_[t.a].intersect(isqr_inverse(out));
                    } else {
                        back_[t.a] = back_[t.a].intersect(iext_div(out, fwd_[t.b]));
                        back_[t.b] = back_[t.b].intersect(iext_div(out, fwd_[t.a]));
                    }
                    break;
                case TermOp::Div:
                    back_[t.a] = back_[t.a].intersect(imul(out, fwd_[t.b]));
                    back_[t.b] = back_[t.b].intersect(iext_div(fwd_[t.a], out));
                    break;
                case TermOp::Neg: back_[t.a] = back_[t.a].intersect(ineg(out)); break;
                case TermOp::Exp: back_[t.a] = back_[t.a].intersect(iexp_inverse(out)); break;
                case TermOp::Log: back_[t.a] = back_[t.a].intersect(ilog_inverse(out)); break;
                case TermOp::Sin: back_[t.a] = isin_inverse(back_[t.a], out); break;
                case TermOp::Cos: back_[t.a] = icos_inverse(back_[t.a], out); break;
                case TermOp::Tanh: back_[t.a] = back_[t.a].intersect(itanh_inverse(out)); break;
            }
        }
        return true;
    }

    // Contract the box through the formula; false when proven infeasible.
    bool contract(const IcpFormula& f, std::vector<Interval>& box) {
        switch (f.kind) {
            case IcpFormula::Kind::Atom: return revise(f, box);
            case IcpFormula::Kind::And:
                for (const auto& c : f.children)
                    if (!contract(c, box)) return false;
                return true;
            case IcpFormula::Kind::Or: {
                std::vector<Interval> hull;
                bool any = false;
                for (const auto& c : f.children) {
                    std::vector<Interval> branch = box;
                    if (!contract(c, branch)) continue;
                    if (!any) {
                        hull = std::move(branch);
                        any = true;
                    } else {
                        for (std::size_t i = 0; i < hull.size(); ++i) hull[i] = hull[i].hull(branch[i]);
                    }
                }
                if (!any) return false;
                box = std::move(hull);
                return true;
            }
        }
        return true;
    }

    // ------------------------------------------------------------------
    // Exact witness search

    double eval_term_at(const std::vector<double>& point, int root) {
        const auto& nodes = problem_.terms.nodes();
        for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i) {
            const Term& t = nodes[i];
            double v = 0.0;
            switch (t.op) {
                case TermOp::Const: v = t.value; break;
                case TermOp::Var: v = point[t.var]; break;
                case TermOp::Add: v = point_vals_[t.a] + point_vals_[t.b]; break;
                case TermOp::Sub: v = point_vals_[t.a] - point_vals_[t.b]; break;
                case TermOp::Mul: v = point_vals_[t.a] * point_vals_[t.b]; break;
                case TermOp::Div: v = point_vals_[t.a] / point_vals_[t.b]; break;
                case TermOp::Neg: v = -point_vals_[t.a]; break;
                case TermOp::Exp: v = std::exp(point_vals_[t.a]); break;
                case TermOp::Log: v = std::log(point_vals_[t.a]); break;
                case TermOp::Sin: v = std::sin(point_vals_[t.a]); break;
                case TermOp::Cos: v = std::cos(point_vals_[t.a]); break;
                case TermOp::Tanh: v = std::tanh(point_vals_[t.a]); break;
            }
            point_vals_[i] = v;
        }
        return point_vals_[root];
    }

    bool holds_at(const IcpFormula& f, const std::vector<double>& point) {
        switch (f.kind) {
            case IcpFormula::Kind::Atom: {
                const double v = eval_term_at(point, f.term);
                if (std::isnan(v)) return false;
                switch (f.rel) {
                    case AtomRel::Le: return v <= 0.0;
                    case AtomRel::Lt: return v < 0.0;
                    case AtomRel::Ge: return v >= 0.0;
                    case AtomRel::Gt: return v > 0.0;
                    case AtomRel::Eq: return v == 0.0;
                    case AtomRel::Ne: return v != 0.0;
                }
                return false;
            }
            case IcpFormula::Kind::And:
                for (const auto& c : f.children)
                    if (!holds_at(c, point)) return false;
                return true;
            case IcpFormula::Kind::Or:
                for (const auto& c : f.children)
                    if (holds_at(c, point)) return true;
                return false;
        }
        return false;
    }

    bool try_exact_witness(const std::vector<Interval>& box) {
        const int n = static_cast<int>(box.size());
        std::vector<double> mid(n);
        for (int i = 0; i < n; ++i) mid[i] = box[i].mid();
        auto attempt = [&](const std::vector<double>& p) {
            if (holds_at(goal_, p)) {
                witness_ = p;
                return true;
            }
            return false;
        };
        if (attempt(mid)) return true;
        // Degenerate-equality helpers: conditions like x^4 <= 0 hold only on
        // slices; snapping a coordinate to zero or to a face finds them.
        std::vector<double> probe = mid;
        for (int i = 0; i < n; ++i) {
            if (box[i].contains(0.0) && mid[i] != 0.0) {
                probe[i] = 0.0;
                if (attempt(probe)) return true;
                probe[i] = mid[i];
            }
            probe[i] = box[i].lo;
            if (attempt(probe)) return true;
            probe[i] = box[i].hi;
            if (attempt(probe)) return true;
            probe[i] = mid[i];
        }
        std::vector<double> corner(n);
        for (int i = 0; i < n; ++i) corner[i] = box[i].lo;
        if (attempt(corner)) return true;
        for (int i = 0; i < n; ++i) corner[i] = box[i].hi;
        return attempt(corner);
    }

    const Problem& problem_;
    SolverOptions opts_;
    IcpFormula goal_;
    std::vector<Interval> fwd_, back_;
    std::vector<double> point_vals_;
    std::vector<double> witness_;
    std::uint64_t boxes_ = 0;
    std::chrono::steady_clock::time_point start_;
};

inline IcpResult solve_script(std::string_view script, SolverOptions opts = {}) {
    ScriptParser parser;
    Problem p = parser.parse(script);
    if (opts.precision <= 0) opts.precision = p.precision;
    IcpSolver solver(p, opts);
    return solver.solve();
}

}  // namespace fossil::icp
