// Geometric set vocabulary.  Every domain provides a symbolic membership
// predicate (for the verifier), a numerically identical contains() check, and
// a seeded uniform sampler (for training data).

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fossil/decimal.hpp"
#include "fossil/formula.hpp"
#include "fossil/rng.hpp"

namespace fossil {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DomainKind { Sphere, Rectangle, Torus, Ellipsoid, Difference };

class Domain;
using DomainPtr = std::shared_ptr<const Domain>;

class Domain {
public:
    DomainKind kind = DomainKind::Sphere;
    bool closed = true;  // Sphere/Rectangle only; others are closed
    std::vector<double> center;
    double radius = 0.0;
    double outer_radius = 0.0;
    double inner_radius = 0.0;
    std::vector<double> lower, upper;
    std::vector<double> semi_axes;
    DomainPtr outer, inner;  // Difference

    static Domain sphere(std::vector<double> c, double r, bool closed = true) {
        if (r <= 0) throw DomainError("Sphere: radius must be positive");
        Domain d;
        d.kind = DomainKind::Sphere;
        d.center = std::move(c);
        d.radius = r;
        d.closed = closed;
        return d;
    }

    static Domain rectangle(std::vector<double> lo, std::vector<double> hi, bool closed = true) {
        if (lo.size() != hi.size()) throw DomainError("Rectangle: bound dimensions differ");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw DomainError("Rectangle: lower bound must be below upper bound");
        Domain d;
        d.kind = DomainKind::Rectangle;
        d.lower = std::move(lo);
        d.upper = std::move(hi);
        d.closed = closed;
        return d;
    }

    static Domain torus(std::vector<double> c, double r_outer, double r_inner) {
        if (!(0 < r_inner && r_inner < r_outer))
            throw DomainError("Torus: requires 0 < inner radius < outer radius");
        Domain d;
        d.kind = DomainKind::Torus;
        d.center = std::move(c);
        d.outer_radius = r_outer;
        d.inner_radius = r_inner;
        return d;
    }

    static Domain ellipsoid(std::vector<double> c, std::vector<double> axes) {
        if (c.size() != axes.size()) throw DomainError("Ellipsoid: dimension mismatch");
        for (double a : axes)
            if (a <= 0) throw DomainError("Ellipsoid: semi-axes must be positive");
        Domain d;
        d.kind = DomainKind::Ellipsoid;
        d.center = std::move(c);
        d.semi_axes = std::move(axes);
        return d;
    }

    static Domain difference(Domain outer_set, Domain inner_set) {
        if (outer_set.dim() != inner_set.dim()) throw DomainError("Difference: dimension mismatch");
        Domain d;
        d.kind = DomainKind::Difference;
        d.outer = std::make_shared<Domain>(std::move(outer_set));
        d.inner = std::make_shared<Domain>(std::move(inner_set));
        return d;
    }

    int dim() const {
        switch (kind) {
            case DomainKind::Sphere:
            case DomainKind::Torus:
            case DomainKind::Ellipsoid: return static_cast<int>(center.size());
            case DomainKind::Rectangle: return static_cast<int>(lower.size());
            case DomainKind::Difference: return outer->dim();
        }
        return 0;
    }

    // ------------------------------------------------------------------
    // Membership

    Formula membership() const {
        switch (kind) {
            case DomainKind::Sphere:
                return fm::atom(radius_sq_expr(center), closed ? Rel::Le : Rel::Lt,
                                ex::constant(radius * radius));
            case DomainKind::Rectangle: {
                std::vector<Formula> axes;
                for (std::size_t i = 0; i < lower.size(); ++i) {
                    axes.push_back(fm::atom(ex::state(static_cast<int>(i)), closed ? Rel::Ge : Rel::Gt,
                                            ex::constant(lower[i])));
                    axes.push_back(fm::atom(ex::state(static_cast<int>(i)), closed ? Rel::Le : Rel::Lt,
                                            ex::constant(upper[i])));
                }
                return fm::conj(std::move(axes));
            }
            case DomainKind::Torus: {
                Expr sq = radius_sq_expr(center);
                return fm::conj({fm::atom(sq, Rel::Ge, ex::constant(inner_radius * inner_radius)),
                                 fm::atom(sq, Rel::Le, ex::constant(outer_radius * outer_radius))});
            }
            case DomainKind::Ellipsoid: {
                Expr sum;
                for (std::size_t i = 0; i < center.size(); ++i) {
                    Expr t = ex::divide(ex::sub(ex::state(static_cast<int>(i)), ex::constant(center[i])),
                                        ex::constant(semi_axes[i]));
                    Expr sq = ex::pow_i(t, 2);
                    sum = sum ? ex::add(sum, sq) : sq;
                }
                return fm::atom(sum, Rel::Le, ex::constant(1.0));
            }
            case DomainKind::Difference:
                return fm::conj({outer->membership(), fm::negate(inner->membership())});
        }
        throw DomainError("membership: unknown domain kind");
    }

    // Strict-inequality membership (the set interior, up to the usual caveat
    // for Difference, where the inner closure is removed).
    Formula interior_membership() const {
        switch (kind) {
            case DomainKind::Sphere:
                return fm::atom(radius_sq_expr(center), Rel::Lt, ex::constant(radius * radius));
            case DomainKind::Rectangle: {
                std::vector<Formula> axes;
                for (std::size_t i = 0; i < lower.size(); ++i) {
                    axes.push_back(fm::atom(ex::state(static_cast<int>(i)), Rel::Gt, ex::constant(lower[i])));
                    axes.push_back(fm::atom(ex::state(static_cast<int>(i)), Rel::Lt, ex::constant(upper[i])));
                }
                return fm::conj(std::move(axes));
            }
            case DomainKind::Torus: {
                Expr sq = radius_sq_expr(center);
                return fm::conj({fm::atom(sq, Rel::Gt, ex::constant(inner_radius * inner_radius)),
                                 fm::atom(sq, Rel::Lt, ex::constant(outer_radius * outer_radius))});
            }
            case DomainKind::Ellipsoid: {
                Formula closed_form = membership();
                return fm::atom(closed_form->lhs, Rel::Lt, closed_form->rhs);
            }
            case DomainKind::Difference:
                return fm::conj({outer->interior_membership(), fm::negate(inner->membership())});
        }
        throw DomainError("interior_membership: unknown domain kind");
    }

    // A thin band containing the topological boundary: the set minus its
    // rel-shrunk interior.  Supports the kinds boundary_sample supports.
    Formula boundary_band(double rel) const {
        switch (kind) {
            case DomainKind::Sphere: {
                Expr sq = radius_sq_expr(center);
                const double inner_r = radius * (1.0 - rel);
                return fm::conj({fm::atom(sq, Rel::Ge, ex::constant(inner_r * inner_r)),
                                 fm::atom(sq, Rel::Le, ex::constant(radius * radius))});
            }
            case DomainKind::Rectangle: {
                std::vector<double> lo = lower, hi = upper;
                for (std::size_t i = 0; i < lo.size(); ++i) {
                    const double h = rel * (upper[i] - lower[i]) / 2.0;
                    lo[i] += h;
                    hi[i] -= h;
                }
                Domain shrunk = Domain::rectangle(lo, hi, /*closed=*/false);
                return fm::conj({membership(), fm::negate(shrunk.membership())});
            }
            case DomainKind::Ellipsoid: {
                Formula closed_form = membership();
                const double inner = (1.0 - rel) * (1.0 - rel);
                return fm::conj({fm::atom(closed_form->lhs, Rel::Ge, ex::constant(inner)),
                                 fm::atom(closed_form->lhs, Rel::Le, ex::constant(1.0))});
            }
            default: throw DomainError("boundary_band: unsupported domain kind");
        }
    }

    // Mirrors membership() arithmetic exactly so the numeric check and the
    // symbolic predicate cannot disagree.
    bool contains(std::span<const double> x) const {
        switch (kind) {
            case DomainKind::Sphere: {
                const double s = dist_sq(x, center);
                return closed ? s <= radius * radius : s < radius * radius;
            }
            case DomainKind::Rectangle:
                for (std::size_t i = 0; i < lower.size(); ++i) {
                    if (closed ? !(x[i] >= lower[i] && x[i] <= upper[i])
                               : !(x[i] > lower[i] && x[i] < upper[i]))
                        return false;
                }
                return true;
            case DomainKind::Torus: {
                const double s = dist_sq(x, center);
                return s >= inner_radius * inner_radius && s <= outer_radius * outer_radius;
            }
            case DomainKind::Ellipsoid: {
                double s = 0.0;
                for (std::size_t i = 0; i < center.size(); ++i) {
                    const double t = (x[i] - center[i]) / semi_axes[i];
                    const double sq = t * t;
                    s = i == 0 ? sq : s + sq;
                }
                return s <= 1.0;
            }
            case DomainKind::Difference: return outer->contains(x) && !inner->contains(x);
        }
        return false;
    }

    // ------------------------------------------------------------------
    // Sampling

    // Uniform interior samples, row-major count x dim; bit-identical per seed.
    std::vector<double> sample(std::size_t count, std::uint64_t seed) const {
        Rng rng(derive_seed(seed, "domain-sample"));
        std::vector<double> out(count * dim());
        std::vector<double> point(dim());
        for (std::size_t i = 0; i < count; ++i) {
            draw(rng, point);
            std::copy(point.begin(), point.end(), out.begin() + i * dim());
        }
        return out;
    }

    std::vector<double> boundary_sample(std::size_t count, std::uint64_t seed) const {
        Rng rng(derive_seed(seed, "domain-boundary"));
        const int n = dim();
        std::vector<double> out(count * n);
        std::vector<double> dir(n);
        switch (kind) {
            case DomainKind::Sphere:
            case DomainKind::Ellipsoid:
                for (std::size_t i = 0; i < count; ++i) {
                    unit_direction(rng, dir);
                    for (int j = 0; j < n; ++j) {
                        const double scale = kind == DomainKind::Sphere ? radius : semi_axes[j];
                        out[i * n + j] = center[j] + scale * dir[j];
                    }
                }
                return out;
            case DomainKind::Rectangle: {
                // Face chosen with probability proportional to its area.
                std::vector<double> weights(n);
                double total = 0.0;
                for (int i = 0; i < n; ++i) {
                    double w = 2.0;
                    for (int j = 0; j < n; ++j)
                        if (j != i) w *= upper[j] - lower[j];
                    weights[i] = w;
                    total += w;
                }
                for (std::size_t s = 0; s < count; ++s) {
                    double pick = rng.next_double() * total;
                    int axis = 0;
                    while (axis < n - 1 && pick >= weights[axis]) pick -= weights[axis], ++axis;
                    const bool high = rng.next_double() < 0.5;
                    for (int j = 0; j < n; ++j)
                        out[s * n + j] = j == axis ? (high ? upper[j] : lower[j])
                                                   : rng.uniform(lower[j], upper[j]);
                }
                return out;
            }
            default: throw DomainError("boundary_sample: unsupported domain kind");
        }
    }

    // Scale used for counterexample perturbation radii.
    double characteristic_radius() const {
        switch (kind) {
            case DomainKind::Sphere: return radius;
            case DomainKind::Torus: return outer_radius;
            case DomainKind::Rectangle: {
                double mean = 0.0;
                for (std::size_t i = 0; i < lower.size(); ++i) mean += (upper[i] - lower[i]) / 2.0;
                return mean / static_cast<double>(lower.size());
            }
            case DomainKind::Ellipsoid: {
                double mean = 0.0;
                for (double a : semi_axes) mean += a;
                return mean / static_cast<double>(semi_axes.size());
            }
            case DomainKind::Difference: return outer->characteristic_radius();
        }
        return 1.0;
    }

    void bounding_box(std::vector<double>& lo, std::vector<double>& hi) const {
        const int n = dim();
        lo.assign(n, 0.0);
        hi.assign(n, 0.0);
        switch (kind) {
            case DomainKind::Sphere:
            case DomainKind::Torus: {
                const double r = kind == DomainKind::Sphere ? radius : outer_radius;
                for (int i = 0; i < n; ++i) lo[i] = center[i] - r, hi[i] = center[i] + r;
                return;
            }
            case DomainKind::Rectangle: lo = lower; hi = upper; return;
            case DomainKind::Ellipsoid:
                for (int i = 0; i < n; ++i)
                    lo[i] = center[i] - semi_axes[i], hi[i] = center[i] + semi_axes[i];
                return;
            case DomainKind::Difference: outer->bounding_box(lo, hi); return;
        }
    }

    // ------------------------------------------------------------------
    // Textual constructors (the YAML vocabulary)

    static Domain parse(std::string_view text);

    std::string to_text() const {
        auto vec = [](const std::vector<double>& v) {
            std::string s = "[";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) s += ", ";
                s += shortest_decimal(v[i]);
            }
            return s + "]";
        };
        switch (kind) {
            case DomainKind::Sphere:
                return std::string(closed ? "Sphere" : "OpenSphere") + "(" + vec(center) + ", " +
                       shortest_decimal(radius) + ")";
            case DomainKind::Rectangle:
                return std::string(closed ? "Rectangle" : "OpenRectangle") + "(" + vec(lower) + ", " +
                       vec(upper) + ")";
            case DomainKind::Torus:
                return "Torus(" + vec(center) + ", " + shortest_decimal(outer_radius) + ", " +
                       shortest_decimal(inner_radius) + ")";
            case DomainKind::Ellipsoid: return "Ellipsoid(" + vec(center) + ", " + vec(semi_axes) + ")";
            case DomainKind::Difference:
                return "Difference(" + outer->to_text() + ", " + inner->to_text() + ")";
        }
        return "";
    }

private:
    static double dist_sq(std::span<const double> x, const std::vector<double>& c) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double d = x[i] - c[i];
            const double sq = d * d;
            s = i == 0 ? sq : s + sq;
        }
        return s;
    }

    static Expr radius_sq_expr(const std::vector<double>& c) {
        Expr sum;
        for (std::size_t i = 0; i < c.size(); ++i) {
            Expr d = ex::sub(ex::state(static_cast<int>(i)), ex::constant(c[i]));
            Expr sq = ex::pow_i(d, 2);
            sum = sum ? ex::add(sum, sq) : sq;
        }
        return sum;
    }

    static void unit_direction(Rng& rng, std::vector<double>& dir) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& d : dir) {
                d = rng.gaussian();
                norm += d * d;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& d : dir) d /= norm;
    }

    void draw(Rng& rng, std::vector<double>& point) const {
        switch (kind) {
            case DomainKind::Sphere: {
                unit_direction(rng, point);
                const double r = radius * std::pow(rng.next_double(), 1.0 / dim());
                for (int i = 0; i < dim(); ++i) point[i] = center[i] + r * point[i];
                return;
            }
            case DomainKind::Rectangle:
                for (std::size_t i = 0; i < lower.size(); ++i) point[i] = rng.uniform(lower[i], upper[i]);
                return;
            case DomainKind::Torus: {
                const Domain ball = Domain::sphere(center, outer_radius);
                reject_into(rng, point, ball,
                            [this](std::span<const double> p) { return contains(p); });
                return;
            }
            case DomainKind::Ellipsoid: {
                unit_direction(rng, point);
                const double r = std::pow(rng.next_double(), 1.0 / dim());
                for (int i = 0; i < dim(); ++i) point[i] = center[i] + semi_axes[i] * r * point[i];
                return;
            }
            case DomainKind::Difference:
                reject_into(rng, point, *outer,
                            [this](std::span<const double> p) { return !inner->contains(p); });
                return;
        }
    }

    template <class Accept>
    static void reject_into(Rng& rng, std::vector<double>& point, const Domain& proposal, Accept accept) {
        // A point that needs 1e6 proposals implies an acceptance rate far
        // below the 1e-4 floor; treat the domain as degenerate.
        for (std::size_t trials = 0; trials < 1000000; ++trials) {
            proposal.draw(rng, point);
            if (accept(point)) return;
        }
        throw DomainError("degenerate domain: rejection acceptance rate below 1e-4");
    }
};

inline Domain Domain::parse(std::string_view text) {
    struct Reader {
        std::string_view s;
        std::size_t pos = 0;
        void ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        void expect(char c) {
            if (!accept(c)) throw DomainError("domain syntax: expected '" + std::string(1, c) + "' in '" + std::string(s) + "'");
        }
        std::string ident() {
            ws();
            std::string out;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])))) out.push_back(s[pos++]);
            return out;
        }
        double number() {
            ws();
            std::size_t start = pos;
            if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
            while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' ||
                                      s[pos] == 'e' || s[pos] == 'E' ||
                                      ((s[pos] == '-' || s[pos] == '+') && (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
                ++pos;
            if (pos == start) throw DomainError("domain syntax: expected number in '" + std::string(s) + "'");
            return std::stod(std::string(s.substr(start, pos - start)));
        }
        std::vector<double> vector() {
            expect('[');
            std::vector<double> v;
            if (!accept(']')) {
                v.push_back(number());
                while (accept(',')) v.push_back(number());
                expect(']');
            }
            return v;
        }
    } r{text};

    const std::string name = r.ident();
    r.expect('(');
    Domain d;
    if (name == "Sphere" || name == "OpenSphere") {
        auto c = r.vector();
        r.expect(',');
        const double rad = r.number();
        d = Domain::sphere(std::move(c), rad, name == "Sphere");
    } else if (name == "Rectangle" || name == "OpenRectangle") {
        auto lo = r.vector();
        r.expect(',');
        auto hi = r.vector();
        d = Domain::rectangle(std::move(lo), std::move(hi), name == "Rectangle");
    } else if (name == "Torus") {
        auto c = r.vector();
        r.expect(',');
        const double ro = r.number();
        r.expect(',');
        const double ri = r.number();
        d = Domain::torus(std::move(c), ro, ri);
    } else if (name == "Ellipsoid") {
        auto c = r.vector();
        r.expect(',');
        auto axes = r.vector();
        d = Domain::ellipsoid(std::move(c), std::move(axes));
    } else {
        throw DomainError("unknown domain constructor: " + name);
    }
    r.expect(')');
    r.ws();
    if (r.pos != text.size()) throw DomainError("domain syntax: trailing input in '" + std::string(text) + "'");
    return d;
}

// ---------------------------------------------------------------------------
// Set roles

enum class SetRole { XD, XI, XU, XS, XG, XF };

inline const char* role_name(SetRole r) {
    switch (r) {
        case SetRole::XD: return "XD";
        case SetRole::XI: return "XI";
        case SetRole::XU: return "XU";
        case SetRole::XS: return "XS";
        case SetRole::XG: return "XG";
        case SetRole::XF: return "XF";
    }
    return "?";
}

inline SetRole role_from_name(std::string_view name) {
    for (SetRole r : {SetRole::XD, SetRole::XI, SetRole::XU, SetRole::XS, SetRole::XG, SetRole::XF})
        if (name == role_name(r)) return r;
    throw DomainError("unknown set role: " + std::string(name));
}

struct SetAssignment {
    std::map<SetRole, Domain> sets;

    bool has(SetRole r) const { return sets.count(r) != 0; }
    const Domain& at(SetRole r) const {
        auto it = sets.find(r);
        if (it == sets.end()) throw DomainError(std::string("missing set role ") + role_name(r));
        return it->second;
    }
};

// Sampled guardrails for the configured set relations: X_U and X_F disjoint,
// X_G inside X_F, X_F inside X_S (the safe-set dual of the first relation).
inline void check_set_relations(const SetAssignment& sets, std::uint64_t seed,
                                std::size_t samples = 10000) {
    auto all_inside = [&](SetRole inner_role, SetRole outer_role) {
        const auto pts = sets.at(inner_role).sample(samples, derive_seed(seed, "set-check"));
        const int n = sets.at(inner_role).dim();
        for (std::size_t i = 0; i < samples; ++i) {
            std::span<const double> p(pts.data() + i * n, n);
            if (!sets.at(outer_role).contains(p))
                throw DomainError(std::string("set relation violated: ") + role_name(inner_role) +
                                  " must be contained in " + role_name(outer_role));
        }
    };
    if (sets.has(SetRole::XU) && sets.has(SetRole::XF)) {
        const auto pts = sets.at(SetRole::XF).sample(samples, derive_seed(seed, "set-check-disjoint"));
        const int n = sets.at(SetRole::XF).dim();
        for (std::size_t i = 0; i < samples; ++i) {
            std::span<const double> p(pts.data() + i * n, n);
            if (sets.at(SetRole::XU).contains(p))
                throw DomainError("set relation violated: XU and XF must be disjoint");
        }
    }
    if (sets.has(SetRole::XG) && sets.has(SetRole::XF)) all_inside(SetRole::XG, SetRole::XF);
    if (sets.has(SetRole::XF) && sets.has(SetRole::XS)) all_inside(SetRole::XF, SetRole::XS);
}

}  // namespace fossil
