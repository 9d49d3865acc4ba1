#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <span>

#include "fossil/domains.hpp"
#include "fossil/smt2.hpp"

using namespace fossil;

namespace {

double norm2(std::span<const double> p) {
    double s = 0;
    for (double v : p) s += v * v;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("membership: sphere, rectangle, torus forms") {
    Domain s = Domain::sphere({0, 0}, 1.0);
    CHECK(to_smtlib(s.membership()) == "(<= (+ (* x0 x0) (* x1 x1)) 1.0)");

    Domain r = Domain::rectangle({-3.5, -3.5}, {3.5, 3.5});
    Formula fr = r.membership();
    CHECK(fr->kind == FormulaNode::Kind::And);
    CHECK(fr->children.size() == 4);

    Domain t = Domain::torus({0, 0}, 1.0, 0.01);
    Formula ft = t.membership();
    CHECK(ft->kind == FormulaNode::Kind::And);
    const double onb[] = {0.5, 0.0};
    const double inside_hole[] = {0.005, 0.0};
    CHECK(formula_holds(ft, onb));
    CHECK(!formula_holds(ft, inside_hole));

    Domain open_s = Domain::sphere({0, 0}, 1.0, /*closed=*/false);
    const double edge[] = {1.0, 0.0};
    CHECK(s.contains(edge));
    CHECK(!open_s.contains(edge));
}

TEST_CASE("sample: all sphere samples satisfy the predicate") {
    Domain s = Domain::sphere({0, 0}, 1.0);
    auto pts = s.sample(1000, 42);
    REQUIRE(pts.size() == 2000);
    Formula f = s.membership();
    for (int i = 0; i < 1000; ++i) {
        std::span<const double> p(pts.data() + 2 * i, 2);
        CHECK(formula_holds(f, p));
    }
}

TEST_CASE("sample: torus norms stay within the annulus") {
    Domain t = Domain::torus({0, 0}, 1.0, 0.01);
    auto pts = t.sample(500, 7);
    for (int i = 0; i < 500; ++i) {
        std::span<const double> p(pts.data() + 2 * i, 2);
        const double n = norm2(p);
        CHECK(n >= 0.01);
        CHECK(n <= 1.0);
    }
}

TEST_CASE("sample: law of large numbers on the unit square") {
    Domain r = Domain::rectangle({0, 0}, {1, 1});
    const std::size_t count = 100000;
    auto pts = r.sample(count, 1);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < count; ++i) {
        mx += pts[2 * i];
        my += pts[2 * i + 1];
    }
    mx /= count;
    my /= count;
    CHECK(std::fabs(mx - 0.5) < 0.02);
    CHECK(std::fabs(my - 0.5) < 0.02);
}

TEST_CASE("boundary_sample: sphere, rectangle, ellipsoid") {
    Domain s = Domain::sphere({0, 0}, 1.0);
    auto ps = s.boundary_sample(200, 3);
    for (int i = 0; i < 200; ++i) {
        std::span<const double> p(ps.data() + 2 * i, 2);
        CHECK(std::fabs(norm2(p) - 1.0) <= 1e-9);
    }

    Domain r = Domain::rectangle({0, 0}, {1, 1});
    auto pr = r.boundary_sample(200, 4);
    for (int i = 0; i < 200; ++i) {
        const double x = pr[2 * i], y = pr[2 * i + 1];
        const bool on_edge = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
        CHECK(on_edge);
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        CHECK(y >= 0.0);
        CHECK(y <= 1.0);
    }

    Domain e = Domain::ellipsoid({0, 0}, {1, 2});
    auto pe = e.boundary_sample(200, 5);
    for (int i = 0; i < 200; ++i) {
        const double x = pe[2 * i], y = pe[2 * i + 1];
        CHECK(std::fabs(x * x + (y / 2) * (y / 2) - 1.0) <= 1e-9);
    }

    Domain t = Domain::torus({0, 0}, 1.0, 0.1);
    CHECK_THROWS_AS(t.boundary_sample(10, 1), DomainError);
}

TEST_CASE("property: sampler/predicate coherence for every kind") {
    std::vector<Domain> domains = {
        Domain::sphere({0.5, -1.0}, 2.0),
        Domain::sphere({0, 0}, 1.0, false),
        Domain::rectangle({-1, 0}, {2, 3}),
        Domain::rectangle({-1, 0}, {2, 3}, false),
        Domain::torus({0, 0}, 1.5, 0.2),
        Domain::ellipsoid({1, 1}, {0.5, 2.0}),
        Domain::difference(Domain::rectangle({-2, -2}, {2, 2}), Domain::sphere({0, 0}, 1.0)),
    };
    for (const auto& d : domains) {
        Formula f = d.membership();
        auto pts = d.sample(10000, 99);
        const int n = d.dim();
        for (int i = 0; i < 10000; ++i) {
            std::span<const double> p(pts.data() + n * i, n);
            if (!formula_holds(f, p)) {
                CAPTURE(d.to_text());
                REQUIRE(formula_holds(f, p));
            }
        }
    }
    CHECK(true);
}

TEST_CASE("property: difference samples avoid the removed set") {
    Domain inner = Domain::sphere({0, 0}, 1.0);
    Domain d = Domain::difference(Domain::rectangle({-2, -2}, {2, 2}), inner);
    auto pts = d.sample(5000, 11);
    for (int i = 0; i < 5000; ++i) {
        std::span<const double> p(pts.data() + 2 * i, 2);
        CHECK(!inner.contains(p));
    }
}

TEST_CASE("property: sampling is bit-deterministic per seed") {
    Domain d = Domain::torus({0, 0}, 1.0, 0.3);
    auto a = d.sample(512, 1234);
    auto b = d.sample(512, 1234);
    CHECK(a == b);
    auto c = d.sample(512, 1235);
    CHECK(a != c);
}

TEST_CASE("degenerate difference domains error out") {
    Domain d = Domain::difference(Domain::rectangle({0, 0}, {1, 1}),
                                  Domain::rectangle({-1, -1}, {2, 2}));
    CHECK_THROWS_AS(d.sample(1, 0), DomainError);
}

TEST_CASE("invariant validation at construction") {
    CHECK_THROWS_AS(Domain::sphere({0, 0}, -1.0), DomainError);
    CHECK_THROWS_AS(Domain::rectangle({0, 0}, {1, -1}), DomainError);
    CHECK_THROWS_AS(Domain::torus({0, 0}, 0.5, 0.6), DomainError);
    CHECK_THROWS_AS(Domain::ellipsoid({0, 0}, {1, 0}), DomainError);
}

TEST_CASE("textual constructors parse and round-trip") {
    auto s = Domain::parse("Sphere([0,0], 1.0)");
    CHECK(s.kind == DomainKind::Sphere);
    CHECK(s.radius == 1.0);

    auto t = Domain::parse("Torus([0,0], 1.0, 0.01)");
    CHECK(t.inner_radius == 0.01);

    auto r = Domain::parse("Rectangle([-3.5, -3.5], [3.5, 3.5])");
    CHECK(r.lower == std::vector<double>{-3.5, -3.5});

    auto os = Domain::parse("OpenSphere([1, 2, 3], 0.5)");
    CHECK(!os.closed);
    CHECK(os.dim() == 3);

    auto e = Domain::parse("Ellipsoid([0, 0], [1, 2])");
    CHECK(e.semi_axes == std::vector<double>{1, 2});

    for (const char* text : {"Sphere([0, 0], 1)", "OpenRectangle([0, 0], [1, 1])",
                             "Torus([0.5, -1], 2, 0.25)", "Ellipsoid([0, 0], [1, 2])"}) {
        Domain d = Domain::parse(text);
        Domain again = Domain::parse(d.to_text());
        CHECK(d.to_text() == again.to_text());
    }

    CHECK_THROWS_AS(Domain::parse("Blob([0], 1)"), DomainError);
    CHECK_THROWS_AS(Domain::parse("Sphere([0,0] 1)"), DomainError);
}

TEST_CASE("set relation guardrails") {
    SetAssignment ok;
    ok.sets.emplace(SetRole::XS, Domain::rectangle({-3, -3}, {3, 3}));
    ok.sets.emplace(SetRole::XG, Domain::rectangle({-0.1, -0.1}, {0.1, 0.1}));
    ok.sets.emplace(SetRole::XF, Domain::rectangle({-0.2, -0.2}, {0.2, 0.2}));
    CHECK_NOTHROW(check_set_relations(ok, 5));

    SetAssignment bad;
    bad.sets.emplace(SetRole::XG, Domain::rectangle({-0.3, -0.3}, {0.3, 0.3}));
    bad.sets.emplace(SetRole::XF, Domain::rectangle({-0.2, -0.2}, {0.2, 0.2}));
    CHECK_THROWS_AS(check_set_relations(bad, 5), DomainError);

    SetAssignment unsafe_overlap;
    unsafe_overlap.sets.emplace(SetRole::XU, Domain::rectangle({0, 0}, {1, 1}));
    unsafe_overlap.sets.emplace(SetRole::XF, Domain::rectangle({0.5, 0.5}, {2, 2}));
    CHECK_THROWS_AS(check_set_relations(unsafe_overlap, 5), DomainError);
}
