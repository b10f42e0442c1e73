#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "tow/validation.hpp"

using namespace tow;
using test::interval;

namespace {

double heat(double x, double t) {
    const double pi = std::numbers::pi;
    return std::exp(-pi * pi * t / 3.0) * std::sin(pi * x);
}

ReferenceSolution exact_reference(double h, double T, double offset) {
    ReferenceSolution r;
    r.x_lo = 0.0;
    r.x_hi = 1.0;
    r.h = h;
    r.horizon = T;
    r.snapshot_dt = T / 200.0;
    const auto n = static_cast<std::size_t>(std::lround(1.0 / h)) + 1;
    for (int k = 0; k <= 200; ++k) {
        std::vector<double> layer(n);
        for (std::size_t i = 0; i < n; ++i) layer[i] = 0.25 + offset;
        r.snapshots.push_back(layer);
    }
    return r;
}

}  // namespace

TEST_CASE("FD reference matches the heat solution") {
    const Instance in = sine_instance(false);
    const ReferenceSolution ref = fd_obstacle_reference(in.boundary, in.obstacle, *in.domain, 1.0 / 400.0, 0.25);
    CHECK(ref.diffusivity == doctest::Approx(1.0 / 3.0));
    double worst = 0.0;
    for (std::size_t k = 0; k < ref.snapshots.size(); ++k) {
        const double t = k * ref.snapshot_dt;
        for (std::size_t i = 0; i < ref.points(); ++i) {
            const double x = ref.x_lo + i * ref.h;
            worst = std::max(worst, std::abs(ref.snapshots[k][i] - heat(x, t)));
        }
    }
    CHECK(worst <= 1e-3);
    CHECK(ref.value(0.37, 0.11) == doctest::Approx(heat(0.37, 0.11)).epsilon(1e-3));
}

TEST_CASE("FD reference projects onto the obstacle") {
    const Instance in = sine_instance(false);
    // psi = max F_initial everywhere: diffusion pulls below, projection lifts back
    const Obstacle high{Expression::constant(1.0), 0.0};
    const BoundaryData flat{Expression::constant(1.0), Expression::constant(1.0), 0.0};
    const ReferenceSolution ref = fd_obstacle_reference(flat, high, *in.domain, 1.0 / 100.0, 0.05);
    for (const auto& layer : ref.snapshots)
        for (double v : layer) REQUIRE(v == doctest::Approx(1.0).epsilon(1e-15));

    const Obstacle half{Expression::sine(0.6, Point{1.0}, Point{0.0}, 0.0), 0.0};
    const ReferenceSolution r2 = fd_obstacle_reference(in.boundary, half, *in.domain, 1.0 / 100.0, 0.25);
    for (std::size_t i = 0; i < r2.points(); ++i) {
        const double x = r2.x_lo + i * r2.h;
        CHECK(r2.snapshots.back()[i] >= 0.6 * std::sin(std::numbers::pi * x) - 1e-15);
    }
}

TEST_CASE("FD reference rejects steps above the stability limit") {
    const Instance in = sine_instance(false);
    ReferenceOptions o;
    const double h = 1.0 / 100.0;
    o.dt = 1.6 * h * h;  // limit is 1.5 h² for diffusivity 1/3
    try {
        (void)fd_obstacle_reference(in.boundary, in.obstacle, *in.domain, h, 0.1, o);
        FAIL("expected CFLViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CFLViolation);
    }
    o.dt = 1.4 * h * h;
    CHECK_NOTHROW((void)fd_obstacle_reference(in.boundary, in.obstacle, *in.domain, h, 0.1, o));

    const Domain disc = Domain::ball(Point{0.0, 0.0}, 1.0);
    CHECK_THROWS_AS((void)fd_obstacle_reference(in.boundary, in.obstacle, disc, h, 0.1), Error);
}

TEST_CASE("linf_error against exact and shifted references") {
    auto prob = test::make_problem(2.0, 1, 0.2, 0.25, interval(0.0, 1.0), Expression::constant(0.25),
                                   Expression::constant(-10.0));
    auto lat = test::make_lattice(*prob, 0.025);
    const ValueField u = solve_time_marching(prob, lat);
    CHECK(linf_error(u, exact_reference(0.005, 0.25, 0.0)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(linf_error(u, exact_reference(0.005, 0.25, 0.05)) == doctest::Approx(0.05).epsilon(1e-12));
    // reference must be four times finer than the lattice
    CHECK_THROWS_AS((void)linf_error(u, exact_reference(0.01, 0.25, 0.0)), Error);
}

TEST_CASE("convergence study on the sine instance") {
    const Instance in = sine_instance(false);
    const std::vector<double> ladder{0.2, 0.1, 0.05};
    const ConvergenceTable t = convergence_study(in, ladder);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.verdict == Verdict::Monotone);
    CHECK(t.rows[1].error < t.rows[0].error);
    CHECK(t.rows[2].error < t.rows[1].error);
    CHECK(t.rows[2].error < 0.05);
    CHECK(t.reference_h <= 0.05 / 8.0 / 4.0 + 1e-15);

    // independent check of the last row against the closed form
    const ValueField u = solve_time_marching(in.problem(0.05), in.lattice(0.05));
    double worst = 0.0;
    for (int j = 1; j <= u.levels(); ++j) {
        const double tj = u.lattice().time(j);
        if (tj < 0.025 - 1e-12) continue;
        for (NodeId id : u.lattice().interior_nodes())
            worst = std::max(worst, std::abs(u.at(id, j) - heat(u.lattice().coordinate(id)[0], tj)));
    }
    CHECK(t.rows[2].error == doctest::Approx(worst).epsilon(0.02));

    std::ostringstream os;
    write_csv(os, t);
    CHECK(os.str().rfind("eps,h,error,runtime_s\n", 0) == 0);
    const auto j = to_json(t);
    CHECK(j.at("verdict") == "MONOTONE");
    CHECK(j.at("rows").size() == 3);
}

TEST_CASE("convergence study guards") {
    const Instance in = sine_instance(false);
    const std::vector<double> one{0.1};
    CHECK(convergence_study(in, one).verdict == Verdict::Monotone);

    Instance p3 = in;
    p3.p = 3.0;
    const std::vector<double> ladder{0.2, 0.1};
    const ConvergenceTable t = convergence_study(p3, ladder);
    CHECK(t.verdict == Verdict::NotApplicable);
    CHECK_FALSE(t.note.empty());

    const std::vector<double> up{0.1, 0.2};
    CHECK_THROWS_AS((void)convergence_study(in, up), Error);
}

TEST_CASE("comparison of ordered data") {
    ComparisonSetup setup{make_parameters(3.0, 1, 0.2, 0.25), interval(-1.0, 1.0), 0.025};
    const ComparisonReport r = comparison_test(setup, 5, 19);
    CHECK(r.passed());
    CHECK(r.cases.size() == 5);
    CHECK(r.worst_margin >= -1e-12);
    const auto j = to_json(r);
    CHECK(j.at("failures") == 0);
}

TEST_CASE("min_difference on identical and shifted data") {
    const Expression F = Expression::bump(0.5, Point{0.1}, 0.3, 0.5, 0.2);
    auto a = test::make_problem(5.0, 1, 0.2, 0.2, interval(-1.0, 1.0), F, Expression::constant(-10.0));
    auto lat = test::make_lattice(*a, 0.025);
    const ValueField ua = solve_time_marching(a, lat);
    CHECK(min_difference(ua, ua) == 0.0);

    // F + 1 with psi far below: u shifts by exactly 1
    auto b = test::make_problem(5.0, 1, 0.2, 0.2, interval(-1.0, 1.0), Expression::sum({F, Expression::constant(1.0)}),
                                Expression::constant(-10.0));
    const ValueField ub = solve_time_marching(b, lat);
    CHECK(min_difference(ub, ua) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(min_difference(ua, ub) == doctest::Approx(-1.0).epsilon(1e-12));
    double worst = 0.0;
    for (std::size_t i = 0; i < ua.raw().size(); ++i)
        if (!std::isnan(ua.raw()[i])) worst = std::max(worst, std::abs(ub.raw()[i] - ua.raw()[i] - 1.0));
    CHECK(worst <= 1e-12);
}

TEST_CASE("random data is compatible") {
    std::mt19937_64 rng(3);
    for (int n : {1, 2}) {
        auto dom = n == 1 ? interval(-1.0, 1.0)
                          : std::make_shared<const Domain>(Domain::box(Point{-0.6, -0.6}, Point{0.6, 0.6}));
        const SpaceTimeLattice lat(dom, 0.05, 0.2, 0.1);
        for (int k = 0; k < 5; ++k) {
            const RandomData d = tow::random_data(lat, rng);
            const Problem prob{make_parameters(3.0, n, 0.2, 0.1), dom, d.boundary, d.obstacle};
            CHECK(validate_compatibility(prob, lat).compatible);
        }
    }
}

TEST_CASE("modulus report on constant and affine fields") {
    auto flat = test::make_problem(2.0, 1, 0.2, 0.25, interval(-1.0, 1.0), Expression::constant(0.7),
                                   Expression::constant(-1.0));
    auto lat = test::make_lattice(*flat, 0.025);
    const ModulusReport c = modulus_report(solve_time_marching(flat, lat));
    REQUIRE(c.classes.size() == 3);
    for (const auto& m : c.classes) {
        CHECK(m.pairs > 0);
        CHECK(m.max_quotient <= 1e-12);
    }

    const double slope = 1.3;
    auto lin = test::make_problem(3.0, 1, 0.2, 0.25, interval(-1.0, 1.0), Expression::affine(Point{slope}, 0.1),
                                  Expression::constant(-10.0));
    const ModulusReport a = modulus_report(solve_time_marching(lin, lat));
    for (const auto& m : a.classes) CHECK(m.max_quotient <= slope + 1e-9);
    // equal-time pairs attain the slope
    CHECK(a.classes[0].max_quotient == doctest::Approx(slope).epsilon(1e-9));
}

TEST_CASE("modulus trend arithmetic") {
    ModulusReport r1, r2, r3;
    for (auto* r : {&r1, &r2, &r3}) r->classes.resize(3);
    const double q[3][3] = {{2.0, 8.0, 1.0}, {2.5, 5.5, 1.1}, {2.4, 4.0, 1.0}};
    ModulusReport* rs[3] = {&r1, &r2, &r3};
    for (int k = 0; k < 3; ++k)
        for (int c = 0; c < 3; ++c) rs[k]->classes[c].max_quotient = q[k][c];
    const ModulusTrend t = modulus_trend({r1, r2, r3});
    CHECK(t.spread[0] == doctest::Approx(1.25));
    CHECK(t.spread[1] == doctest::Approx(2.0));
    CHECK(t.successive[1] == doctest::Approx(8.0 / 5.5));
    CHECK_FALSE(t.bounded(1.5));
    CHECK(t.bounded(2.0));
    const auto j = to_json(t);
    CHECK(j.contains("spread"));
}
