#include "tow/validation.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

namespace tow {

double ReferenceSolution::value(double x, double t) const {
    const std::size_t np = points();
    const double s = std::clamp((x - x_lo) / h, 0.0, static_cast<double>(np - 1));
    const double q = std::clamp(t / snapshot_dt, 0.0, static_cast<double>(snapshots.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(s), np - 2);
    const auto k = std::min(static_cast<std::size_t>(q), snapshots.size() - 2);
    const double fx = s - static_cast<double>(i);
    const double ft = q - static_cast<double>(k);
    const auto& a = snapshots[k];
    const auto& b = snapshots[k + 1];
    const double va = (1.0 - fx) * a[i] + fx * a[i + 1];
    const double vb = (1.0 - fx) * b[i] + fx * b[i + 1];
    return (1.0 - ft) * va + ft * vb;
}

ReferenceSolution fd_obstacle_reference(const BoundaryData& F, const Obstacle& psi, const Domain& domain,
                                        double h_ref, double horizon, ReferenceOptions options) {
    if (domain.dim() != 1 || domain.kind() != Domain::Kind::Box)
        throw Error(ErrorCode::InvalidParameter, "reference solver needs a 1D interval");
    if (!(h_ref > 0.0) || !(horizon > 0.0))
        throw Error(ErrorCode::InvalidParameter, "reference spacing and horizon must be positive");
    ReferenceSolution ref;
    ref.x_lo = domain.bounds().lo[0];
    ref.x_hi = domain.bounds().hi[0];
    const auto cells = static_cast<std::size_t>(std::ceil((ref.x_hi - ref.x_lo) / h_ref - 1e-9));
    if (cells < 2) throw Error(ErrorCode::InvalidParameter, "reference grid needs at least two cells");
    ref.h = (ref.x_hi - ref.x_lo) / static_cast<double>(cells);
    ref.horizon = horizon;
    const double n = 1.0;
    ref.diffusivity = 1.0 / (n + 2.0);
    const double limit = ref.h * ref.h * (n + 2.0) / 2.0;

    ref.snapshot_dt = options.snapshot_dt > 0.0 ? options.snapshot_dt : horizon / 1000.0;
    std::size_t sub;
    if (options.dt > 0.0) {
        if (options.dt * (2.0 / (ref.h * ref.h)) / (n + 2.0) > 1.0) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "dt = %.6g exceeds the explicit limit %.6g for h = %.6g", options.dt,
                          limit, ref.h);
            throw Error(ErrorCode::CFLViolation, buf);
        }
        sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ref.snapshot_dt / options.dt)));
        ref.dt = options.dt;
        ref.snapshot_dt = static_cast<double>(sub) * options.dt;
    } else {
        sub = static_cast<std::size_t>(std::ceil(ref.snapshot_dt / (0.9 * limit)));
        ref.dt = ref.snapshot_dt / static_cast<double>(sub);
    }
    const auto layers = static_cast<std::size_t>(std::ceil(horizon / ref.snapshot_dt - 1e-9));

    const std::size_t np = cells + 1;
    std::vector<double> xs(np), u(np), next(np);
    for (std::size_t i = 0; i < np; ++i) xs[i] = ref.x_lo + static_cast<double>(i) * ref.h;
    auto boundary = [&](double t) {
        u[0] = F.lateral(Point{xs[0]}, t);
        u[np - 1] = F.lateral(Point{xs[np - 1]}, t);
    };
    for (std::size_t i = 1; i + 1 < np; ++i) u[i] = std::max(F.initial(Point{xs[i]}, 0.0), psi.psi(Point{xs[i]}, 0.0));
    boundary(0.0);
    ref.snapshots.reserve(layers + 1);
    ref.snapshots.push_back(u);
    const double r = ref.diffusivity * ref.dt / (ref.h * ref.h);
    std::size_t steps = 0;
    for (std::size_t k = 1; k <= layers; ++k) {
        for (std::size_t s = 0; s < sub; ++s) {
            ++steps;
            const double t = static_cast<double>(steps) * ref.dt;
            for (std::size_t i = 1; i + 1 < np; ++i)
                next[i] = std::max(u[i] + r * (u[i + 1] - 2.0 * u[i] + u[i - 1]), psi.psi(Point{xs[i]}, t));
            std::swap(u, next);
            boundary(t);
        }
        ref.snapshots.push_back(u);
    }
    return ref;
}

double linf_error(const ValueField& u, const ReferenceSolution& ref) {
    const SpaceTimeLattice& lat = u.lattice();
    if (lat.dim() != 1) throw Error(ErrorCode::InvalidParameter, "reference comparison is 1D only");
    if (ref.h > lat.h() / 4.0 * (1.0 + 1e-12))
        throw Error(ErrorCode::InvalidParameter, "reference spacing must be at most h/4");
    const double T = u.problem().params.horizon;
    if (ref.horizon < T * (1.0 - 1e-12)) throw Error(ErrorCode::InvalidParameter, "reference horizon too short");
    const double tol = 1e-12 * T;
    double err = 0.0;
    for (int j = 1; j <= lat.levels(); ++j) {
        const double t = lat.time(j);
        if (t < 0.1 * T - tol || t > T + tol) continue;
        for (NodeId id : lat.interior_nodes())
            err = std::max(err, std::abs(u.at(id, j) - ref.value(lat.coordinate(id)[0], t)));
    }
    return err;
}

std::shared_ptr<const Problem> Instance::problem(double eps) const {
    return std::make_shared<const Problem>(
        Problem{make_parameters(p, domain->dim(), eps, horizon), domain, boundary, obstacle});
}

std::shared_ptr<const SpaceTimeLattice> Instance::lattice(double eps) const {
    return std::make_shared<const SpaceTimeLattice>(domain, eps / h_ratio, eps, horizon);
}

Instance sine_instance(bool active_obstacle) {
    Instance in;
    in.name = active_obstacle ? "sine_active_obstacle" : "sine";
    in.p = 2.0;
    in.horizon = 0.25;
    in.domain = std::make_shared<const Domain>(Domain::interval(0.0, 1.0));
    const double pi = std::numbers::pi;
    in.boundary = {Expression::constant(0.0), Expression::sine(1.0, Point{1.0}, Point{0.0}, 0.0), pi};
    in.obstacle = active_obstacle ? Obstacle{Expression::sine(0.6, Point{1.0}, Point{0.0}, 0.0), 0.6 * pi}
                                  : Obstacle{Expression::constant(-10.0), 0.0};
    return in;
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Monotone: return "MONOTONE";
        case Verdict::Violation: return "VIOLATION";
        case Verdict::NotApplicable: return "N/A";
    }
    return "?";
}

ConvergenceTable convergence_study(const Instance& instance, std::span<const double> eps_list,
                                   StudyOptions options) {
    if (eps_list.empty()) throw Error(ErrorCode::InvalidParameter, "empty eps ladder");
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] < eps_list[k - 1]))
            throw Error(ErrorCode::InvalidParameter, "eps ladder must be strictly decreasing");
    ConvergenceTable table;
    table.instance = instance.name;
    const bool reference_valid = instance.p == 2.0 && instance.domain->dim() == 1;
    std::shared_ptr<ReferenceSolution> ref;
    if (reference_valid) {
        const double h_min = eps_list.back() / instance.h_ratio;
        table.reference_h = std::min(options.reference_h, h_min / 4.0);
        ref = std::make_shared<ReferenceSolution>(fd_obstacle_reference(
            instance.boundary, instance.obstacle, *instance.domain, table.reference_h, instance.horizon));
        table.reference_h = ref->h;
    } else {
        table.note = "no classical reference for p != 2 or n != 1";
    }
    SolveOptions so;
    so.threads = options.threads;
    for (double eps : eps_list) {
        ConvergenceRow row;
        row.eps = eps;
        row.h = eps / instance.h_ratio;
        const auto t0 = std::chrono::steady_clock::now();
        const ValueField u = solve_time_marching(instance.problem(eps), instance.lattice(eps), so);
        row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.error = ref ? linf_error(u, *ref) : std::numeric_limits<double>::quiet_NaN();
        table.rows.push_back(row);
    }
    if (!reference_valid) {
        table.verdict = Verdict::NotApplicable;
        return table;
    }
    table.verdict = Verdict::Monotone;
    for (std::size_t k = 1; k < table.rows.size(); ++k)
        if (!(table.rows[k].error < table.rows[k - 1].error)) {
            table.verdict = Verdict::Violation;
            table.violation = static_cast<int>(k - 1);
            char buf[160];
            std::snprintf(buf, sizeof buf, "error does not decrease from eps = %g to eps = %g",
                          table.rows[k - 1].eps, table.rows[k].eps);
            table.note = buf;
            break;
        }
    return table;
}

void write_csv(std::ostream& os, const ConvergenceTable& table) {
    os << "eps,h,error,runtime_s\n";
    char buf[128];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.6f\n", r.eps, r.h, r.error, r.runtime_s);
        os << buf;
    }
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const ConvergenceTable& table) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["instance"] = table.instance;
    j["verdict"] = std::string(to_string(table.verdict));
    j["reference_h"] = table.reference_h;
    if (table.violation >= 0) j["violation"] = {table.violation, table.violation + 1};
    if (!table.note.empty()) j["note"] = table.note;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : table.rows)
        j["rows"].push_back({{"eps", r.eps}, {"h", r.h}, {"error", number_or_null(r.error)}, {"runtime_s", r.runtime_s}});
    return j;
}

RandomData random_data(const SpaceTimeLattice& lattice, std::mt19937_64& rng) {
    const Domain& dom = lattice.domain();
    const int n = dom.dim();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto in = [&](double a, double b) { return a + (b - a) * unit(rng); };
    auto point_in = [&](const Box& box) {
        Point c(n);
        for (int i = 0; i < n; ++i) c[i] = in(box.lo[i], box.hi[i]);
        return c;
    };
    const Box box = dom.bounds();

    std::vector<Expression> f_terms{Expression::constant(in(-0.5, 0.5))};
    double lf = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double a = in(-0.6, 0.6), w = in(0.2, 0.5), decay = in(0.0, 2.0);
        f_terms.push_back(Expression::bump(a, point_in(box), w, decay));
        lf += std::abs(a) / w + std::abs(a * decay);
    }
    const double b = in(0.3, 0.8), w = in(0.15, 0.4), rate = in(1.0, 4.0);
    Point centre(n);
    for (int i = 0; i < n; ++i) centre[i] = 0.5 * (box.lo[i] + box.hi[i]) + 0.25 * in(box.lo[i] - box.hi[i], box.hi[i] - box.lo[i]);
    std::vector<Expression> psi_terms{Expression::bump(b, centre, w), Expression::affine(Point(n), 0.0, rate)};

    RandomData d{BoundaryData::uniform(Expression::sum(f_terms), lf), Obstacle{Expression::sum(psi_terms), b / w + rate}};
    const GameParameters gp = make_parameters(2.0, n, lattice.eps(), lattice.horizon());
    Problem trial{gp, lattice.domain_ptr(), d.boundary, d.obstacle};
    const CompatibilityReport rep = validate_compatibility(trial, lattice);
    psi_terms.push_back(Expression::constant(-(rep.worst_gap + 0.02)));
    d.obstacle.psi = Expression::sum(psi_terms);
    return d;
}

double min_difference(const ValueField& a, const ValueField& b, NodeId* node, int* level) {
    const SpaceTimeLattice& lat = a.lattice();
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= lat.levels(); ++j)
        for (std::size_t i = 0; i < lat.node_count(); ++i) {
            if (lat.classes()[i] == NodeClass::Exterior) continue;
            const double d = a.at(static_cast<NodeId>(i), j) - b.at(static_cast<NodeId>(i), j);
            if (d < m) {
                m = d;
                if (node) *node = static_cast<NodeId>(i);
                if (level) *level = j;
            }
        }
    return m;
}

ComparisonReport comparison_test(const ComparisonSetup& setup, int instance_count, std::uint64_t seed,
                                 unsigned threads) {
    auto lattice = std::make_shared<const SpaceTimeLattice>(setup.domain, setup.h, setup.params.eps,
                                                            setup.params.horizon);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = setup.domain->dim();
    const Box box = setup.domain->bounds();
    // Negated bump, so adding it lowers the data.
    auto dip = [&] {
        Point c(n);
        for (int i = 0; i < n; ++i) c[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
        const double a = 0.5 * unit(rng), w = 0.2 + 0.3 * unit(rng), decay = 2.0 * unit(rng);
        return Expression::bump(-a, c, w, decay);
    };
    SolveOptions so;
    so.threads = threads;
    ComparisonReport report;
    report.worst_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < instance_count; ++k) {
        RandomData d = random_data(*lattice, rng);
        const Expression F1 = d.boundary.lateral;
        const Expression F2 = Expression::sum({F1, dip()});
        // psi1 <= F2 on the strip keeps both pairs compatible.
        Problem trial{setup.params, setup.domain, BoundaryData::uniform(F2, d.boundary.lipschitz), d.obstacle};
        const double shift = std::max(0.0, validate_compatibility(trial, *lattice).worst_gap);
        const Expression psi1 = Expression::sum({d.obstacle.psi, Expression::constant(-shift)});
        const Expression psi2 = Expression::sum({psi1, dip()});
        auto p1 = std::make_shared<const Problem>(Problem{setup.params, setup.domain,
                                                          BoundaryData::uniform(F1, d.boundary.lipschitz),
                                                          Obstacle{psi1, d.obstacle.lipschitz}});
        auto p2 = std::make_shared<const Problem>(Problem{setup.params, setup.domain,
                                                          BoundaryData::uniform(F2, d.boundary.lipschitz),
                                                          Obstacle{psi2, d.obstacle.lipschitz}});
        const ValueField u1 = solve_time_marching(p1, lattice, so);
        const ValueField u2 = solve_time_marching(p2, lattice, so);
        ComparisonCase c;
        c.margin = min_difference(u1, u2, &c.worst_node, &c.worst_level);
        c.passed = c.margin >= -1e-12;
        if (!c.passed) ++report.failures;
        report.worst_margin = std::min(report.worst_margin, c.margin);
        report.cases.push_back(c);
    }
    return report;
}

nlohmann::json to_json(const ComparisonReport& report) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["cases"] = report.cases.size();
    j["failures"] = report.failures;
    j["worst_margin"] = number_or_null(report.worst_margin);
    j["margins"] = nlohmann::json::array();
    for (const auto& c : report.cases) j["margins"].push_back(c.margin);
    return j;
}

std::string_view to_string(PairClass c) {
    switch (c) {
        case PairClass::InteriorInterior: return "interior-interior";
        case PairClass::InteriorStrip: return "interior-strip";
        case PairClass::InteriorInitial: return "interior-initial";
    }
    return "?";
}

ModulusReport modulus_report(const ValueField& u, ModulusOptions options) {
    const SpaceTimeLattice& lat = u.lattice();
    const Problem& prob = u.problem();
    const Domain& dom = lat.domain();
    const int n = lat.dim();
    const double eps = lat.eps();
    const Box outer = dom.bounding_box(eps);
    const Point anchor = dom.bounds().lo;

    // Sample grid x = anchor + k·dx covering Omega ∪ S_eps.
    std::array<std::int64_t, kMaxDim> k0{}, cnt{1, 1, 1};
    for (int i = 0; i < n; ++i) {
        k0[i] = static_cast<std::int64_t>(std::ceil((outer.lo[i] - anchor[i]) / options.dx - 1e-9));
        const auto k1 = static_cast<std::int64_t>(std::floor((outer.hi[i] - anchor[i]) / options.dx + 1e-9));
        cnt[i] = k1 - k0[i] + 1;
    }
    const std::size_t nx = static_cast<std::size_t>(cnt[0] * cnt[1] * cnt[2]);
    std::vector<Point> xs(nx);
    std::vector<NodeClass> cls(nx);
    for (std::size_t s = 0; s < nx; ++s) {
        auto rem = static_cast<std::int64_t>(s);
        Point x(n);
        for (int i = n - 1; i >= 0; --i) {
            x[i] = anchor[i] + static_cast<double>(k0[i] + rem % cnt[i]) * options.dx;
            rem /= cnt[i];
        }
        xs[s] = x;
        cls[s] = classify_node(dom, x, eps);
    }
    const double T = std::min(prob.params.horizon, lat.time(lat.levels()));
    const double step_t = 0.5 * eps * eps;
    std::vector<int> levels;
    for (int m = 1; m * options.dt <= T * (1.0 + 1e-12); ++m)
        levels.push_back(std::clamp(static_cast<int>(std::lround(m * options.dt / step_t)), 1, lat.levels()));
    const std::size_t nt = levels.size();

    // vals[tk][s]: tk = 0 is the initial slab, tk >= 1 the sampled levels.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> vals(nt + 1, std::vector<double>(nx, nan));
    std::vector<double> times(nt + 1, 0.0);
    for (std::size_t s = 0; s < nx; ++s)
        if (cls[s] == NodeClass::Interior) vals[0][s] = prob.boundary.initial(xs[s], 0.0);
    for (std::size_t tk = 1; tk <= nt; ++tk) {
        const int j = levels[tk - 1];
        times[tk] = lat.time(j);
        for (std::size_t s = 0; s < nx; ++s) {
            if (cls[s] == NodeClass::Interior) vals[tk][s] = u.evaluate(xs[s], j);
            else if (cls[s] == NodeClass::LateralStrip) vals[tk][s] = prob.boundary.lateral(xs[s], times[tk]);
        }
    }

    ModulusReport rep;
    rep.eps = eps;
    rep.classes = {{PairClass::InteriorInterior}, {PairClass::InteriorStrip}, {PairClass::InteriorInitial}};
    const auto wx = static_cast<std::int64_t>(std::floor(options.max_dx / options.dx + 1e-9));
    const auto wt = static_cast<std::int64_t>(std::floor(options.max_dt / options.dt + 1e-9));
    auto flat = [&](const std::array<std::int64_t, kMaxDim>& k) -> std::int64_t {
        std::int64_t id = 0;
        for (int i = 0; i < n; ++i) {
            if (k[i] < 0 || k[i] >= cnt[i]) return -1;
            id = id * cnt[i] + k[i];
        }
        return id;
    };
    for (std::size_t s = 0; s < nx; ++s) {
        if (cls[s] != NodeClass::Interior) continue;
        std::array<std::int64_t, kMaxDim> ks{};
        auto rem = static_cast<std::int64_t>(s);
        for (int i = n - 1; i >= 0; --i) {
            ks[i] = rem % cnt[i];
            rem /= cnt[i];
        }
        std::array<std::int64_t, kMaxDim> lo{}, hi{};
        for (int i = 0; i < kMaxDim; ++i) {
            lo[i] = i < n ? ks[i] - wx : 0;
            hi[i] = i < n ? ks[i] + wx : 0;
        }
        for (std::int64_t a = lo[0]; a <= hi[0]; ++a)
            for (std::int64_t b = lo[1]; b <= hi[1]; ++b)
                for (std::int64_t c = lo[2]; c <= hi[2]; ++c) {
                    const std::int64_t o = flat({a, b, c});
                    if (o < 0) continue;
                    const auto os = static_cast<std::size_t>(o);
                    if (cls[os] == NodeClass::Exterior) continue;
                    const double dxy = distance(xs[s], xs[os]);
                    if (dxy > options.max_dx * (1.0 + 1e-9)) continue;
                    for (std::size_t t1 = 1; t1 <= nt; ++t1) {
                        const double v1 = vals[t1][s];
                        if (cls[os] == NodeClass::Interior) {
                            // Initial slab partner.
                            if (times[t1] <= options.max_dt * (1.0 + 1e-9)) {
                                const double q = std::abs(v1 - vals[0][os]) / (dxy + std::sqrt(times[t1]));
                                auto& mc = rep.classes[2];
                                ++mc.pairs;
                                mc.max_quotient = std::max(mc.max_quotient, q);
                            }
                            // Interior partner; each unordered pair once.
                            for (std::size_t t2 = t1; t2 <= nt && static_cast<std::int64_t>(t2 - t1) <= wt; ++t2) {
                                if (t2 == t1 && os <= s) continue;
                                const double den = dxy + std::sqrt(std::abs(times[t2] - times[t1]));
                                if (den <= 0.0) continue;
                                auto& mc = rep.classes[0];
                                ++mc.pairs;
                                mc.max_quotient = std::max(mc.max_quotient, std::abs(v1 - vals[t2][os]) / den);
                            }
                        } else {
                            const std::size_t lo_t = t1 > static_cast<std::size_t>(wt) ? t1 - static_cast<std::size_t>(wt) : 1;
                            for (std::size_t t2 = lo_t; t2 <= nt && t2 <= t1 + static_cast<std::size_t>(wt); ++t2) {
                                const double den = dxy + std::sqrt(std::abs(times[t2] - times[t1]));
                                auto& mc = rep.classes[1];
                                ++mc.pairs;
                                mc.max_quotient = std::max(mc.max_quotient, std::abs(v1 - vals[t2][os]) / den);
                            }
                        }
                    }
                }
    }
    return rep;
}

bool ModulusTrend::bounded(double factor) const {
    return std::all_of(spread.begin(), spread.end(), [factor](double s) { return s <= factor; });
}

ModulusTrend modulus_trend(std::vector<ModulusReport> reports) {
    ModulusTrend tr;
    tr.reports = std::move(reports);
    for (std::size_t c = 0; c < 3; ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& r : tr.reports) {
            lo = std::min(lo, r.classes[c].max_quotient);
            hi = std::max(hi, r.classes[c].max_quotient);
        }
        if (tr.reports.empty() || hi == 0.0) tr.spread.push_back(1.0);
        else if (lo == 0.0) tr.spread.push_back(std::numeric_limits<double>::infinity());
        else tr.spread.push_back(hi / lo);
        double worst = 1.0;
        for (std::size_t k = 1; k < tr.reports.size(); ++k) {
            const double a = tr.reports[k - 1].classes[c].max_quotient, b = tr.reports[k].classes[c].max_quotient;
            if (a == 0.0 && b == 0.0) continue;
            worst = std::max(worst, (a == 0.0 || b == 0.0) ? std::numeric_limits<double>::infinity()
                                                             : std::max(a / b, b / a));
        }
        tr.successive.push_back(worst);
    }
    return tr;
}

nlohmann::json to_json(const ModulusTrend& trend) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["ladder"] = nlohmann::json::array();
    for (const auto& r : trend.reports) {
        nlohmann::json row{{"eps", r.eps}};
        for (const auto& c : r.classes)
            row[std::string(to_string(c.kind))] = {{"pairs", c.pairs}, {"max_quotient", c.max_quotient}};
        j["ladder"].push_back(row);
    }
    j["spread"] = nlohmann::json::object();
    j["successive_ratio"] = nlohmann::json::object();
    for (std::size_t c = 0; c < trend.spread.size(); ++c) {
        const std::string key(to_string(static_cast<PairClass>(c)));
        j["spread"][key] = number_or_null(trend.spread[c]);
        j["successive_ratio"][key] = number_or_null(trend.successive[c]);
    }
    return j;
}

}  // namespace tow
