#include "tow/dpp_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "tow/parallel.hpp"

namespace tow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pairing(const Problem& problem, const SpaceTimeLattice& lattice) {
    if (problem.params.eps != lattice.eps())
        throw Error(ErrorCode::InvalidParameter, "problem eps and lattice eps differ");
    if (problem.params.n != lattice.dim())
        throw Error(ErrorCode::InvalidParameter, "problem dimension and lattice dimension differ");
}

void fill_boundary(ValueField& u, const Problem& problem) {
    const SpaceTimeLattice& lat = u.lattice();
    auto level0 = u.level(0);
    for (std::size_t i = 0; i < lat.node_count(); ++i) {
        const NodeClass c = lat.classes()[i];
        if (c == NodeClass::Exterior) continue;
        const Point x = lat.coordinate(static_cast<NodeId>(i));
        level0[i] = c == NodeClass::LateralStrip ? problem.boundary.lateral(x, 0.0)
                                                 : problem.boundary.initial(x, 0.0);
    }
    for (int j = 1; j <= lat.levels(); ++j) {
        auto lv = u.level(j);
        const double t = lat.time(j);
        for (NodeId id : lat.strip_nodes())
            lv[static_cast<std::size_t>(id)] = problem.boundary.lateral(lat.coordinate(id), t);
    }
}

}  // namespace

ValueField::ValueField(std::shared_ptr<const SpaceTimeLattice> lattice, std::shared_ptr<const Problem> problem)
    : lattice_(std::move(lattice)), problem_(std::move(problem)) {
    values_.assign(lattice_->node_count() * static_cast<std::size_t>(lattice_->levels() + 1), kNaN);
}

std::span<const double> ValueField::level(int j) const {
    const std::size_t n = lattice_->node_count();
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(j) * n, n);
}

std::span<double> ValueField::level(int j) {
    const std::size_t n = lattice_->node_count();
    return std::span<double>(values_).subspan(static_cast<std::size_t>(j) * n, n);
}

double ValueField::evaluate(const Point& x, int j) const {
    const double t = lattice_->time(j);
    if (problem_->in_strip(x)) return problem_->boundary.lateral(x, t);
    if (j <= 0) return problem_->boundary.initial(x, t);
    NodeId base = -1;
    std::array<double, kMaxDim> frac{};
    if (lattice_->locate(x, base, frac) && lattice_->interpolation_cell_valid(base))
        return lattice_->interpolate(level(j), base, frac);
    return at(lattice_->nearest_node(x), j);
}

double ValueField::obstacle_gap(const Point& x, int j) const {
    const double t = lattice_->time(j);
    NodeId base = -1;
    std::array<double, kMaxDim> frac{};
    if (!lattice_->locate(x, base, frac) || !lattice_->interpolation_cell_valid(base)) {
        const NodeId k = lattice_->nearest_node(x);
        return at(k, j) - problem_->obstacle.psi(lattice_->coordinate(k), t);
    }
    const int dim = lattice_->dim();
    const auto stride_probe = lattice_->node_index(base);
    double acc = 0.0;
    for (int m = 0; m < (1 << dim); ++m) {
        double w = 1.0;
        auto idx = stride_probe;
        for (int i = 0; i < dim; ++i) {
            if (m & (1 << i)) {
                w *= frac[i];
                ++idx[i];
            } else {
                w *= 1.0 - frac[i];
            }
        }
        if (w == 0.0) continue;
        const NodeId c = lattice_->node_id(idx);
        acc += w * (at(c, j) - problem_->obstacle.psi(lattice_->coordinate(c), t));
    }
    return acc;
}

double ValueField::max_abs_obstacle() const {
    double m = 0.0;
    for (int j = 1; j <= levels(); ++j) {
        const double t = lattice_->time(j);
        for (NodeId id : lattice_->interior_nodes())
            m = std::max(m, std::abs(problem_->obstacle.psi(lattice_->coordinate(id), t)));
    }
    return m;
}

OperatorTerms dpp_terms(const Problem& problem, const SpaceTimeLattice& lattice, std::span<const double> prev,
                        NodeId x, int j) {
    const auto st = lattice.stencil(x);
    OperatorTerms out;
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k) {
        const double v = prev[static_cast<std::size_t>(st.member(k))];
        hi = std::max(hi, v);
        lo = std::min(lo, v);
        mean += st.weights[k] * v;
    }
    const auto rims = lattice.rim_samples(x);
    if (!rims.empty()) {
        const Point xc = lattice.coordinate(x);
        const double eps = lattice.eps();
        const double t_prev = lattice.time(j - 1);
        const auto dirs = lattice.rim_directions();
        for (std::size_t k = 0; k < rims.size(); ++k) {
            const RimSample& r = rims[k];
            double v;
            if (r.cell_base == RimSample::kInvalid) continue;
            if (r.cell_base == RimSample::kStrip) {
                v = problem.boundary.lateral(xc + eps * dirs[k], t_prev);
            } else if (j - 1 == 0) {
                v = problem.boundary.initial(xc + eps * dirs[k], t_prev);
            } else {
                v = lattice.interpolate(prev, r.cell_base, r.frac);
            }
            hi = std::max(hi, v);
            lo = std::min(lo, v);
        }
    }
    const double alpha = problem.params.alpha;
    const double beta = problem.params.beta;
    out.sup = hi;
    out.inf = lo;
    out.mean = mean;
    out.averaged = 0.5 * alpha * (hi + lo) + beta * mean;
    out.obstacle = problem.obstacle.psi(lattice.coordinate(x), lattice.time(j));
    out.value = std::max(out.obstacle, out.averaged);
    return out;
}

double dpp_apply(const Problem& problem, const SpaceTimeLattice& lattice, std::span<const double> prev, NodeId x,
                 int j) {
    return dpp_terms(problem, lattice, prev, x, j).value;
}

ValueField solve_time_marching(std::shared_ptr<const Problem> problem,
                               std::shared_ptr<const SpaceTimeLattice> lattice, SolveOptions options) {
    check_pairing(*problem, *lattice);
    ensure_compatible(validate_compatibility(*problem, *lattice));
    ValueField u(lattice, problem);
    fill_boundary(u, *problem);
    const auto interior = lattice->interior_nodes();
    const unsigned threads = resolve_threads(options.threads);
    for (int j = 1; j <= lattice->levels(); ++j) {
        const auto prev = std::as_const(u).level(j - 1);
        auto cur = u.level(j);
        parallel_for(interior.size(), threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t s = b; s < e; ++s)
                cur[static_cast<std::size_t>(interior[s])] = dpp_apply(*problem, *lattice, prev, interior[s], j);
        });
    }
    return u;
}

FixedPointResult solve_fixed_point(std::shared_ptr<const Problem> problem,
                                   std::shared_ptr<const SpaceTimeLattice> lattice, int max_iters,
                                   SolveOptions options) {
    check_pairing(*problem, *lattice);
    ensure_compatible(validate_compatibility(*problem, *lattice));
    const int levels = lattice->levels();
    if (max_iters < 0) max_iters = levels + 1;
    ValueField u(lattice, problem);
    fill_boundary(u, *problem);
    const auto interior = lattice->interior_nodes();
    for (int j = 1; j <= levels; ++j) {
        auto lv = u.level(j);
        const double t = lattice->time(j);
        for (NodeId id : interior)
            lv[static_cast<std::size_t>(id)] = problem->obstacle.psi(lattice->coordinate(id), t);
    }
    const unsigned threads = resolve_threads(options.threads);
    ValueField next = u;
    for (int it = 1; it <= max_iters; ++it) {
        double change = 0.0;
        for (int j = 1; j <= levels; ++j) {
            const auto prev = std::as_const(u).level(j - 1);
            auto cur = next.level(j);
            std::vector<double> chunk_change(interior.size(), 0.0);
            parallel_for(interior.size(), threads, [&](std::size_t b, std::size_t e) {
                for (std::size_t s = b; s < e; ++s) {
                    const auto i = static_cast<std::size_t>(interior[s]);
                    cur[i] = dpp_apply(*problem, *lattice, prev, interior[s], j);
                    chunk_change[s] = std::abs(cur[i] - u.at(interior[s], j));
                }
            });
            for (double c : chunk_change) change = std::max(change, c);
        }
        std::swap(u, next);
        if (change <= 1e-14) return {std::move(u), it};
    }
    throw Error(ErrorCode::NonStabilizing,
                "fixed-point iteration did not stabilise within " + std::to_string(max_iters) + " iterations");
}

double residual(const ValueField& u) {
    const SpaceTimeLattice& lat = u.lattice();
    double r = 0.0;
    for (int j = 1; j <= lat.levels(); ++j) {
        const auto prev = u.level(j - 1);
        for (NodeId id : lat.interior_nodes())
            r = std::max(r, std::abs(u.at(id, j) - dpp_apply(u.problem(), lat, prev, id, j)));
    }
    return r;
}

std::vector<ContactPoint> contact_set(const ValueField& u, double contact_tol) {
    const SpaceTimeLattice& lat = u.lattice();
    std::vector<ContactPoint> out;
    for (int j = 1; j <= lat.levels(); ++j) {
        const double t = lat.time(j);
        for (NodeId id : lat.interior_nodes()) {
            const double gap = u.at(id, j) - u.problem().obstacle.psi(lat.coordinate(id), t);
            if (gap <= contact_tol) out.push_back({id, j});
        }
    }
    return out;
}

std::vector<ProbeRow> consistency_probe(const GameParameters& params, const Expression& phi, const Point& x,
                                        double t, std::span<const double> eps_ladder, double h_ratio,
                                        ProbeBranch branch) {
    const int n = params.n;
    if (x.dim != n) throw Error(ErrorCode::InvalidParameter, "probe point dimension differs from n");
    if (!phi.differentiable())
        throw Error(ErrorCode::InvalidParameter, "probe function must be smooth (no max/min)");

    const Point grad = phi.gradient(x, t);
    const Matrix3 hess = phi.hessian(x, t);
    const double phi_t = phi.time_derivative(x, t);
    double lap = 0.0;
    for (int i = 0; i < n; ++i) lap += hess[i][i];
    const double gnorm = norm(grad);
    const bool critical = gnorm <= 1e-12 * (1.0 + std::abs(phi(x, t)));
    if (branch == ProbeBranch::Gradient && critical)
        throw Error(ErrorCode::DegenerateGradient, "gradient branch requested at a critical point");
    const bool degenerate = branch == ProbeBranch::Degenerate || (branch == ProbeBranch::Auto && critical);

    Eigen::MatrixXd hm(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) hm(i, k) = hess[i][k];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    double inf_lap = 0.0;
    if (!critical) {
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) inf_lap += grad[i] * hess[i][k] * grad[k];
        inf_lap /= gnorm * gnorm;
    }
    const double pm2 = params.p - 2.0;
    const double time_term = (n + params.p) * phi_t;

    std::vector<ProbeRow> rows;
    for (double eps : eps_ladder) {
        const GameParameters gp = make_parameters(params.p, n, eps, eps * eps);
        const double h = eps / h_ratio;
        Point lo = x, hi = x;
        for (int i = 0; i < n; ++i) {
            lo[i] -= eps + 2.0 * h;
            hi[i] += eps + 2.0 * h;
        }
        auto domain = std::make_shared<const Domain>(Domain::box(lo, hi));
        LatticeOptions opts;
        opts.anchor = x;
        opts.has_anchor = true;
        opts.enforce_resolution_floor = false;
        auto lattice = std::make_shared<const SpaceTimeLattice>(domain, h, eps, gp.horizon, opts);
        Problem local{gp, domain, BoundaryData::uniform(phi), Obstacle{Expression::constant(-1e300), 1.0}};

        const double t_prev = t - 0.5 * eps * eps;
        std::vector<double> prev(lattice->node_count(), kNaN);
        for (std::size_t i = 0; i < prev.size(); ++i)
            if (lattice->classes()[i] != NodeClass::Exterior)
                prev[i] = phi(lattice->coordinate(static_cast<NodeId>(i)), t_prev);
        const NodeId center = lattice->nearest_node(x);
        // Level 2 keeps the rim on the interpolated path, as in a solve.
        const OperatorTerms terms = dpp_terms(local, *lattice, prev, center, 2);

        ProbeRow row;
        row.eps = eps;
        row.h = h;
        row.scaled_residual = (terms.averaged - phi(x, t)) / (eps * eps / (2.0 * (n + params.p)));
        row.degenerate = degenerate;
        row.bracket_lo = pm2 * lmin + lap - time_term;
        row.bracket_hi = pm2 * lmax + lap - time_term;
        row.extremal_target = 0.5 * pm2 * (std::max(lmax, 0.0) + std::min(lmin, 0.0)) + lap - time_term;
        row.in_bracket = row.scaled_residual >= row.bracket_lo - 1e-9 * (1.0 + std::abs(row.bracket_lo)) &&
                         row.scaled_residual <= row.bracket_hi + 1e-9 * (1.0 + std::abs(row.bracket_hi));
        row.target = degenerate ? row.extremal_target : pm2 * inf_lap + lap - time_term;
        row.gap = std::abs(row.scaled_residual - row.target);
        row.relative_gap = row.gap / std::max(std::abs(row.target), 1e-300);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tow
