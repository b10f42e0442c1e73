#include "tow/problem_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tow {

GameParameters make_parameters(double p, int n, double eps, double horizon) {
    if (!(p >= 2.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidParameter, "p >= 2 required");
    if (n < 1 || n > kMaxDim) throw Error(ErrorCode::InvalidParameter, "dimension 1 <= n <= 3 required");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::InvalidParameter, "eps > 0 required");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw Error(ErrorCode::InvalidParameter, "horizon T > 0 required");
    GameParameters g;
    g.p = p;
    g.n = n;
    g.eps = eps;
    g.horizon = horizon;
    g.alpha = (p - 2.0) / (p + n);
    g.beta = 1.0 - g.alpha;
    return g;
}

bool Problem::in_strip(const Point& x) const {
    return domain->signed_distance(x) >= -1e-12 * params.eps;
}

double Problem::boundary_value(const Point& x, double t) const {
    return in_strip(x) ? boundary.lateral(x, t) : boundary.initial(x, t);
}

double Problem::payoff(const Point& x, int level) const {
    const NodeClass c = classify_node(*domain, x, params.eps);
    if (c == NodeClass::Exterior) throw Error(ErrorCode::OutOfDomain, "payoff requested outside Omega ∪ S_eps");
    const double t = params.level_time(level);
    if (c == NodeClass::LateralStrip) return boundary.lateral(x, t);
    if (level <= 0) return boundary.initial(x, t);
    return obstacle.psi(x, t);
}

CompatibilityReport validate_compatibility(const Problem& problem, const SpaceTimeLattice& lattice) {
    CompatibilityReport rep;
    rep.worst_gap = -std::numeric_limits<double>::infinity();
    const int levels = lattice.levels();
    const std::size_t count = lattice.node_count();
    const int dim = lattice.dim();
    const double h = lattice.h();
    const double dt = lattice.time(1);

    auto note_gap = [&](NodeId id, int level, double gap) {
        if (gap > rep.worst_gap) {
            rep.worst_gap = gap;
            rep.worst_node = id;
            rep.worst_level = level;
        }
    };

    // F on Gamma and psi everywhere, one level at a time.
    std::vector<double> f_prev, f_cur(count, std::nan("")), psi_prev, psi_cur(count, std::nan(""));
    for (int j = 0; j <= levels; ++j) {
        const double t = lattice.time(j);
        std::fill(f_cur.begin(), f_cur.end(), std::nan(""));
        std::fill(psi_cur.begin(), psi_cur.end(), std::nan(""));
        for (std::size_t i = 0; i < count; ++i) {
            const NodeClass c = lattice.classes()[i];
            if (c == NodeClass::Exterior) continue;
            const Point x = lattice.coordinate(static_cast<NodeId>(i));
            psi_cur[i] = problem.obstacle.psi(x, t);
            if (c == NodeClass::LateralStrip) f_cur[i] = problem.boundary.lateral(x, t);
            else if (j == 0) f_cur[i] = problem.boundary.initial(x, t);
            if (!std::isnan(f_cur[i])) note_gap(static_cast<NodeId>(i), j, psi_cur[i] - f_cur[i]);
        }
        // Spatial neighbour quotients at this level.
        for (std::size_t i = 0; i < count; ++i) {
            if (lattice.classes()[i] == NodeClass::Exterior) continue;
            auto idx = lattice.node_index(static_cast<NodeId>(i));
            for (int a = 0; a < dim; ++a) {
                auto nb = idx;
                ++nb[a];
                const NodeId k = lattice.node_id(nb);
                if (k < 0) continue;
                const auto ks = static_cast<std::size_t>(k);
                if (!std::isnan(psi_cur[ks]))
                    rep.observed_lipschitz_obstacle =
                        std::max(rep.observed_lipschitz_obstacle, std::abs(psi_cur[ks] - psi_cur[i]) / h);
                if (!std::isnan(f_cur[i]) && !std::isnan(f_cur[ks]) &&
                    lattice.classes()[i] == lattice.classes()[ks])
                    rep.observed_lipschitz_boundary =
                        std::max(rep.observed_lipschitz_boundary, std::abs(f_cur[ks] - f_cur[i]) / h);
            }
        }
        // Temporal neighbour quotients.
        if (j > 0) {
            const double denom = std::sqrt(dt);
            for (std::size_t i = 0; i < count; ++i) {
                if (!std::isnan(psi_cur[i]) && !std::isnan(psi_prev[i]))
                    rep.observed_lipschitz_obstacle =
                        std::max(rep.observed_lipschitz_obstacle, std::abs(psi_cur[i] - psi_prev[i]) / denom);
                if (!std::isnan(f_cur[i]) && !std::isnan(f_prev[i]))
                    rep.observed_lipschitz_boundary =
                        std::max(rep.observed_lipschitz_boundary, std::abs(f_cur[i] - f_prev[i]) / denom);
            }
        }
        std::swap(f_prev, f_cur);
        std::swap(psi_prev, psi_cur);
        if (f_cur.size() != count) f_cur.assign(count, std::nan(""));
        if (psi_cur.size() != count) psi_cur.assign(count, std::nan(""));
    }

    // Slack absorbs round-off in data evaluated exactly on the boundary.
    rep.compatible = !(rep.worst_gap > 1e-12);
    if (rep.observed_lipschitz_boundary > problem.boundary.lipschitz * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "boundary data quotient " << rep.observed_lipschitz_boundary << " exceeds C1 = "
           << problem.boundary.lipschitz;
        rep.warnings.push_back(os.str());
    }
    if (rep.observed_lipschitz_obstacle > problem.obstacle.lipschitz * (1.0 + 1e-9)) {
        std::ostringstream os;
        os << "obstacle quotient " << rep.observed_lipschitz_obstacle << " exceeds C2 = "
           << problem.obstacle.lipschitz;
        rep.warnings.push_back(os.str());
    }
    return rep;
}

void ensure_compatible(const CompatibilityReport& report) {
    if (report.compatible) return;
    std::ostringstream os;
    os << "psi exceeds F by " << report.worst_gap << " at node " << report.worst_node << ", level "
       << report.worst_level;
    throw Error(ErrorCode::Incompatible, os.str());
}

}  // namespace tow
