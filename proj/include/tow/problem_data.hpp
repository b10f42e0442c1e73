#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tow/expression.hpp"
#include "tow/geometry.hpp"

namespace tow {

/// p, n, eps, T and the game weights alpha = (p-2)/(p+n), beta = 1 - alpha.
struct GameParameters {
    double p = 2.0;
    int n = 1;
    double eps = 0.1;
    double horizon = 1.0;
    double alpha = 0.0;
    double beta = 1.0;

    double level_time(int level) const { return 0.5 * eps * eps * level; }
};

GameParameters make_parameters(double p, int n, double eps, double horizon);

/// Data on the parabolic strip: `lateral` on S_eps × (-eps²/2, T], `initial`
/// on Omega × (-eps²/2, 0]. C1 bounds |F(x,s)-F(y,r)| / (|x-y| + |s-r|^½).
struct BoundaryData {
    Expression lateral;
    Expression initial;
    double lipschitz = 1.0;

    static BoundaryData uniform(Expression f, double lipschitz = 1.0) { return {f, f, lipschitz}; }
};

struct Obstacle {
    Expression psi;
    double lipschitz = 1.0;
};

/// Everything that defines one obstacle problem instance.
struct Problem {
    GameParameters params;
    std::shared_ptr<const Domain> domain;
    BoundaryData boundary;
    Obstacle obstacle;

    bool in_strip(const Point& x) const;
    /// F(x, t) with the lateral/initial branch chosen from the position of x.
    double boundary_value(const Point& x, double t) const;
    double obstacle_value(const Point& x, double t) const { return obstacle.psi(x, t); }
    /// Payoff G at time level j: F on the strip and on level 0, psi elsewhere.
    /// Throws OutOfDomain for points beyond the strip.
    double payoff(const Point& x, int level) const;
};

struct CompatibilityReport {
    bool compatible = true;
    NodeId worst_node = -1;
    int worst_level = -1;
    double worst_gap = 0.0;  // max of psi - F over sampled Gamma (<= 1e-12 when compatible)
    double observed_lipschitz_boundary = 0.0;
    double observed_lipschitz_obstacle = 0.0;
    std::vector<std::string> warnings;
};

/// Checks psi <= F on the sampled parabolic strip and measures empirical
/// Lipschitz quotients over lattice-neighbour pairs.
CompatibilityReport validate_compatibility(const Problem& problem, const SpaceTimeLattice& lattice);

/// Throws Incompatible if the report failed.
void ensure_compatible(const CompatibilityReport& report);

}  // namespace tow
