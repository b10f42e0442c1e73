#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tow/geometry.hpp"
#include "tow/problem_data.hpp"

namespace tow {

/// u^eps sampled on the lattice: one layer per time level 0..M. Exterior
/// nodes hold NaN.
class ValueField {
public:
    ValueField(std::shared_ptr<const SpaceTimeLattice> lattice, std::shared_ptr<const Problem> problem);

    const SpaceTimeLattice& lattice() const { return *lattice_; }
    const Problem& problem() const { return *problem_; }
    std::shared_ptr<const SpaceTimeLattice> lattice_ptr() const { return lattice_; }
    std::shared_ptr<const Problem> problem_ptr() const { return problem_; }

    int levels() const { return lattice_->levels(); }
    std::span<const double> level(int j) const;
    std::span<double> level(int j);
    double at(NodeId node, int j) const { return level(j)[static_cast<std::size_t>(node)]; }
    double& at(NodeId node, int j) { return level(j)[static_cast<std::size_t>(node)]; }
    std::span<const double> raw() const { return values_; }
    std::span<double> raw() { return values_; }

    /// Continuous extension used by the game: F on the strip, F_initial on
    /// level 0, multilinear interpolation of the nodal values inside Omega.
    double evaluate(const Point& x, int j) const;
    /// Interpolated obstacle gap u - psi at a point inside Omega (level >= 1).
    double obstacle_gap(const Point& x, int j) const;

    double max_abs_obstacle() const;
    double default_contact_tol() const { return 1e-9 * (1.0 + max_abs_obstacle()); }

private:
    std::shared_ptr<const SpaceTimeLattice> lattice_;
    std::shared_ptr<const Problem> problem_;
    std::vector<double> values_;
};

/// The pieces of one operator application.
struct OperatorTerms {
    double sup = 0.0;
    double inf = 0.0;
    double mean = 0.0;
    double obstacle = 0.0;
    double averaged = 0.0;  // (alpha/2)(sup+inf) + beta·mean
    double value = 0.0;     // max(obstacle, averaged)
};

/// One application of the DPP operator at an interior node x, reading the
/// previous level `prev` (values at level j-1 for every stencil member).
OperatorTerms dpp_terms(const Problem& problem, const SpaceTimeLattice& lattice,
                        std::span<const double> prev, NodeId x, int j);
double dpp_apply(const Problem& problem, const SpaceTimeLattice& lattice,
                 std::span<const double> prev, NodeId x, int j);

struct SolveOptions {
    unsigned threads = 1;  // 0 = hardware concurrency
};

/// Level-by-level solve: level 0 and the strip from F, levels 1..M by the operator.
ValueField solve_time_marching(std::shared_ptr<const Problem> problem,
                               std::shared_ptr<const SpaceTimeLattice> lattice,
                               SolveOptions options = {});

struct FixedPointResult {
    ValueField field;
    int iterations = 0;
};

/// Global iteration u_{k+1} = T u_k from u_0 = psi (interior) / F (strip),
/// stopped once no value moves by more than 1e-14. Throws NonStabilizing
/// past M+1 iterations.
FixedPointResult solve_fixed_point(std::shared_ptr<const Problem> problem,
                                   std::shared_ptr<const SpaceTimeLattice> lattice, int max_iters = -1,
                                   SolveOptions options = {});

/// max over interior nodes and levels >= 1 of |u - T u|.
double residual(const ValueField& u);

struct ContactPoint {
    NodeId node;
    int level;
};
std::vector<ContactPoint> contact_set(const ValueField& u, double contact_tol);

struct ProbeRow {
    double eps = 0.0;
    double h = 0.0;
    double scaled_residual = 0.0;  // s(eps)
    bool degenerate = false;       // gradient vanishes at the probe point
    double target = 0.0;           // gradient branch
    double gap = 0.0;              // |s - target|
    double relative_gap = 0.0;
    double bracket_lo = 0.0;       // degenerate branch
    double bracket_hi = 0.0;
    double extremal_target = 0.0;  // limit of s from the exact ball extrema
    bool in_bracket = false;
};

enum class ProbeBranch { Auto, Gradient, Degenerate };

/// Evaluates s(eps) = (T_eps phi - phi)(x,t) / (eps²/(2(n+p))) on a local
/// lattice of spacing eps/h_ratio around x, for each eps in the ladder, and
/// compares it with (p-2)Δ∞phi + Δphi - (n+p)phi_t.
std::vector<ProbeRow> consistency_probe(const GameParameters& params, const Expression& phi,
                                        const Point& x, double t, std::span<const double> eps_ladder,
                                        double h_ratio = 8.0, ProbeBranch branch = ProbeBranch::Auto);

}  // namespace tow
