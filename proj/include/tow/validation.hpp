#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tow/dpp_solver.hpp"

namespace tow {

/// Projected explicit-Euler solution of (n+2)u_t = u_xx, u >= psi on a 1D
/// interval, stored as snapshots on a uniform time grid.
struct ReferenceSolution {
    double x_lo = 0.0;
    double x_hi = 1.0;
    double h = 0.0;
    double dt = 0.0;              // Euler step
    double snapshot_dt = 0.0;     // spacing of stored layers
    double horizon = 0.0;
    double diffusivity = 1.0 / 3.0;
    std::string projection = "u <- max(u, psi) after every Euler step";
    std::vector<std::vector<double>> snapshots;  // snapshots[k][i] at t = k·snapshot_dt, x = x_lo + i·h

    std::size_t points() const { return snapshots.empty() ? 0 : snapshots.front().size(); }
    /// Linear in x and t between stored values.
    double value(double x, double t) const;
};

struct ReferenceOptions {
    double dt = -1.0;           // negative picks 0.9 of the stability limit
    double snapshot_dt = -1.0;  // negative picks T/1000
};

/// Throws CFLViolation when dt·(2/h²)/(n+2) > 1 and InvalidParameter for a
/// non-interval domain.
ReferenceSolution fd_obstacle_reference(const BoundaryData& F, const Obstacle& psi, const Domain& domain,
                                        double h_ref, double horizon, ReferenceOptions options = {});

/// max |u - ref| over interior nodes at levels with 0.1·T <= t_j <= T.
/// Throws InvalidParameter unless ref.h <= h/4.
double linf_error(const ValueField& u, const ReferenceSolution& ref);

/// A full problem description minus eps, for ladder studies.
struct Instance {
    std::string name;
    double p = 2.0;
    double horizon = 1.0;
    std::shared_ptr<const Domain> domain;
    BoundaryData boundary;
    Obstacle obstacle;
    double h_ratio = 8.0;

    std::shared_ptr<const Problem> problem(double eps) const;
    std::shared_ptr<const SpaceTimeLattice> lattice(double eps) const;
};

/// Omega = (0,1), F_initial = sin(pi x), zero lateral data, T = 0.25, p = 2.
/// The obstacle is psi = -10, or 0.6 sin(pi x) when `active_obstacle`.
Instance sine_instance(bool active_obstacle = false);

enum class Verdict { Monotone, Violation, NotApplicable };
std::string_view to_string(Verdict v);

struct ConvergenceRow {
    double eps = 0.0;
    double h = 0.0;
    double error = 0.0;
    double runtime_s = 0.0;
};

struct ConvergenceTable {
    std::string instance;
    std::vector<ConvergenceRow> rows;  // decreasing eps
    Verdict verdict = Verdict::NotApplicable;
    int violation = -1;  // rows[violation+1].error >= rows[violation].error
    double reference_h = 0.0;
    std::string note;
};

struct StudyOptions {
    unsigned threads = 1;
    double reference_h = 1.0 / 400.0;  // refined further if above min h / 4
};

/// Throws InvalidParameter unless eps_list is strictly decreasing.
ConvergenceTable convergence_study(const Instance& instance, std::span<const double> eps_list,
                                   StudyOptions options = {});

void write_csv(std::ostream& os, const ConvergenceTable& table);
nlohmann::json to_json(const ConvergenceTable& table);

/// Random smooth data from bump sums, shifted so that psi <= F on the
/// sampled parabolic strip of `lattice`.
struct RandomData {
    BoundaryData boundary;
    Obstacle obstacle;
};
RandomData random_data(const SpaceTimeLattice& lattice, std::mt19937_64& rng);

struct ComparisonSetup {
    GameParameters params;
    std::shared_ptr<const Domain> domain;
    double h = 0.0;
};

struct ComparisonCase {
    double margin = 0.0;  // min over nodes of u1 - u2
    NodeId worst_node = -1;
    int worst_level = -1;
    bool passed = true;
};

struct ComparisonReport {
    std::vector<ComparisonCase> cases;
    double worst_margin = 0.0;
    std::size_t failures = 0;
    bool passed() const { return failures == 0; }
};

/// Solves `instance_count` ordered pairs F1 >= F2, psi1 >= psi2 and checks
/// u1 >= u2 - 1e-12 everywhere. Failures are reported, not thrown.
ComparisonReport comparison_test(const ComparisonSetup& setup, int instance_count, std::uint64_t seed,
                                 unsigned threads = 1);

/// min over non-exterior nodes and levels of (a - b).
double min_difference(const ValueField& a, const ValueField& b, NodeId* node = nullptr, int* level = nullptr);

enum class PairClass { InteriorInterior, InteriorStrip, InteriorInitial };
std::string_view to_string(PairClass c);

struct ModulusClass {
    PairClass kind = PairClass::InteriorInterior;
    std::size_t pairs = 0;
    double max_quotient = 0.0;
};

struct ModulusOptions {
    double dx = 0.025;       // spacing of the physical sample grid
    double dt = 0.02;
    double max_dx = 0.1;     // pair window
    double max_dt = 0.08;
};

struct ModulusReport {
    double eps = 0.0;
    std::vector<ModulusClass> classes;  // indexed by PairClass
};

/// |u(x,t) - u(y,s)| / (|x-y| + |t-s|^½) over pairs of a fixed physical
/// sample grid, split by the class of the second point.
ModulusReport modulus_report(const ValueField& u, ModulusOptions options = {});

struct ModulusTrend {
    std::vector<ModulusReport> reports;
    std::vector<double> spread;      // per class: max / min of max_quotient over the ladder
    std::vector<double> successive;  // per class: largest ratio between neighbouring ladder entries
    /// Every class has spread <= factor.
    bool bounded(double factor = 1.5) const;
};

ModulusTrend modulus_trend(std::vector<ModulusReport> reports);

nlohmann::json to_json(const ModulusTrend& trend);
nlohmann::json to_json(const ComparisonReport& report);

}  // namespace tow
