#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tow/dpp_solver.hpp"
#include "tow/problem_data.hpp"

namespace tow {

/// Per-episode random stream. Episode i of a run seeded with s always sees
/// the same draws, whatever order episodes are executed in.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    static Rng for_episode(std::uint64_t seed, std::uint64_t episode);

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Uniform point of the open ball B_eps(x), by rejection from the cube.
Point sample_ball(const Point& x, double eps, Rng& rng);

enum class Player { I, II };
enum class Branch : std::uint8_t { CoinI, CoinII, Noise };
enum class StopReason : std::uint8_t { None, Strip, InitialSlab, PlayerIStop, Horizon };

std::string_view to_string(Branch b);
std::string_view to_string(StopReason r);

struct GameState {
    Point x;
    int level = 0;
    int step = 0;
    std::vector<Point> history;  // x_0 .. x_{k-1}
    bool absorbed = false;
};

/// Deterministic rule (history, state) -> next position in the open ball.
class Strategy {
public:
    enum class Kind { Stationary, PullToward, PullAway, ValueGreedy };
    using Rule = std::function<Point(const GameState&)>;

    Strategy(Kind kind, Rule rule, std::string label);
    static Strategy stationary();

    Kind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    Point operator()(const GameState& s) const { return rule_(s); }

private:
    Kind kind_;
    Rule rule_;
    std::string label_;
};

std::string_view to_string(Strategy::Kind k);

/// x + (eps - eps³)·unit(z - x) while x is in Omega; x itself on S_eps or at z.
Strategy pull_strategy(std::shared_ptr<const Problem> problem, const Point& z);
/// Mirror image of pull_strategy: moves (eps - eps³) directly away from z.
Strategy push_strategy(std::shared_ptr<const Problem> problem, const Point& z);

struct GreedyOptions {
    double eta = 1e-3;
    int extra_samples = 16;
    std::uint64_t sample_seed = 0x5eed;
};

/// Arg-max (player I) or arg-min (player II) of the interpolated field at
/// level j-1 over: lattice nodes inside B_eps(x), near-rim points
/// x + eps(1-1e-6)·d for the lattice rim directions d, and a fixed set of
/// extra uniform offsets. Ties go to the first candidate.
Strategy value_greedy_strategy(std::shared_ptr<const ValueField> u, Player player, GreedyOptions options = {});

class StoppingRule {
public:
    enum class Kind { BoundaryOnly, ContactOrBoundary, FixedHorizon };

    static StoppingRule boundary_only();
    /// Player I stops once the interpolated gap u - psi is at most `tol`
    /// (negative tol selects the field's default).
    static StoppingRule contact_or_boundary(std::shared_ptr<const ValueField> u, double tol = -1.0);
    /// Stops after `steps` moves.
    static StoppingRule fixed_horizon(int steps);

    Kind kind() const { return kind_; }
    double contact_tol() const { return tol_; }
    int horizon_steps() const { return steps_; }
    /// Reason the rule fires at a non-absorbed state, or None.
    StopReason fires(const GameState& s) const;

private:
    Kind kind_ = Kind::BoundaryOnly;
    std::shared_ptr<const ValueField> field_;
    double tol_ = 0.0;
    int steps_ = 0;
};

std::string_view to_string(StoppingRule::Kind k);

struct PathPoint {
    Point x;
    int level = 0;
};

struct EpisodeRecord {
    std::uint64_t index = 0;
    std::vector<PathPoint> path;  // x_0 .. x_tau
    std::vector<Branch> branches;  // one per move
    int tau = 0;
    double payoff = 0.0;
    StopReason reason = StopReason::None;
};

/// One move from a non-absorbed state. Only the winning player's strategy
/// is consulted. Throws IllegalMove if it leaves the open ball.
GameState step(const Problem& problem, const GameState& state, const Strategy& sigma_I,
               const Strategy& sigma_II, Rng& rng, Branch* branch = nullptr);

EpisodeRecord run_episode(const Problem& problem, const Point& x0, int j0, const Strategy& sigma_I,
                          const Strategy& sigma_II, const StoppingRule& rule, Rng& rng);

struct MCEstimate {
    std::size_t episodes = 0;
    double mean = 0.0;
    double stderr_ = 0.0;  // sample stddev / sqrt(count)
    std::uint64_t seed = 0;
};

struct EstimateOptions {
    unsigned threads = 1;
    bool keep_records = false;
};

struct EstimateResult {
    MCEstimate estimate;
    std::vector<EpisodeRecord> records;  // filled when keep_records
};

EstimateResult estimate_value(const Problem& problem, const Point& x0, int j0, const Strategy& sigma_I,
                              const Strategy& sigma_II, const StoppingRule& rule, std::size_t episodes,
                              std::uint64_t seed, EstimateOptions options = {});

/// Simulates `episodes` episodes and returns them all.
std::vector<EpisodeRecord> simulate_episodes(const Problem& problem, const Point& x0, int j0,
                                             const Strategy& sigma_I, const Strategy& sigma_II,
                                             const StoppingRule& rule, std::size_t episodes,
                                             std::uint64_t seed, unsigned threads = 1);

struct BranchCounts {
    std::size_t coin_I = 0;
    std::size_t coin_II = 0;
    std::size_t noise = 0;
    std::size_t total() const { return coin_I + coin_II + noise; }
    /// Largest |count - expected| / binomial sd over the three branches.
    double max_z(double alpha) const;
};

BranchCounts count_branches(std::span<const EpisodeRecord> episodes);

struct DriftRow {
    int step = 0;  // drift of the move from x_{step-1} to x_step
    std::size_t active = 0;
    double mean = 0.0;  // E[|x_k - z| - |x_{k-1} - z|]
    double stderr_ = 0.0;
    double conditional_mean = 0.0;  // same expectation, integrated over the move law
    double conditional_stderr = 0.0;
    double sq_mean = 0.0;  // E[|x_k - y|² - |x_{k-1} - y|²]
    double sq_stderr = 0.0;
};

struct DriftReport {
    double eps = 0.0;
    std::size_t episodes = 0;
    std::size_t min_active = 0;
    std::vector<DriftRow> rows;
    /// Smallest C with (drift + 3·stderr) <= C eps² on every step with at
    /// least min_active episodes.
    double c_hat = 0.0;
    double c_hat_conditional = std::numeric_limits<double>::quiet_NaN();
    double c_hat_sq = 0.0;
};

struct DriftOptions {
    /// Reference point for the |x - y|² check; defaults to z.
    std::optional<Point> y;
    /// Strategies used to generate the episodes. When both are given the
    /// conditional drift is computed as well.
    const Strategy* sigma_I = nullptr;
    const Strategy* sigma_II = nullptr;
    double z_band = 3.0;
    std::size_t min_active = 0;  // 0 selects max(100, episodes/20)
};

/// Throws InsufficientData below 1000 episodes.
DriftReport martingale_diagnostic(const Problem& problem, std::span<const EpisodeRecord> episodes,
                                  const Point& z, DriftOptions options = {});

/// E|x + eps·V - z| for V uniform in the unit ball, by product Gauss quadrature.
double ball_mean_distance(const Point& x, double eps, const Point& z);

inline constexpr int kEpisodeSchemaVersion = 1;

/// One JSON object per line.
void write_episodes_jsonl(std::ostream& os, std::span<const EpisodeRecord> episodes, std::uint64_t seed);

}  // namespace tow
