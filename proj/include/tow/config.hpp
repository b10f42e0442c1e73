#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tow/problem_data.hpp"

namespace tow {

struct StrategyConfig {
    std::string kind = "value_greedy";  // value_greedy | pull_toward | pull_away | stationary
    std::optional<Point> target;        // z for pull_toward / pull_away
};

struct SimulationConfig {
    std::size_t episodes = 1000;
    std::uint64_t seed = 1;
    std::vector<Point> starts;
    int start_level = -1;  // -1 selects M
    StrategyConfig player_I;
    StrategyConfig player_II{"value_greedy", std::nullopt};
    double eta = -1.0;  // negative selects 1e-3·(max F - min F)
    int extra_samples = 16;
    std::string stopping = "contact_or_boundary";  // | boundary_only | fixed_horizon
    int horizon_steps = 0;
    bool write_episodes = true;
};

struct ProbeConfig {
    nlohmann::json phi;
    Point x;
    double t = 0.5;
    std::vector<double> eps_ladder;
    double h_ratio = 8.0;
    double tolerance = 0.05;
};

struct ValidateConfig {
    int comparison_instances = 20;
    double modulus_factor = 1.5;
    std::optional<ProbeConfig> probe;
};

struct RunConfig {
    nlohmann::json source;  // the parsed document, echoed in the manifest

    double p = 2.0;
    int n = 1;
    double eps = 0.1;
    double horizon = 1.0;
    double h_ratio = 8.0;
    unsigned threads = 1;

    std::shared_ptr<const Domain> domain;
    BoundaryData boundary;
    Obstacle obstacle;

    std::optional<SimulationConfig> simulation;
    std::vector<double> eps_ladder;
    ValidateConfig validate;

    std::string output_directory = "out";
    std::vector<std::string> formats{"csv", "json"};

    GameParameters parameters() const { return make_parameters(p, n, eps, horizon); }
    std::shared_ptr<const Problem> problem() const;
    std::shared_ptr<const Problem> problem(double eps_override) const;
};

/// Parses a JSON run configuration.
///
/// Throws ParseError ("line L, column C: ...") for malformed text and
/// ValidationError naming the offending key or invariant otherwise.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace tow
