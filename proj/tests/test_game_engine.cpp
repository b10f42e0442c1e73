#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "tow/game_engine.hpp"

using namespace tow;
using test::interval;

namespace {

std::shared_ptr<const Problem> line_problem(double p, double eps, double T, Expression F, Expression psi) {
    return test::make_problem(p, 1, eps, T, interval(-1.0, 1.0), std::move(F), std::move(psi));
}

GameState at(const Point& x, int level) {
    GameState s;
    s.x = x;
    s.level = level;
    return s;
}

// E|x + eps V - z| for V uniform in [-1,1].
double mean_distance_1d(double x, double eps, double z) {
    const double d = std::abs(x - z);
    if (d >= eps) return d;
    return (d * d + eps * eps) / (2.0 * eps);
}

// Midpoint rule on a fine Cartesian grid over the unit disc.
double mean_distance_2d(const Point& x, double eps, const Point& z) {
    const int m = 800;
    double sum = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double a = -1.0 + (i + 0.5) * 2.0 / m, b = -1.0 + (j + 0.5) * 2.0 / m;
            if (a * a + b * b >= 1.0) continue;
            sum += distance(Point{x[0] + eps * a, x[1] + eps * b}, z);
            ++count;
        }
    return sum / static_cast<double>(count);
}

}  // namespace

TEST_CASE("rng streams are reproducible and episode-local") {
    Rng a = Rng::for_episode(42, 7), b = Rng::for_episode(42, 7), c = Rng::for_episode(42, 8);
    bool differs = false;
    for (int k = 0; k < 100; ++k) {
        const std::uint64_t x = a.next();
        CHECK(x == b.next());
        differs = differs || x != c.next();
    }
    CHECK(differs);
    Rng u(3);
    for (int k = 0; k < 10000; ++k) {
        const double v = u.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("sample_ball is uniform in the open ball") {
    for (int n : {1, 2, 3}) {
        Rng rng(11 + n);
        Point x(n);
        x[0] = 0.3;
        const double eps = 0.2;
        const int N = 200000;
        double r2 = 0.0;
        Point m(n);
        for (int k = 0; k < N; ++k) {
            const Point y = sample_ball(x, eps, rng);
            const Point d = y - x;
            REQUIRE(norm(d) < eps);
            r2 += norm2(d);
            m += d;
        }
        // E|V|² = n/(n+2) eps², sd of |V|² below eps²
        CHECK(r2 / N == doctest::Approx(n * eps * eps / (n + 2.0)).epsilon(0.01));
        for (int i = 0; i < n; ++i) CHECK(std::abs(m[i] / N) < 5.0 * eps / std::sqrt(N));
    }
}

TEST_CASE("pull_strategy in 1D") {
    auto prob = line_problem(3.0, 0.1, 0.1, Expression::constant(0.0), Expression::constant(-1.0));
    const Strategy pull = pull_strategy(prob, Point{1.5});
    // x + (eps - eps³) = 0.5 + 0.1 - 0.001
    CHECK(pull(at(Point{0.5}, 3))[0] == doctest::Approx(0.599).epsilon(1e-14));
    // on the strip the state is kept
    CHECK(pull(at(Point{1.05}, 3))[0] == 1.05);
    // closer than eps - eps³: the move overshoots z
    const Strategy near = pull_strategy(prob, Point{0.55});
    CHECK(near(at(Point{0.5}, 3))[0] == doctest::Approx(0.599).epsilon(1e-14));
    const Strategy push = push_strategy(prob, Point{1.5});
    CHECK(push(at(Point{0.5}, 3))[0] == doctest::Approx(0.401).epsilon(1e-14));
}

TEST_CASE("value_greedy on an affine field moves to the rim") {
    const Expression f = Expression::affine(Point{1.0, 0.5}, 0.0);
    auto prob = test::make_problem(3.0, 2, 0.2, 0.1,
                                   std::make_shared<const Domain>(Domain::box(Point{-1.0, -1.0}, Point{1.0, 1.0})), f,
                                   Expression::constant(-10.0));
    auto lat = test::make_lattice(*prob, 0.05);
    auto u = std::make_shared<const ValueField>(solve_time_marching(prob, lat));
    const Strategy I = value_greedy_strategy(u, Player::I);
    const Strategy II = value_greedy_strategy(u, Player::II);
    const Point x{0.1, -0.2};
    const Point g = f.gradient(x, 0.0) * (1.0 / norm(f.gradient(x, 0.0)));
    const Point a = I(at(x, 2)), b = II(at(x, 2));
    CHECK(distance(a, x) < 0.2);
    CHECK(distance(b, x) < 0.2);
    // the best rim candidate along the direction set is within one angular step of g
    const double step = 2.0 * std::numbers::pi / lat->rim_directions().size();
    CHECK(dot(a - x, g) >= 0.2 * (1.0 - 1e-5) * std::cos(step));
    CHECK(dot(b - x, g) <= -0.2 * (1.0 - 1e-5) * std::cos(step));
    CHECK(f(a, 0.0) - f(x, 0.0) == doctest::Approx(-(f(b, 0.0) - f(x, 0.0))).epsilon(1e-9));

    GreedyOptions bad;
    bad.eta = 0.0;
    CHECK_THROWS_AS(value_greedy_strategy(u, Player::I, bad), Error);
}

TEST_CASE("value_greedy on a constant field is deterministic") {
    auto prob = line_problem(3.0, 0.2, 0.1, Expression::constant(1.0), Expression::constant(0.0));
    auto lat = test::make_lattice(*prob, 0.025);
    auto u = std::make_shared<const ValueField>(solve_time_marching(prob, lat));
    const Strategy I = value_greedy_strategy(u, Player::I);
    const Point a = I(at(Point{0.2}, 3));
    const Point b = I(at(Point{0.2}, 3));
    CHECK(a == b);
    CHECK(distance(a, Point{0.2}) < 0.2);
}

TEST_CASE("run_episode terminal cases") {
    auto prob = line_problem(3.0, 0.2, 0.1, Expression::affine(Point{1.0}, 0.0, 2.0), Expression::constant(-10.0));
    const Strategy s = Strategy::stationary();
    Rng rng(1);
    const EpisodeRecord strip = run_episode(*prob, Point{1.1}, 4, s, s, StoppingRule::boundary_only(), rng);
    CHECK(strip.tau == 0);
    CHECK(strip.reason == StopReason::Strip);
    CHECK(strip.payoff == doctest::Approx(1.1 + 2.0 * 4 * 0.02));
    const EpisodeRecord slab = run_episode(*prob, Point{0.3}, 0, s, s, StoppingRule::boundary_only(), rng);
    CHECK(slab.tau == 0);
    CHECK(slab.reason == StopReason::InitialSlab);
    CHECK(slab.payoff == doctest::Approx(0.3));
    CHECK_THROWS_AS(run_episode(*prob, Point{1.5}, 4, s, s, StoppingRule::boundary_only(), rng), Error);

    // game ends at level 0 at the latest
    const EpisodeRecord walk = run_episode(*prob, Point{0.0}, 5, s, s, StoppingRule::boundary_only(), rng);
    CHECK(walk.tau <= 5);
    CHECK(walk.path.size() == static_cast<std::size_t>(walk.tau) + 1);
    CHECK(walk.branches.size() == static_cast<std::size_t>(walk.tau));
    for (std::size_t k = 1; k < walk.path.size(); ++k) {
        CHECK(walk.path[k].level == walk.path[k - 1].level - 1);
        CHECK(distance(walk.path[k].x, walk.path[k - 1].x) < 0.2);
    }
}

TEST_CASE("run_episode stops at once on the contact set") {
    auto prob = line_problem(3.0, 0.2, 0.1, Expression::constant(1.0), Expression::constant(1.0));
    auto lat = test::make_lattice(*prob, 0.025);
    auto u = std::make_shared<const ValueField>(solve_time_marching(prob, lat));
    Rng rng(5);
    const Strategy s = Strategy::stationary();
    const EpisodeRecord r = run_episode(*prob, Point{0.2}, 3, s, s, StoppingRule::contact_or_boundary(u), rng);
    CHECK(r.tau == 0);
    CHECK(r.reason == StopReason::PlayerIStop);
    CHECK(r.payoff == 1.0);

    const EpisodeRecord h = run_episode(*prob, Point{0.0}, 5, s, s, StoppingRule::fixed_horizon(2), rng);
    CHECK(h.tau <= 2);
}

TEST_CASE("step rejects moves outside the ball") {
    auto prob = line_problem(100.0, 0.2, 0.1, Expression::constant(0.0), Expression::constant(-1.0));
    const Strategy jump(Strategy::Kind::Stationary, [](const GameState& s) { return s.x + Point{0.5}; }, "jump");
    Rng rng(9);
    GameState s = at(Point{0.0}, 50);
    bool thrown = false;
    for (int k = 0; k < 40 && !thrown; ++k) {
        try {
            Branch b;
            s = step(*prob, s, jump, jump, rng, &b);
            CHECK(b == Branch::Noise);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::IllegalMove);
            thrown = true;
        }
    }
    CHECK(thrown);
}

TEST_CASE("estimate_value from the strip is exact") {
    auto prob = line_problem(3.0, 0.2, 0.1, Expression::affine(Point{2.0}, 1.0), Expression::constant(-10.0));
    const Strategy s = Strategy::stationary();
    const auto r = estimate_value(*prob, Point{-1.1}, 3, s, s, StoppingRule::boundary_only(), 50, 1);
    CHECK(r.estimate.mean == doctest::Approx(-1.2));
    CHECK(r.estimate.stderr_ == 0.0);
    CHECK(r.estimate.episodes == 50);
}

TEST_CASE("estimates are identical across thread counts and reruns") {
    auto prob = line_problem(4.0, 0.2, 0.5, Expression::sine(1.0, Point{0.5}, Point{0.5}, 0.0),
                             Expression::constant(-10.0));
    const Strategy I = pull_strategy(prob, Point{1.5}), II = push_strategy(prob, Point{1.5});
    EstimateOptions one, four;
    one.keep_records = four.keep_records = true;
    four.threads = 4;
    const auto a = estimate_value(*prob, Point{0.1}, 20, I, II, StoppingRule::boundary_only(), 500, 77, one);
    const auto b = estimate_value(*prob, Point{0.1}, 20, I, II, StoppingRule::boundary_only(), 500, 77, four);
    CHECK(a.estimate.mean == b.estimate.mean);
    CHECK(a.estimate.stderr_ == b.estimate.stderr_);
    std::ostringstream sa, sb;
    write_episodes_jsonl(sa, a.records, 77);
    write_episodes_jsonl(sb, b.records, 77);
    CHECK(sa.str() == sb.str());
    const auto c = estimate_value(*prob, Point{0.1}, 20, I, II, StoppingRule::boundary_only(), 500, 78, one);
    CHECK(c.estimate.mean != a.estimate.mean);

    std::istringstream lines(sa.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("schema_version") == kEpisodeSchemaVersion);
        CHECK(j.at("seed") == 77);
        CHECK(j.at("episode") == count);
        CHECK(j.at("path").size() == j.at("tau").get<std::size_t>() + 1);
        CHECK(j.at("branches").size() == j.at("tau").get<std::size_t>());
        CHECK(j.at("payoff").get<double>() == a.records[count].payoff);
        ++count;
    }
    CHECK(count == 500);
}

TEST_CASE("branch frequencies follow alpha/2, alpha/2, beta") {
    auto prob = test::make_problem(4.0, 1, 0.1, 100.0, interval(-10.0, 10.0), Expression::constant(0.0),
                                   Expression::constant(-1.0));
    const Strategy s = Strategy::stationary();
    const auto recs = simulate_episodes(*prob, Point{0.0}, 400, s, s, StoppingRule::fixed_horizon(100), 300, 5);
    const BranchCounts c = count_branches(recs);
    CHECK(c.total() == 30000);
    const double alpha = prob->params.alpha;
    CHECK(alpha == doctest::Approx(0.4));
    // independent binomial check
    const double N = c.total();
    for (auto [k, q] : {std::pair{c.coin_I, alpha / 2}, std::pair{c.coin_II, alpha / 2}, std::pair{c.noise, 1 - alpha}})
        CHECK(std::abs(k - N * q) / std::sqrt(N * q * (1 - q)) < 4.0);
    CHECK(c.max_z(alpha) < 4.0);
}

TEST_CASE("ball_mean_distance") {
    for (double x : {0.0, 0.05, 0.3}) CHECK(ball_mean_distance(Point{x}, 0.1, Point{0.1}) ==
                                            doctest::Approx(mean_distance_1d(x, 0.1, 0.1)).epsilon(1e-12));
    const Point z{1.5, 0.0};
    for (const Point& x : {Point{0.7, 0.0}, Point{1.45, 0.1}, Point{1.5, 0.0}})
        CHECK(ball_mean_distance(x, 0.1, z) == doctest::Approx(mean_distance_2d(x, 0.1, z)).epsilon(2e-4));
}

TEST_CASE("martingale_diagnostic needs data and sees the pull") {
    auto prob = test::make_problem(4.0, 2, 0.1, 0.05, std::make_shared<const Domain>(Domain::ball(Point{0.0, 0.0}, 1.0)),
                                   Expression::constant(0.0), Expression::constant(-1.0));
    const Point z{1.5, 0.0};
    const std::vector<EpisodeRecord> none;
    try {
        (void)martingale_diagnostic(*prob, none, z);
        FAIL("expected InsufficientData");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }

    const Strategy toward = pull_strategy(prob, z);
    const auto recs = simulate_episodes(*prob, Point{0.0, 0.0}, 10, toward, toward, StoppingRule::boundary_only(), 2000, 3);
    DriftOptions o;
    o.sigma_I = &toward;
    o.sigma_II = &toward;
    const DriftReport rep = martingale_diagnostic(*prob, recs, z, o);
    const double eps = 0.1, alpha = prob->params.alpha;
    REQUIRE_FALSE(rep.rows.empty());
    for (const auto& r : rep.rows) {
        if (r.active < rep.min_active) continue;
        // both coin moves shorten |x - z| by eps - eps³; noise adds at most eps²/(2 d) with d >= 0.5
        CHECK(r.conditional_mean <= -alpha * (eps - eps * eps * eps) + (1 - alpha) * eps * eps + 1e-12);
        CHECK(r.conditional_mean >= -alpha * (eps - eps * eps * eps) - 1e-12);
        CHECK(r.mean < 0.0);
    }
}
