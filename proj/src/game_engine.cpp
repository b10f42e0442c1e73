#include "tow/game_engine.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "tow/parallel.hpp"

namespace tow {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::for_episode(std::uint64_t seed, std::uint64_t episode) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32)};
    Rng r(0);
    r.engine_.seed(seq);
    return r;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

Point sample_ball(const Point& x, double eps, Rng& rng) {
    const int n = x.dim;
    Point v(n);
    for (;;) {
        double r2 = 0.0;
        for (int i = 0; i < n; ++i) {
            v[i] = 2.0 * rng.uniform() - 1.0;
            r2 += v[i] * v[i];
        }
        if (r2 < 1.0) break;
    }
    return x + eps * v;
}

std::string_view to_string(Branch b) {
    switch (b) {
        case Branch::CoinI: return "I";
        case Branch::CoinII: return "II";
        case Branch::Noise: return "noise";
    }
    return "?";
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::None: return "none";
        case StopReason::Strip: return "strip";
        case StopReason::InitialSlab: return "initial_slab";
        case StopReason::PlayerIStop: return "player_I_stop";
        case StopReason::Horizon: return "horizon";
    }
    return "?";
}

std::string_view to_string(Strategy::Kind k) {
    switch (k) {
        case Strategy::Kind::Stationary: return "stationary";
        case Strategy::Kind::PullToward: return "pull_toward";
        case Strategy::Kind::PullAway: return "pull_away";
        case Strategy::Kind::ValueGreedy: return "value_greedy";
    }
    return "?";
}

std::string_view to_string(StoppingRule::Kind k) {
    switch (k) {
        case StoppingRule::Kind::BoundaryOnly: return "boundary_only";
        case StoppingRule::Kind::ContactOrBoundary: return "contact_or_boundary";
        case StoppingRule::Kind::FixedHorizon: return "fixed_horizon";
    }
    return "?";
}

Strategy::Strategy(Kind kind, Rule rule, std::string label)
    : kind_(kind), rule_(std::move(rule)), label_(std::move(label)) {}

Strategy Strategy::stationary() {
    return Strategy(Kind::Stationary, [](const GameState& s) { return s.x; }, "stationary");
}

namespace {

Strategy pull_like(std::shared_ptr<const Problem> problem, const Point& z, double sign, Strategy::Kind kind) {
    const double eps = problem->params.eps;
    const double len = eps - eps * eps * eps;
    auto rule = [problem, z, sign, len](const GameState& s) {
        if (problem->in_strip(s.x)) return s.x;
        const Point d = z - s.x;
        const double r = norm(d);
        if (r == 0.0) return s.x;
        return s.x + (sign * len / r) * d;
    };
    return Strategy(kind, std::move(rule), std::string(to_string(kind)));
}

}  // namespace

Strategy pull_strategy(std::shared_ptr<const Problem> problem, const Point& z) {
    return pull_like(std::move(problem), z, 1.0, Strategy::Kind::PullToward);
}

Strategy push_strategy(std::shared_ptr<const Problem> problem, const Point& z) {
    return pull_like(std::move(problem), z, -1.0, Strategy::Kind::PullAway);
}

Strategy value_greedy_strategy(std::shared_ptr<const ValueField> u, Player player, GreedyOptions options) {
    if (!(options.eta > 0.0)) throw Error(ErrorCode::InvalidParameter, "eta > 0 required");
    const SpaceTimeLattice& lat = u->lattice();
    const int n = lat.dim();
    const double eps = lat.eps();
    const double h = lat.h();

    // Offsets from x: rim points, then fixed uniform samples. Lattice nodes are added per call.
    std::vector<Point> offsets;
    for (const Point& d : lat.rim_directions()) offsets.push_back(eps * (1.0 - 1e-6) * d);
    Rng rng(options.sample_seed);
    const Point origin(n);
    for (int k = 0; k < options.extra_samples; ++k) offsets.push_back(sample_ball(origin, eps, rng) - origin);

    const auto reach = static_cast<std::int64_t>(std::ceil(eps / h)) + 1;
    const double sign = player == Player::I ? 1.0 : -1.0;
    auto rule = [u, offsets, reach, sign, n, eps](const GameState& s) {
        const SpaceTimeLattice& L = u->lattice();
        const int j = s.level - 1;
        Point best = s.x;
        double best_score = -std::numeric_limits<double>::infinity();
        auto consider = [&](const Point& y) {
            const double v = sign * u->evaluate(y, j);
            if (v > best_score) {
                best_score = v;
                best = y;
            }
        };
        const auto c = L.node_index(L.nearest_node(s.x));
        std::array<std::int64_t, kMaxDim> lo{}, hi{};
        for (int i = 0; i < kMaxDim; ++i) {
            lo[i] = i < n ? c[i] - reach : c[i];
            hi[i] = i < n ? c[i] + reach : c[i];
        }
        for (std::int64_t a = lo[0]; a <= hi[0]; ++a)
            for (std::int64_t b = lo[1]; b <= hi[1]; ++b)
                for (std::int64_t d = lo[2]; d <= hi[2]; ++d) {
                    const NodeId id = L.node_id({a, b, d});
                    if (id < 0 || L.node_class(id) == NodeClass::Exterior) continue;
                    const Point y = L.coordinate(id);
                    if (distance(y, s.x) < eps) consider(y);
                }
        for (const Point& o : offsets) consider(s.x + o);
        return best;
    };
    return Strategy(Strategy::Kind::ValueGreedy, std::move(rule),
                    player == Player::I ? "value_greedy_I" : "value_greedy_II");
}

StoppingRule StoppingRule::boundary_only() { return StoppingRule(); }

StoppingRule StoppingRule::contact_or_boundary(std::shared_ptr<const ValueField> u, double tol) {
    StoppingRule r;
    r.kind_ = Kind::ContactOrBoundary;
    r.tol_ = tol < 0.0 ? u->default_contact_tol() : tol;
    r.field_ = std::move(u);
    return r;
}

StoppingRule StoppingRule::fixed_horizon(int steps) {
    if (steps < 0) throw Error(ErrorCode::InvalidParameter, "horizon steps must be nonnegative");
    StoppingRule r;
    r.kind_ = Kind::FixedHorizon;
    r.steps_ = steps;
    return r;
}

StopReason StoppingRule::fires(const GameState& s) const {
    switch (kind_) {
        case Kind::BoundaryOnly: return StopReason::None;
        case Kind::ContactOrBoundary:
            return field_->obstacle_gap(s.x, s.level) <= tol_ ? StopReason::PlayerIStop : StopReason::None;
        case Kind::FixedHorizon: return s.step >= steps_ ? StopReason::Horizon : StopReason::None;
    }
    return StopReason::None;
}

namespace {

StopReason absorption(const Problem& problem, const GameState& s) {
    if (problem.in_strip(s.x)) return StopReason::Strip;
    if (s.level <= 0) return StopReason::InitialSlab;
    return StopReason::None;
}

Branch advance(const Problem& problem, GameState& s, const Strategy& sigma_I, const Strategy& sigma_II,
               Rng& rng) {
    const double alpha = problem.params.alpha;
    const double eps = problem.params.eps;
    const double c = rng.uniform();
    Branch b;
    Point next;
    if (c < 0.5 * alpha) {
        b = Branch::CoinI;
        next = sigma_I(s);
    } else if (c < alpha) {
        b = Branch::CoinII;
        next = sigma_II(s);
    } else {
        b = Branch::Noise;
        next = sample_ball(s.x, eps, rng);
    }
    if (b != Branch::Noise && !(distance(next, s.x) < eps))
        throw Error(ErrorCode::IllegalMove, "strategy '" +
                                                (b == Branch::CoinI ? sigma_I.label() : sigma_II.label()) +
                                                "' moved outside the open eps-ball");
    s.history.push_back(s.x);
    s.x = next;
    s.level -= 1;
    s.step += 1;
    s.absorbed = absorption(problem, s) != StopReason::None;
    return b;
}

}  // namespace

GameState step(const Problem& problem, const GameState& state, const Strategy& sigma_I, const Strategy& sigma_II,
               Rng& rng, Branch* branch) {
    if (state.absorbed) throw Error(ErrorCode::InvalidParameter, "step called on an absorbed state");
    GameState next = state;
    const Branch b = advance(problem, next, sigma_I, sigma_II, rng);
    if (branch) *branch = b;
    return next;
}

EpisodeRecord run_episode(const Problem& problem, const Point& x0, int j0, const Strategy& sigma_I,
                          const Strategy& sigma_II, const StoppingRule& rule, Rng& rng) {
    if (classify_node(*problem.domain, x0, problem.params.eps) == NodeClass::Exterior)
        throw Error(ErrorCode::OutOfDomain, "start point lies beyond the strip");
    if (j0 < 0) throw Error(ErrorCode::InvalidParameter, "start level must be nonnegative");
    EpisodeRecord rec;
    GameState s;
    s.x = x0;
    s.level = j0;
    rec.path.push_back({x0, j0});
    for (;;) {
        StopReason why = absorption(problem, s);
        if (why == StopReason::None) why = rule.fires(s);
        if (why != StopReason::None) {
            rec.reason = why;
            break;
        }
        rec.branches.push_back(advance(problem, s, sigma_I, sigma_II, rng));
        rec.path.push_back({s.x, s.level});
    }
    rec.tau = s.step;
    rec.payoff = problem.payoff(s.x, s.level);
    return rec;
}

EstimateResult estimate_value(const Problem& problem, const Point& x0, int j0, const Strategy& sigma_I,
                              const Strategy& sigma_II, const StoppingRule& rule, std::size_t episodes,
                              std::uint64_t seed, EstimateOptions options) {
    if (episodes < 1) throw Error(ErrorCode::InvalidParameter, "at least one episode required");
    EstimateResult out;
    std::vector<double> payoff(episodes);
    if (options.keep_records) out.records.resize(episodes);
    parallel_for(episodes, resolve_threads(options.threads), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Rng rng = Rng::for_episode(seed, i);
            EpisodeRecord rec = run_episode(problem, x0, j0, sigma_I, sigma_II, rule, rng);
            rec.index = i;
            payoff[i] = rec.payoff;
            if (options.keep_records) out.records[i] = std::move(rec);
        }
    });
    double sum = 0.0;
    for (double v : payoff) sum += v;
    const auto [lo, hi] = std::minmax_element(payoff.begin(), payoff.end());
    // identical payoffs give the value itself and zero spread
    const double mean = *lo == *hi ? *lo : sum / static_cast<double>(episodes);
    double ss = 0.0;
    for (double v : payoff) ss += (v - mean) * (v - mean);
    out.estimate.episodes = episodes;
    out.estimate.mean = mean;
    out.estimate.stderr_ =
        episodes > 1 ? std::sqrt(ss / static_cast<double>(episodes - 1)) / std::sqrt(static_cast<double>(episodes))
                     : 0.0;
    out.estimate.seed = seed;
    return out;
}

std::vector<EpisodeRecord> simulate_episodes(const Problem& problem, const Point& x0, int j0,
                                             const Strategy& sigma_I, const Strategy& sigma_II,
                                             const StoppingRule& rule, std::size_t episodes,
                                             std::uint64_t seed, unsigned threads) {
    EstimateOptions opts;
    opts.threads = threads;
    opts.keep_records = true;
    return estimate_value(problem, x0, j0, sigma_I, sigma_II, rule, episodes, seed, opts).records;
}

double BranchCounts::max_z(double alpha) const {
    const double n = static_cast<double>(total());
    if (n == 0.0) return 0.0;
    const double probs[3] = {0.5 * alpha, 0.5 * alpha, 1.0 - alpha};
    const std::size_t counts[3] = {coin_I, coin_II, noise};
    double z = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double sd = std::sqrt(n * probs[k] * (1.0 - probs[k]));
        const double dev = std::abs(static_cast<double>(counts[k]) - n * probs[k]);
        if (sd == 0.0) {
            if (dev > 0.0) return std::numeric_limits<double>::infinity();
            continue;
        }
        z = std::max(z, dev / sd);
    }
    return z;
}

BranchCounts count_branches(std::span<const EpisodeRecord> episodes) {
    BranchCounts c;
    for (const auto& e : episodes)
        for (Branch b : e.branches) {
            if (b == Branch::CoinI) ++c.coin_I;
            else if (b == Branch::CoinII) ++c.coin_II;
            else ++c.noise;
        }
    return c;
}

double ball_mean_distance(const Point& x, double eps, const Point& z) {
    using boost::math::quadrature::gauss;
    const int n = x.dim;
    const Point a = x - z;
    if (n == 1) {
        const double s = std::abs(a[0]);
        return s >= eps ? s : (s * s + eps * eps) / (2.0 * eps);
    }
    constexpr int kAngles = 64;
    static const auto trig = [] {
        std::array<std::array<double, 2>, kAngles> t{};
        for (int k = 0; k < kAngles; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / kAngles;
            t[k] = {std::cos(th), std::sin(th)};
        }
        return t;
    }();
    if (n == 2) {
        auto ring = [&](double r) {
            double acc = 0.0;
            for (int k = 0; k < kAngles; ++k) {
                const double dx = a[0] + eps * r * trig[k][0], dy = a[1] + eps * r * trig[k][1];
                acc += std::sqrt(dx * dx + dy * dy);
            }
            return acc / kAngles;
        };
        return gauss<double, 20>::integrate([&](double r) { return 2.0 * r * ring(r); }, 0.0, 1.0);
    }
    auto shell = [&](double r) {
        return 0.5 * gauss<double, 20>::integrate(
                         [&](double ct) {
                             const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                             double acc = 0.0;
                             for (int k = 0; k < kAngles; ++k) {
                                 const double dx = a[0] + eps * r * st * trig[k][0];
                                 const double dy = a[1] + eps * r * st * trig[k][1];
                                 const double dz = a[2] + eps * r * ct;
                                 acc += std::sqrt(dx * dx + dy * dy + dz * dz);
                             }
                             return acc / kAngles;
                         },
                         -1.0, 1.0);
    };
    return gauss<double, 20>::integrate([&](double r) { return 3.0 * r * r * shell(r); }, 0.0, 1.0);
}

namespace {

struct Accumulator {
    std::size_t n = 0;
    double sum = 0.0, sum2 = 0.0;
    void add(double v) {
        ++n;
        sum += v;
        sum2 += v * v;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double stderr_() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
        return std::sqrt(var / static_cast<double>(n));
    }
};

}  // namespace

DriftReport martingale_diagnostic(const Problem& problem, std::span<const EpisodeRecord> episodes,
                                  const Point& z, DriftOptions options) {
    if (episodes.size() < 1000)
        throw Error(ErrorCode::InsufficientData,
                    "martingale diagnostic needs at least 1000 episodes, got " + std::to_string(episodes.size()));
    const Point y = options.y.value_or(z);
    const double eps = problem.params.eps;
    const double alpha = problem.params.alpha;
    const double beta = problem.params.beta;
    const bool conditional = options.sigma_I && options.sigma_II;

    std::size_t longest = 0;
    for (const auto& e : episodes) longest = std::max(longest, e.branches.size());
    std::vector<Accumulator> raw(longest), cond(longest), sq(longest);

    for (const auto& e : episodes) {
        GameState s;
        for (std::size_t k = 0; k < e.branches.size(); ++k) {
            const Point& from = e.path[k].x;
            const Point& to = e.path[k + 1].x;
            const double r = distance(from, z);
            raw[k].add(distance(to, z) - r);
            sq[k].add(norm2(to - y) - norm2(from - y));
            if (conditional) {
                s.x = from;
                s.level = e.path[k].level;
                s.step = static_cast<int>(k);
                const double d1 = distance((*options.sigma_I)(s), z) - r;
                const double d2 = distance((*options.sigma_II)(s), z) - r;
                cond[k].add(0.5 * alpha * (d1 + d2) + beta * (ball_mean_distance(from, eps, z) - r));
            }
        }
    }

    DriftReport rep;
    rep.eps = eps;
    rep.episodes = episodes.size();
    rep.min_active = options.min_active ? options.min_active : std::max<std::size_t>(100, episodes.size() / 20);
    const double e2 = eps * eps;
    double c_raw = -std::numeric_limits<double>::infinity();
    double c_cond = -std::numeric_limits<double>::infinity();
    double c_sq = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < longest; ++k) {
        DriftRow row;
        row.step = static_cast<int>(k + 1);
        row.active = raw[k].n;
        row.mean = raw[k].mean();
        row.stderr_ = raw[k].stderr_();
        row.sq_mean = sq[k].mean();
        row.sq_stderr = sq[k].stderr_();
        if (conditional) {
            row.conditional_mean = cond[k].mean();
            row.conditional_stderr = cond[k].stderr_();
        }
        if (row.active >= rep.min_active) {
            c_raw = std::max(c_raw, (row.mean + options.z_band * row.stderr_) / e2);
            c_sq = std::max(c_sq, (row.sq_mean + options.z_band * row.sq_stderr) / e2);
            if (conditional)
                c_cond = std::max(c_cond, (row.conditional_mean + options.z_band * row.conditional_stderr) / e2);
        }
        rep.rows.push_back(row);
    }
    if (!std::isfinite(c_raw))
        throw Error(ErrorCode::InsufficientData, "no step has at least " + std::to_string(rep.min_active) +
                                                     " active episodes");
    rep.c_hat = c_raw;
    rep.c_hat_sq = c_sq;
    if (conditional) rep.c_hat_conditional = c_cond;
    return rep;
}

void write_episodes_jsonl(std::ostream& os, std::span<const EpisodeRecord> episodes, std::uint64_t seed) {
    for (const auto& e : episodes) {
        nlohmann::json j;
        j["schema_version"] = kEpisodeSchemaVersion;
        j["seed"] = seed;
        j["episode"] = e.index;
        nlohmann::json path = nlohmann::json::array();
        for (const auto& pp : e.path) {
            nlohmann::json x = nlohmann::json::array();
            for (int i = 0; i < pp.x.dim; ++i) x.push_back(pp.x[i]);
            path.push_back({{"x", x}, {"level", pp.level}});
        }
        j["path"] = std::move(path);
        nlohmann::json br = nlohmann::json::array();
        for (Branch b : e.branches) br.push_back(std::string(to_string(b)));
        j["branches"] = std::move(br);
        j["tau"] = e.tau;
        j["payoff"] = e.payoff;
        j["stop_reason"] = std::string(to_string(e.reason));
        os << j.dump() << '\n';
    }
}

}  // namespace tow
