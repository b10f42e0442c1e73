#include "tow/run.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "tow/checksum.hpp"
#include "tow/field_io.hpp"
#include "tow/game_engine.hpp"
#include "tow/validation.hpp"

#ifndef TOW_VERSION
#define TOW_VERSION "0.0.0"
#endif

namespace tow {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view software_version() { return TOW_VERSION; }

std::string_view to_string(Subcommand s) {
    switch (s) {
        case Subcommand::Solve: return "solve";
        case Subcommand::Simulate: return "simulate";
        case Subcommand::Converge: return "converge";
        case Subcommand::Validate: return "validate";
    }
    return "?";
}

std::optional<Subcommand> subcommand_from(std::string_view name) {
    for (Subcommand s : {Subcommand::Solve, Subcommand::Simulate, Subcommand::Converge, Subcommand::Validate})
        if (to_string(s) == name) return s;
    return std::nullopt;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::ValidationError:
        case ErrorCode::InvalidParameter:
        case ErrorCode::Incompatible:
        case ErrorCode::OutOfDomain:
        case ErrorCode::NoWitness:
            return kExitConfig;
        default:
            return kExitNumerical;
    }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json point_json(const Point& p) {
    json a = json::array();
    for (int i = 0; i < p.dim; ++i) a.push_back(p[i]);
    return a;
}

class Pipeline {
public:
    Pipeline(Subcommand sub, const RunConfig& cfg, const RunOptions& opts) : sub_(sub), cfg_(cfg), opts_(opts) {
        dir_ = opts.out_dir.empty() ? cfg.output_directory : opts.out_dir;
        threads_ = opts.threads.value_or(cfg.threads);
        seed_ = opts.seed ? *opts.seed : (cfg.simulation ? cfg.simulation->seed : 1);
        m_["schema_version"] = 1;
        m_["software"] = {{"name", "towgame"}, {"version", std::string(software_version())}};
        m_["subcommand"] = std::string(to_string(sub));
        m_["pipeline"] = json::array();
        m_["config"] = cfg.source;
        json ov = json::object();
        if (opts.seed) ov["seed"] = *opts.seed;
        if (opts.threads) ov["threads"] = *opts.threads;
        m_["overrides"] = ov;
        m_["files"] = json::array();
        m_["timings_s"] = json::object();
        m_["results"] = json::object();
    }

    RunManifest execute() {
        const auto t0 = Clock::now();
        RunManifest out;
        try {
            fs::create_directories(dir_);
            switch (sub_) {
                case Subcommand::Solve: solve_stage(); break;
                case Subcommand::Simulate: simulate_stage(); break;
                case Subcommand::Converge: converge_stage(); break;
                case Subcommand::Validate: validate_stage(); break;
            }
            m_["status"] = validation_failed_ ? "failed_validation" : "complete";
            out.exit_code = validation_failed_ ? kExitValidation : kExitOk;
        } catch (const Error& e) {
            m_["status"] = "incomplete";
            m_["failure"] = {{"code", std::string(to_string(e.code()))}, {"message", e.detail()}};
            out.exit_code = exit_code_for(e.code());
        } catch (const std::exception& e) {
            m_["status"] = "incomplete";
            m_["failure"] = {{"code", "IoError"}, {"message", e.what()}};
            out.exit_code = kExitNumerical;
        }
        m_["exit_code"] = out.exit_code;
        m_["timings_s"]["total"] = seconds_since(t0);
        out.path = (fs::path(dir_) / "manifest.json").string();
        std::error_code ec;
        fs::create_directories(dir_, ec);
        std::ofstream f(out.path);
        f << m_.dump(2) << '\n';
        out.document = m_;
        if (!f) out.exit_code = out.exit_code == kExitOk ? kExitNumerical : out.exit_code;
        return out;
    }

private:
    void log(const std::string& line) {
        if (!opts_.quiet && opts_.log) *opts_.log << line << '\n';
    }

    bool wants(const char* format) const {
        return std::find(cfg_.formats.begin(), cfg_.formats.end(), format) != cfg_.formats.end();
    }

    std::string emit(const std::string& name, const std::string& content) {
        const fs::path p = fs::path(dir_) / name;
        std::ofstream f(p, std::ios::binary);
        f << content;
        f.close();
        if (!f) throw Error(ErrorCode::IoError, "cannot write '" + p.string() + "'");
        m_["files"].push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
        log("wrote " + p.string());
        return p.string();
    }

    std::shared_ptr<const SpaceTimeLattice> lattice_for(double eps) const {
        return std::make_shared<const SpaceTimeLattice>(cfg_.domain, eps / cfg_.h_ratio, eps, cfg_.horizon);
    }

    void solve_stage() {
        m_["pipeline"].push_back("solve");
        const auto t0 = Clock::now();
        problem_ = cfg_.problem();
        lattice_ = lattice_for(cfg_.eps);
        const GameParameters& gp = problem_->params;
        m_["derived"] = {{"alpha", gp.alpha},
                         {"beta", gp.beta},
                         {"M", lattice_->levels()},
                         {"h", lattice_->h()},
                         {"lattice",
                          {{"nodes", lattice_->node_count()},
                           {"interior", lattice_->interior_nodes().size()},
                           {"strip", lattice_->strip_nodes().size()}}}};
        const CompatibilityReport rep = validate_compatibility(*problem_, *lattice_);
        m_["compatibility"] = {{"compatible", rep.compatible},
                               {"worst_gap", rep.worst_gap},
                               {"observed_lipschitz_boundary", rep.observed_lipschitz_boundary},
                               {"observed_lipschitz_obstacle", rep.observed_lipschitz_obstacle},
                               {"warnings", rep.warnings}};
        ensure_compatible(rep);
        SolveOptions so;
        so.threads = threads_;
        field_ = std::make_shared<const ValueField>(solve_time_marching(problem_, lattice_, so));
        m_["timings_s"]["solve"] = seconds_since(t0);
        const double r = residual(*field_);
        m_["residual"] = r;
        m_["results"]["solve"] = {{"residual", r},
                                  {"contact_nodes", contact_set(*field_, field_->default_contact_tol()).size()}};
        log("solved: M = " + std::to_string(lattice_->levels()) + ", residual = " + std::to_string(r));
        if (wants("csv")) {
            std::ostringstream os;
            write_field_csv(os, *field_);
            emit("field.csv", os.str());
        }
    }

    Strategy make_strategy(const StrategyConfig& s, Player who, double eta) {
        if (s.kind == "stationary") return Strategy::stationary();
        if (s.kind == "pull_toward") return pull_strategy(problem_, *s.target);
        if (s.kind == "pull_away") return push_strategy(problem_, *s.target);
        GreedyOptions g;
        g.eta = eta;
        g.extra_samples = cfg_.simulation->extra_samples;
        return value_greedy_strategy(field_, who, g);
    }

    double data_range() const {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int j = 0; j <= lattice_->levels(); ++j)
            for (std::size_t i = 0; i < lattice_->node_count(); ++i) {
                const NodeClass c = lattice_->classes()[i];
                if (c == NodeClass::Exterior || (c == NodeClass::Interior && j > 0)) continue;
                const double v = field_->at(static_cast<NodeId>(i), j);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        return hi > lo ? hi - lo : 1.0;
    }

    void simulate_stage() {
        if (!cfg_.simulation) throw Error(ErrorCode::ValidationError, "simulate needs a 'simulation' block");
        const SimulationConfig& sc = *cfg_.simulation;
        solve_stage();
        m_["pipeline"].push_back("simulate");
        const auto t0 = Clock::now();
        const double eta = sc.eta > 0.0 ? sc.eta : 1e-3 * data_range();
        const Strategy sI = make_strategy(sc.player_I, Player::I, eta);
        const Strategy sII = make_strategy(sc.player_II, Player::II, eta);
        StoppingRule rule = StoppingRule::boundary_only();
        if (sc.stopping == "contact_or_boundary") rule = StoppingRule::contact_or_boundary(field_);
        else if (sc.stopping == "fixed_horizon") rule = StoppingRule::fixed_horizon(sc.horizon_steps);
        const int level = sc.start_level < 0 ? lattice_->levels() : sc.start_level;
        if (level > lattice_->levels())
            throw Error(ErrorCode::ValidationError, "simulation.start_level exceeds M = " + std::to_string(lattice_->levels()));

        json estimates = json::array();
        EstimateOptions eo;
        eo.threads = threads_;
        eo.keep_records = sc.write_episodes;
        for (std::size_t k = 0; k < sc.starts.size(); ++k) {
            const Point& x0 = sc.starts[k];
            const std::uint64_t seed = seed_ + k;
            EstimateResult r = estimate_value(*problem_, x0, level, sI, sII, rule, sc.episodes, seed, eo);
            json e = {{"start", point_json(x0)},
                      {"level", level},
                      {"episodes", r.estimate.episodes},
                      {"mean", r.estimate.mean},
                      {"stderr", r.estimate.stderr_},
                      {"seed", seed},
                      {"dpp_value", field_->evaluate(x0, level)}};
            estimates.push_back(e);
            char buf[200];
            std::snprintf(buf, sizeof buf, "start %zu: mean %.6f ± %.6f (DPP %.6f)", k, r.estimate.mean,
                          r.estimate.stderr_, field_->evaluate(x0, level));
            log(buf);
            if (sc.write_episodes) {
                std::ostringstream os;
                write_episodes_jsonl(os, r.records, seed);
                emit("episodes_" + std::to_string(k) + ".jsonl", os.str());
            }
        }
        m_["timings_s"]["simulate"] = seconds_since(t0);
        m_["results"]["simulate"] = {{"eta", eta},
                                     {"stopping", sc.stopping},
                                     {"player_I", sI.label()},
                                     {"player_II", sII.label()},
                                     {"estimates", estimates}};
        if (wants("json")) emit("estimates.json", estimates.dump(2) + "\n");
    }

    Instance config_instance() const {
        Instance in;
        in.name = "config";
        in.p = cfg_.p;
        in.horizon = cfg_.horizon;
        in.domain = cfg_.domain;
        in.boundary = cfg_.boundary;
        in.obstacle = cfg_.obstacle;
        in.h_ratio = cfg_.h_ratio;
        return in;
    }

    void converge_stage() {
        if (cfg_.eps_ladder.empty()) throw Error(ErrorCode::ValidationError, "converge needs study.eps_ladder");
        m_["pipeline"].push_back("converge");
        const auto t0 = Clock::now();
        StudyOptions so;
        so.threads = threads_;
        const ConvergenceTable table = convergence_study(config_instance(), cfg_.eps_ladder, so);
        m_["timings_s"]["converge"] = seconds_since(t0);
        json tj = to_json(table);
        // Runtimes vary between runs; keep them out of the artifacts.
        for (auto& row : tj["rows"]) row.erase("runtime_s");
        m_["results"]["converge"] = to_json(table);
        log("verdict: " + std::string(to_string(table.verdict)));
        if (wants("csv")) {
            std::string csv = "eps,h,error\n";
            std::string plot = "series,eps,error\n";
            char buf[160];
            for (const auto& r : table.rows) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.eps, r.h, r.error);
                csv += buf;
                std::snprintf(buf, sizeof buf, "linf,%.17g,%.17g\n", r.eps, r.error);
                plot += buf;
            }
            emit("convergence.csv", csv);
            emit("convergence_long.csv", plot);
        }
        if (wants("json")) emit("convergence.json", tj.dump(2) + "\n");
        if (table.verdict == Verdict::Violation) validation_failed_ = true;
    }

    void validate_stage() {
        m_["pipeline"].push_back("validate");
        const auto t0 = Clock::now();
        json report = json::object();
        report["schema_version"] = 1;

        // Fixed point and scheme agreement.
        auto problem = cfg_.problem();
        auto lattice = lattice_for(cfg_.eps);
        SolveOptions so;
        so.threads = threads_;
        const ValueField marched = solve_time_marching(problem, lattice, so);
        const FixedPointResult fp = solve_fixed_point(problem, lattice, -1, so);
        double agree = 0.0;
        for (std::size_t i = 0; i < marched.raw().size(); ++i)
            if (!std::isnan(marched.raw()[i]))
                agree = std::max(agree, std::abs(marched.raw()[i] - fp.field.raw()[i]));
        const double res = residual(marched);
        const bool fixed_ok = res <= 1e-12 && agree <= 1e-12 && fp.iterations <= lattice->levels() + 1;
        report["fixed_point"] = {{"residual", res},
                                 {"scheme_difference", agree},
                                 {"iterations", fp.iterations},
                                 {"M", lattice->levels()},
                                 {"passed", fixed_ok}};
        bool ok = fixed_ok;

        if (cfg_.validate.comparison_instances > 0) {
            ComparisonSetup cs{problem->params, cfg_.domain, cfg_.eps / cfg_.h_ratio};
            const ComparisonReport cr = comparison_test(cs, cfg_.validate.comparison_instances, seed_, threads_);
            report["comparison"] = to_json(cr);
            report["comparison"]["passed"] = cr.passed();
            ok = ok && cr.passed();
        }

        std::vector<double> ladder = cfg_.eps_ladder;
        if (ladder.empty()) ladder.push_back(cfg_.eps);
        std::vector<ModulusReport> moduli;
        for (double eps : ladder) {
            const ValueField u = solve_time_marching(cfg_.problem(eps), lattice_for(eps), so);
            moduli.push_back(modulus_report(u));
        }
        const ModulusTrend trend = modulus_trend(std::move(moduli));
        report["modulus"] = to_json(trend);
        report["modulus"]["factor"] = cfg_.validate.modulus_factor;
        report["modulus"]["passed"] = trend.bounded(cfg_.validate.modulus_factor);
        ok = ok && trend.bounded(cfg_.validate.modulus_factor);

        if (cfg_.validate.probe) {
            const ProbeConfig& pc = *cfg_.validate.probe;
            const Expression phi = Expression::from_json(pc.phi, cfg_.n);
            const auto rows = consistency_probe(problem->params, phi, pc.x, pc.t, pc.eps_ladder, pc.h_ratio);
            json pj = json::array();
            for (const auto& r : rows)
                pj.push_back({{"eps", r.eps},
                              {"h", r.h},
                              {"scaled_residual", r.scaled_residual},
                              {"degenerate", r.degenerate},
                              {"target", r.target},
                              {"gap", r.gap},
                              {"relative_gap", r.relative_gap},
                              {"bracket", {r.bracket_lo, r.bracket_hi}},
                              {"in_bracket", r.in_bracket}});
            const ProbeRow& last = rows.back();
            const bool probe_ok = last.degenerate ? last.in_bracket : last.relative_gap <= pc.tolerance;
            report["consistency"] = {{"rows", pj}, {"tolerance", pc.tolerance}, {"passed", probe_ok}};
            ok = ok && probe_ok;
        }
        report["passed"] = ok;
        m_["timings_s"]["validate"] = seconds_since(t0);
        m_["results"]["validate"] = report;
        log(std::string("validation ") + (ok ? "passed" : "FAILED"));
        if (wants("json")) emit("validation.json", report.dump(2) + "\n");
        if (!ok) validation_failed_ = true;
    }

    Subcommand sub_;
    const RunConfig& cfg_;
    const RunOptions& opts_;
    std::string dir_;
    unsigned threads_ = 1;
    std::uint64_t seed_ = 1;
    json m_;
    bool validation_failed_ = false;

    std::shared_ptr<const Problem> problem_;
    std::shared_ptr<const SpaceTimeLattice> lattice_;
    std::shared_ptr<const ValueField> field_;
};

}  // namespace

RunManifest run(Subcommand subcommand, const RunConfig& config, const RunOptions& options) {
    return Pipeline(subcommand, config, options).execute();
}

}  // namespace tow
