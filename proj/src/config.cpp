#include "tow/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace tow {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::ValidationError, where.empty() ? what : where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) invalid(where, "must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) invalid(where, "unknown key '" + key + "'");
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double number(const json& j, const char* key, const std::string& where, std::optional<double> fallback = {}) {
    const json* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        invalid(where, std::string("missing '") + key + "'");
    }
    if (!v->is_number()) invalid(where + "." + key, "must be a number");
    return v->get<double>();
}

std::int64_t integer(const json& j, const char* key, const std::string& where, std::optional<std::int64_t> fallback = {}) {
    const json* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        invalid(where, std::string("missing '") + key + "'");
    }
    if (!v->is_number_integer()) invalid(where + "." + key, "must be an integer");
    return v->get<std::int64_t>();
}

std::string text(const json& j, const char* key, const std::string& where, std::optional<std::string> fallback = {}) {
    const json* v = find(j, key);
    if (!v) {
        if (fallback) return *fallback;
        invalid(where, std::string("missing '") + key + "'");
    }
    if (!v->is_string()) invalid(where + "." + key, "must be a string");
    return v->get<std::string>();
}

Point point(const json& v, int n, const std::string& where) {
    if (n == 1 && v.is_number()) return Point{v.get<double>()};
    if (!v.is_array() || static_cast<int>(v.size()) != n) invalid(where, "must be a list of " + std::to_string(n) + " numbers");
    Point p(n);
    for (int i = 0; i < n; ++i) {
        if (!v[i].is_number()) invalid(where, "must hold numbers");
        p[i] = v[i].get<double>();
    }
    return p;
}

std::vector<double> ladder(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) invalid(where, "must be a non-empty list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number() || !(e.get<double>() > 0.0)) invalid(where, "entries must be positive numbers");
        out.push_back(e.get<double>());
    }
    for (std::size_t k = 1; k < out.size(); ++k)
        if (!(out[k] < out[k - 1])) invalid(where, "must be strictly decreasing");
    return out;
}

Expression expression(const json& data, const char* key, int n, const std::string& where) {
    const json* v = find(data, key);
    if (!v) invalid(where, std::string("missing '") + key + "'");
    try {
        return Expression::from_json(*v, n);
    } catch (const Error& e) {
        invalid(where + "." + key, e.detail());
    }
}

std::shared_ptr<const Domain> domain(const json& j, int n) {
    const std::string where = "domain";
    const std::string kind = text(j, "kind", where);
    try {
        if (kind == "interval") {
            only_keys(j, where, {"kind", "lo", "hi", "delta"});
            if (n != 1) invalid(where, "interval domains need n = 1");
            return std::make_shared<const Domain>(
                Domain::interval(number(j, "lo", where), number(j, "hi", where), number(j, "delta", where, 0.5)));
        }
        if (kind == "box") {
            only_keys(j, where, {"kind", "lo", "hi", "delta"});
            if (!find(j, "lo") || !find(j, "hi")) invalid(where, "box needs 'lo' and 'hi'");
            return std::make_shared<const Domain>(Domain::box(point(j["lo"], n, where + ".lo"),
                                                              point(j["hi"], n, where + ".hi"),
                                                              number(j, "delta", where, 0.5)));
        }
        if (kind == "ball") {
            only_keys(j, where, {"kind", "center", "radius", "delta"});
            if (!find(j, "center")) invalid(where, "ball needs 'center'");
            return std::make_shared<const Domain>(Domain::ball(point(j["center"], n, where + ".center"),
                                                               number(j, "radius", where),
                                                               number(j, "delta", where, 0.5)));
        }
        if (kind == "annulus") {
            only_keys(j, where, {"kind", "center", "inner_radius", "outer_radius", "delta"});
            if (!find(j, "center")) invalid(where, "annulus needs 'center'");
            return std::make_shared<const Domain>(Domain::annulus(
                point(j["center"], n, where + ".center"), number(j, "inner_radius", where),
                number(j, "outer_radius", where), number(j, "delta", where, -1.0)));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ValidationError) throw;
        invalid(where, e.detail());
    }
    invalid(where + ".kind", "unknown domain kind '" + kind + "'");
}

StrategyConfig strategy(const json& j, int n, const std::string& where) {
    StrategyConfig s;
    if (j.is_string()) {
        s.kind = j.get<std::string>();
    } else {
        only_keys(j, where, {"kind", "z"});
        s.kind = text(j, "kind", where);
        if (const json* z = find(j, "z")) s.target = point(*z, n, where + ".z");
    }
    static const std::set<std::string> kinds{"value_greedy", "pull_toward", "pull_away", "stationary"};
    if (!kinds.count(s.kind)) invalid(where + ".kind", "unknown strategy '" + s.kind + "'");
    if ((s.kind == "pull_toward" || s.kind == "pull_away") && !s.target)
        invalid(where, s.kind + " needs a target 'z'");
    return s;
}

SimulationConfig simulation(const json& j, int n) {
    const std::string where = "simulation";
    only_keys(j, where, {"episodes", "seed", "starts", "start_level", "player_I", "player_II", "eta",
                         "extra_samples", "stopping", "horizon_steps", "write_episodes"});
    SimulationConfig s;
    const auto episodes = integer(j, "episodes", where, 1000);
    if (episodes < 1) invalid(where + ".episodes", "must be at least 1");
    s.episodes = static_cast<std::size_t>(episodes);
    const auto seed = integer(j, "seed", where, 1);
    if (seed < 0) invalid(where + ".seed", "must be nonnegative");
    s.seed = static_cast<std::uint64_t>(seed);
    const json* starts = find(j, "starts");
    if (!starts || !starts->is_array() || starts->empty()) invalid(where, "'starts' must be a non-empty list of points");
    for (std::size_t k = 0; k < starts->size(); ++k)
        s.starts.push_back(point((*starts)[k], n, where + ".starts[" + std::to_string(k) + "]"));
    s.start_level = static_cast<int>(integer(j, "start_level", where, -1));
    if (const json* v = find(j, "player_I")) s.player_I = strategy(*v, n, where + ".player_I");
    if (const json* v = find(j, "player_II")) s.player_II = strategy(*v, n, where + ".player_II");
    s.eta = number(j, "eta", where, -1.0);
    if (find(j, "eta") && !(s.eta > 0.0)) invalid(where + ".eta", "must be positive");
    s.extra_samples = static_cast<int>(integer(j, "extra_samples", where, 16));
    if (s.extra_samples < 0) invalid(where + ".extra_samples", "must be nonnegative");
    s.stopping = text(j, "stopping", where, std::string("contact_or_boundary"));
    if (s.stopping != "contact_or_boundary" && s.stopping != "boundary_only" && s.stopping != "fixed_horizon")
        invalid(where + ".stopping", "unknown stopping rule '" + s.stopping + "'");
    s.horizon_steps = static_cast<int>(integer(j, "horizon_steps", where, 0));
    if (s.stopping == "fixed_horizon" && s.horizon_steps < 1) invalid(where + ".horizon_steps", "must be at least 1");
    if (const json* v = find(j, "write_episodes")) {
        if (!v->is_boolean()) invalid(where + ".write_episodes", "must be true or false");
        s.write_episodes = v->get<bool>();
    }
    return s;
}

ValidateConfig validate_block(const json& j, int n) {
    const std::string where = "validate";
    only_keys(j, where, {"comparison_instances", "modulus_factor", "probe"});
    ValidateConfig v;
    v.comparison_instances = static_cast<int>(integer(j, "comparison_instances", where, 20));
    if (v.comparison_instances < 0) invalid(where + ".comparison_instances", "must be nonnegative");
    v.modulus_factor = number(j, "modulus_factor", where, 1.5);
    if (!(v.modulus_factor >= 1.0)) invalid(where + ".modulus_factor", "must be at least 1");
    if (const json* pj = find(j, "probe")) {
        const std::string pw = where + ".probe";
        only_keys(*pj, pw, {"phi", "x", "t", "eps_ladder", "h_ratio", "tolerance"});
        ProbeConfig pc;
        if (!find(*pj, "phi")) invalid(pw, "missing 'phi'");
        pc.phi = (*pj)["phi"];
        try {
            Expression::from_json(pc.phi, n);
        } catch (const Error& e) {
            invalid(pw + ".phi", e.detail());
        }
        if (!find(*pj, "x")) invalid(pw, "missing 'x'");
        pc.x = point((*pj)["x"], n, pw + ".x");
        pc.t = number(*pj, "t", pw, 0.5);
        if (!find(*pj, "eps_ladder")) invalid(pw, "missing 'eps_ladder'");
        pc.eps_ladder = ladder((*pj)["eps_ladder"], pw + ".eps_ladder");
        pc.h_ratio = number(*pj, "h_ratio", pw, 8.0);
        if (!(pc.h_ratio >= 4.0)) invalid(pw + ".h_ratio", "eps/h >= 4 required");
        pc.tolerance = number(*pj, "tolerance", pw, 0.05);
        v.probe = pc;
    }
    return v;
}

std::string locate(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(byte > 0 ? byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::shared_ptr<const Problem> RunConfig::problem() const { return problem(eps); }

std::shared_ptr<const Problem> RunConfig::problem(double eps_override) const {
    return std::make_shared<const Problem>(
        Problem{make_parameters(p, n, eps_override, horizon), domain, boundary, obstacle});
}

RunConfig parse_config(const std::string& source) {
    json doc;
    try {
        doc = json::parse(source);
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
        throw Error(ErrorCode::ParseError, locate(source, e.byte) + ": " + msg);
    }
    only_keys(doc, "", {"parameters", "domain", "data", "simulation", "study", "validate", "output", "threads"});
    RunConfig c;
    c.source = doc;

    if (!find(doc, "parameters")) invalid("", "missing 'parameters' block");
    const json& pj = doc["parameters"];
    only_keys(pj, "parameters", {"p", "n", "eps", "T", "h_ratio"});
    c.p = number(pj, "p", "parameters");
    if (!(c.p >= 2.0)) invalid("parameters.p", "p ≥ 2 required");
    c.n = static_cast<int>(integer(pj, "n", "parameters"));
    if (c.n < 1 || c.n > kMaxDim) invalid("parameters.n", "n must be between 1 and 3");
    c.eps = number(pj, "eps", "parameters");
    if (!(c.eps > 0.0)) invalid("parameters.eps", "eps > 0 required");
    c.horizon = number(pj, "T", "parameters");
    if (!(c.horizon > 0.0)) invalid("parameters.T", "T > 0 required");
    c.h_ratio = number(pj, "h_ratio", "parameters", 8.0);
    if (!(c.h_ratio >= 4.0)) invalid("parameters.h_ratio", "eps/h >= 4 required");

    if (!find(doc, "domain")) invalid("", "missing 'domain' block");
    c.domain = domain(doc["domain"], c.n);

    if (!find(doc, "data")) invalid("", "missing 'data' block");
    const json& dj = doc["data"];
    only_keys(dj, "data", {"F", "F_initial", "psi", "C1", "C2"});
    c.boundary.lateral = expression(dj, "F", c.n, "data");
    c.boundary.initial = find(dj, "F_initial") ? expression(dj, "F_initial", c.n, "data") : c.boundary.lateral;
    c.boundary.lipschitz = number(dj, "C1", "data", 1.0);
    c.obstacle.psi = expression(dj, "psi", c.n, "data");
    c.obstacle.lipschitz = number(dj, "C2", "data", 1.0);
    if (c.boundary.lipschitz < 0.0) invalid("data.C1", "must be nonnegative");
    if (c.obstacle.lipschitz < 0.0) invalid("data.C2", "must be nonnegative");

    if (const json* sj = find(doc, "simulation")) c.simulation = simulation(*sj, c.n);
    if (const json* st = find(doc, "study")) {
        only_keys(*st, "study", {"eps_ladder"});
        if (const json* l = find(*st, "eps_ladder")) c.eps_ladder = ladder(*l, "study.eps_ladder");
    }
    if (const json* vj = find(doc, "validate")) c.validate = validate_block(*vj, c.n);
    if (const json* oj = find(doc, "output")) {
        only_keys(*oj, "output", {"directory", "formats"});
        c.output_directory = text(*oj, "directory", "output", std::string("out"));
        if (const json* f = find(*oj, "formats")) {
            if (!f->is_array()) invalid("output.formats", "must be a list");
            c.formats.clear();
            for (const auto& e : *f) {
                if (!e.is_string() || (e != "csv" && e != "json")) invalid("output.formats", "entries must be \"csv\" or \"json\"");
                c.formats.push_back(e.get<std::string>());
            }
        }
    }
    if (const json* t = find(doc, "threads")) {
        if (!t->is_number_integer() || t->get<std::int64_t>() < 0) invalid("threads", "must be a nonnegative integer");
        c.threads = static_cast<unsigned>(t->get<std::int64_t>());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace tow
