#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "tow/checksum.hpp"
#include "tow/config.hpp"
#include "tow/run.hpp"

using namespace tow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
    return json::parse(R"({
        "parameters": {"p": 2, "n": 1, "eps": 0.2, "T": 0.1},
        "domain": {"kind": "interval", "lo": -1, "hi": 1},
        "data": {"F": 0.75, "psi": -1}
    })");
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("towgame_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode parse_failure(const std::string& text, std::string* message = nullptr) {
    try {
        (void)parse_config(text);
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.code();
    }
    FAIL("config was accepted");
    return ErrorCode::IoError;
}

int exit_status(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json simulation_config(const fs::path& out) {
    json c = json::parse(R"({
        "parameters": {"p": 3, "n": 1, "eps": 0.2, "T": 0.2},
        "domain": {"kind": "interval", "lo": -1, "hi": 1},
        "data": {"F": {"kind": "quadratic", "hessian": -2, "offset": 1},
                 "psi": {"kind": "quadratic", "hessian": -2, "offset": 0.8}},
        "simulation": {"episodes": 300, "seed": 5, "starts": [[0.0], [0.4]], "start_level": 6}
    })");
    c["output"] = {{"directory", out.string()}};
    return c;
}

}  // namespace

TEST_CASE("minimal config") {
    const RunConfig c = parse_config(minimal().dump());
    CHECK(c.p == 2.0);
    CHECK(c.n == 1);
    CHECK(c.eps == 0.2);
    CHECK(c.horizon == 0.1);
    CHECK(c.h_ratio == 8.0);
    CHECK(c.domain->kind() == Domain::Kind::Box);
    CHECK(c.boundary.lateral(Point{0.3}, 0.0) == 0.75);
    CHECK(c.obstacle.psi(Point{0.3}, 0.0) == -1.0);
    CHECK_FALSE(c.simulation.has_value());
    CHECK(c.parameters().alpha == 0.0);
}

TEST_CASE("config rejects p below 2") {
    json j = minimal();
    j["parameters"]["p"] = 1.5;
    std::string msg;
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);
    CHECK(msg.find("p ≥ 2") != std::string::npos);
}

TEST_CASE("config rejects unknown names and keys") {
    json j = minimal();
    j["data"]["psi"] = {{"kind", "paraboloid"}};
    std::string msg;
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);
    CHECK(msg.find("data.psi") != std::string::npos);
    CHECK(msg.find("paraboloid") != std::string::npos);

    j = minimal();
    j["parameters"]["epsilon"] = 0.1;
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);
    CHECK(msg.find("epsilon") != std::string::npos);

    j = minimal();
    j["domain"]["kind"] = "torus";
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);

    j = minimal();
    j["parameters"]["h_ratio"] = 3;
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);
    CHECK(msg.find("h_ratio") != std::string::npos);

    j = minimal();
    j["parameters"]["n"] = 2;
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);

    j = minimal();
    j["simulation"] = {{"starts", {{0.0}}}, {"player_I", "clairvoyant"}};
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);

    j = minimal();
    j["study"] = {{"eps_ladder", {0.1, 0.2}}};
    CHECK(parse_failure(j.dump(), &msg) == ErrorCode::ValidationError);
}

TEST_CASE("malformed text reports a location") {
    const std::string text = "{\n  \"parameters\": {\"p\": 2,,\n}";
    std::string msg;
    CHECK(parse_failure(text, &msg) == ErrorCode::ParseError);
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorCode::ParseError) == 2);
    CHECK(exit_code_for(ErrorCode::ValidationError) == 2);
    CHECK(exit_code_for(ErrorCode::InvalidParameter) == 2);
    CHECK(exit_code_for(ErrorCode::Incompatible) == 2);
    CHECK(exit_code_for(ErrorCode::NonStabilizing) == 3);
    CHECK(exit_code_for(ErrorCode::StencilTooSmall) == 3);
    CHECK(exit_code_for(ErrorCode::IoError) == 3);
    CHECK(subcommand_from("simulate") == Subcommand::Simulate);
    CHECK_FALSE(subcommand_from("plot").has_value());
}

TEST_CASE("sha256 test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("solve on constant data writes field and manifest") {
    const fs::path out = scratch("solve");
    json j = minimal();
    j["output"] = {{"directory", out.string()}};
    const RunManifest m = run(Subcommand::Solve, parse_config(j.dump()));
    CHECK(m.exit_code == 0);
    const json doc = json::parse(slurp(out / "manifest.json"));
    CHECK(doc == m.document);
    CHECK(doc.at("status") == "complete");
    CHECK(doc.at("pipeline") == json::array({"solve"}));
    CHECK(doc.at("residual").get<double>() <= 1e-12);
    CHECK(doc.at("derived").at("M") == 5);
    CHECK(doc.at("derived").at("alpha") == 0.0);
    CHECK(doc.at("config") == j);
    CHECK(doc.at("software").at("version") == std::string(software_version()));

    std::ifstream csv(out / "field.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "level,t,node,class,x1,u");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        const double u = std::stod(line.substr(line.rfind(',') + 1));
        REQUIRE(u == 0.75);
        ++rows;
    }
    CHECK(rows > 0);
    for (const auto& f : doc.at("files")) {
        const fs::path p = out / f.at("path").get<std::string>();
        CHECK(fs::exists(p));
        CHECK(f.at("sha256") == sha256_file(p.string()));
        CHECK(f.at("bytes") == fs::file_size(p));
    }
}

TEST_CASE("failures are recorded in the manifest") {
    const fs::path out = scratch("incompatible");
    json j = minimal();
    j["data"]["psi"] = 2.0;
    j["output"] = {{"directory", out.string()}};
    const RunManifest m = run(Subcommand::Solve, parse_config(j.dump()));
    CHECK(m.exit_code == 2);
    const json doc = json::parse(slurp(out / "manifest.json"));
    CHECK(doc.at("status") == "incomplete");
    CHECK(doc.at("failure").at("code") == "Incompatible");
    CHECK_FALSE(doc.at("failure").at("message").get<std::string>().empty());

    const fs::path out2 = scratch("nosim");
    json k = minimal();
    k["output"] = {{"directory", out2.string()}};
    CHECK(run(Subcommand::Simulate, parse_config(k.dump())).exit_code == 2);
}

TEST_CASE("simulate is byte-identical for the same seed") {
    const fs::path a = scratch("sim_a"), b = scratch("sim_b"), c = scratch("sim_c");
    RunOptions quiet;
    quiet.quiet = true;
    const RunManifest ma = run(Subcommand::Simulate, parse_config(simulation_config(a).dump()), quiet);
    RunOptions threaded = quiet;
    threaded.threads = 3;
    const RunManifest mb = run(Subcommand::Simulate, parse_config(simulation_config(b).dump()), threaded);
    REQUIRE(ma.exit_code == 0);
    REQUIRE(mb.exit_code == 0);
    CHECK(ma.document.at("pipeline") == json::array({"solve", "simulate"}));
    for (const char* f : {"episodes_0.jsonl", "episodes_1.jsonl", "estimates.json", "field.csv"}) {
        CAPTURE(f);
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(ma.document.at("files") == mb.document.at("files"));

    RunOptions reseeded = quiet;
    reseeded.seed = 6;
    const RunManifest mc = run(Subcommand::Simulate, parse_config(simulation_config(c).dump()), reseeded);
    CHECK(mc.document.at("overrides").at("seed") == 6);
    CHECK(slurp(a / "episodes_0.jsonl") != slurp(c / "episodes_0.jsonl"));

    const json est = json::parse(slurp(a / "estimates.json"));
    REQUIRE(est.size() == 2);
    CHECK(est[0].at("seed") == 5);
    CHECK(est[1].at("seed") == 6);
    CHECK(est[0].at("episodes") == 300);
}

TEST_CASE("converge on the sine instance is monotone") {
    const fs::path out = scratch("converge");
    const json j = json::parse(R"({
        "parameters": {"p": 2, "n": 1, "eps": 0.1, "T": 0.25},
        "domain": {"kind": "interval", "lo": 0, "hi": 1},
        "data": {"F": 0, "F_initial": {"kind": "sine", "frequency": 1}, "psi": -10},
        "study": {"eps_ladder": [0.2, 0.1, 0.05]}
    })");
    json k = j;
    k["output"] = {{"directory", out.string()}};
    const RunManifest m = run(Subcommand::Converge, parse_config(k.dump()));
    CHECK(m.exit_code == 0);
    const json conv = json::parse(slurp(out / "convergence.json"));
    CHECK(conv.at("verdict") == "MONOTONE");
    CHECK(fs::exists(out / "convergence.csv"));
    CHECK(slurp(out / "convergence_long.csv").rfind("series,eps,error\n", 0) == 0);
}

TEST_CASE("validate reports each check") {
    const fs::path out = scratch("validate");
    json j = json::parse(R"({
        "parameters": {"p": 3, "n": 1, "eps": 0.2, "T": 0.1},
        "domain": {"kind": "interval", "lo": -1, "hi": 1},
        "data": {"F": {"kind": "affine", "slope": 0.5}, "psi": -10},
        "validate": {"comparison_instances": 3, "modulus_factor": 1.5,
                     "probe": {"phi": {"kind": "quadratic", "hessian": 1}, "x": [0.5], "eps_ladder": [0.1, 0.05]}}
    })");
    j["output"] = {{"directory", out.string()}};
    const RunManifest m = run(Subcommand::Validate, parse_config(j.dump()));
    const json v = json::parse(slurp(out / "validation.json"));
    CHECK(v.at("fixed_point").at("passed") == true);
    CHECK(v.at("comparison").at("passed") == true);
    CHECK(v.at("consistency").at("passed") == true);
    CHECK(v.at("modulus").at("passed") == true);
    CHECK(m.exit_code == 0);

    // a consistency tolerance below the discretisation error fails the run
    j["validate"]["probe"]["phi"] = {{"kind", "sine"}, {"frequency", 1}, {"phase", 0.3}};
    j["validate"]["probe"]["tolerance"] = 1e-6;
    const RunManifest f = run(Subcommand::Validate, parse_config(j.dump()));
    CHECK(f.exit_code == 4);
    CHECK(f.document.at("status") == "failed_validation");
}

TEST_CASE("command line front end") {
    const std::string exe = TOWGAME_EXE;
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    json j = minimal();
    j["output"] = {{"directory", (dir / "unused").string()}};
    std::ofstream(dir / "ok.json") << j.dump();
    std::ofstream(dir / "broken.json") << "{ \"parameters\": ";
    json bad = minimal();
    bad["data"]["psi"] = 5.0;
    std::ofstream(dir / "incompatible.json") << bad.dump();

    CHECK(exit_status(exe + " solve --config " + (dir / "ok.json").string() + " --out " + (dir / "o1").string() +
                      " --quiet") == 0);
    CHECK(fs::exists(dir / "o1" / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / "unused"));
    CHECK(exit_status(exe + " solve --config " + (dir / "broken.json").string()) == 2);
    CHECK(exit_status(exe + " solve --config " + (dir / "incompatible.json").string() + " --out " +
                      (dir / "o2").string()) == 2);
    CHECK(exit_status(exe + " solve") == 2);
    CHECK(exit_status(exe + " frobnicate --config " + (dir / "ok.json").string()) == 2);
    CHECK(exit_status(exe + " --version") == 0);
}
