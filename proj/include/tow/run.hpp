#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "tow/config.hpp"

namespace tow {

enum class Subcommand { Solve, Simulate, Converge, Validate };

std::string_view to_string(Subcommand s);
std::optional<Subcommand> subcommand_from(std::string_view name);

struct RunOptions {
    std::string out_dir;  // empty keeps output.directory from the config
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool quiet = false;
    std::ostream* log = nullptr;  // progress lines unless quiet
};

/// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitValidation = 4;

int exit_code_for(ErrorCode code);

struct RunManifest {
    nlohmann::json document;
    std::string path;  // where manifest.json was written
    int exit_code = kExitOk;
};

/// Runs one pipeline and writes its artifacts plus manifest.json into the
/// output directory. Module errors are caught and recorded in the manifest
/// ("status": "incomplete", "failure": {code, message}).
RunManifest run(Subcommand subcommand, const RunConfig& config, const RunOptions& options = {});

std::string_view software_version();

}  // namespace tow
