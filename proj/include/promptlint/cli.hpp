#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "promptlint/annotate.hpp"
#include "promptlint/gateway.hpp"
#include "promptlint/scour.hpp"

namespace promptlint {

struct cli_config {
    model_roster roster;
    int scour_k = 3;
    int scour_max_passes = 0;
    std::string rules_path;
    std::string lexicon_path;
    std::string replay_dir;
    std::string api_key_env = "OPENROUTER_API_KEY";
};

/// Load a config file; referenced paths must exist. Throws config_error.
cli_config load_config(const std::string& path);

/// Entry point behind main(). Subcommands: parse, profile, annotate, diff,
/// blocks, lint, scour, report, cost. Returns 0 on success, 1 on usage or
/// validation errors, 2 on gateway or transport errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace promptlint
