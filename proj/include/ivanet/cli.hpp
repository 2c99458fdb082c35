#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ivanet/evaluate.hpp"

namespace ivanet {

/// Test seam: replaces the model-backed predictor used by `eval`.
struct CliHooks {
    std::function<Predictor(const ParamMap& params, const ModelConfig& cfg, Mode mode)> make_predictor;
};

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on runtime failure, 2 on usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const CliHooks& hooks = {});

}  // namespace ivanet
