#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "odm/cli/config.hpp"

namespace odm::cli {

enum class Command { Scan, Analyze, Convert, TrainGen, Attack, Evaluate, Report };

std::optional<Command> command_from_string(const std::string& name);
const char* to_string(Command c);

// Runs one pipeline stage; artifacts land under <output_dir>/<stage>/ with the
// config digest embedded. Returns 0 on success and throws odm errors for
// failures (the CLI maps ConfigInvalid to exit 1, everything else to exit 2).
int execute_command(Command cmd, const ExperimentConfig& cfg, std::ostream& log);

}  // namespace odm::cli
