#pragma once

#include <optional>
#include <string>

#include "drft/config.hpp"

namespace drft {

// Subcommand bodies shared by the binary and the test suites. Each returns
// a process exit code and reports through stdout/stderr.
int cmd_synth(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg, const std::optional<std::string>& resume_checkpoint);
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
             const std::string& split);
int cmd_gradcheck(const RunConfig& cfg, bool inject_fault);

}  // namespace drft
