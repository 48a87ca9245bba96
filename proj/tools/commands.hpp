#pragma once

#include "run_config.hpp"

#include <iosfwd>

namespace fetl::cli {

enum ExitCode : int { kSuccess = 0, kUserError = 1, kNumericalFailure = 2 };

// Each command stages all of its outputs and publishes them together, so a
// failure leaves nothing behind. A one-line summary goes to `log`.
int cmd_generate(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_embeddings(const RunConfig& config, std::ostream& log);
int cmd_transfer(const RunConfig& config, std::ostream& log);
int cmd_detect(const RunConfig& config, std::ostream& log);
int cmd_gradcheck(const RunConfig& config, std::ostream& log);

}  // namespace fetl::cli
