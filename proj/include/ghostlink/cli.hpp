#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ghostlink::cli {

/// Runs one subcommand (ingest, generate, train, analyze, rank, predict).
/// args excludes the program name. Summaries go to out, progress and
/// structured errors to err. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ghostlink::cli
