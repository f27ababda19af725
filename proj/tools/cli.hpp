#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kuq::cli {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

/// Version of the CSV column layouts written by the tool.
constexpr int kCsvSchemaVersion = 1;

/// Environment variable naming the default output directory.
constexpr const char* kOutDirEnv = "KUQ_OUT_DIR";

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kuq::cli
