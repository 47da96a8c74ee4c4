#pragma once

// Runs the graspkit binary through the shell and captures its output.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "graspkit/common.hpp"

namespace testing_support {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::string& args, const std::filesystem::path& scratch,
                         const std::string& env = "") {
  std::filesystem::create_directories(scratch);
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = (env.empty() ? "" : env + " ") + std::string(GRASPKIT_CLI) + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = graspkit::read_file(out);
  r.err = graspkit::read_file(err);
  return r;
}

}  // namespace testing_support
