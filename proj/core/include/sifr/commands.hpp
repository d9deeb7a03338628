#pragma once

#include <cstdint>
#include <string>

#include "sifr/config.hpp"

namespace sifr {

/// Flag surface shared by the subcommands; empty string = not given.
struct CliOptions {
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string checkpoint;
  std::string split;
  std::string metric = "3d";  // "3d" or "bev": headline metric for reports
  bool inject_fault = false;  // gradcheck self-test hook
};

/// defaults -> config file -> flag overrides. The synthetic-data seed is
/// slaved to the run seed so one value controls the whole run.
RunConfig resolve_config(const CliOptions& opt);

// Each command prints JSON to stdout (one object per line) and returns 0 on
// success; failures are reported by throwing (the CLI maps exception types
// to exit codes). cmd_gradcheck returns nonzero when a gradient check fails.
int cmd_gen(const CliOptions& opt);
int cmd_train(const CliOptions& opt);
int cmd_eval(const CliOptions& opt);
int cmd_gradcheck(const CliOptions& opt);
int cmd_bench(const CliOptions& opt);

}  // namespace sifr
