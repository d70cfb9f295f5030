#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace driftbench::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2, kPartialFailure = 3 };

struct CommandOptions {
  std::filesystem::path config;
  int jobs = 0;  // 0: OpenMP default
  std::optional<std::filesystem::path> out;  // overrides output_dir
  std::optional<std::uint64_t> seed_override;
};

// Each command prints a one-line JSON status to `out` on success and a
// structured {"error": {...}} document to `err` on failure.
int cmd_generate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_run(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_grid(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_pca(const CommandOptions& opts, std::ostream& out, std::ostream& err);

// Parses DRIFTBENCH_SEED; nullopt when unset, throws on garbage.
std::optional<std::uint64_t> seed_from_env();

}  // namespace driftbench::cli
