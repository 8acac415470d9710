#pragma once

// Command implementations behind the srkit executable. Each returns the
// process exit code and writes human-readable output to `out`, diagnostics to
// `err`.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "srkit/config.hpp"
#include "srkit/gradcheck.hpp"

namespace srkit {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
};

struct TrainArgs {
  std::string config_path;  // empty: all defaults
  std::string checkpoint_out = "model.srck";
  std::string history_out = "history.csv";
};
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

/// Test accuracy of a checkpoint. `dataset_seed` overrides the stored data seed;
/// `ablate` zeroes the memory bank first.
int cmd_eval(const std::string& checkpoint, std::optional<std::uint64_t> dataset_seed, bool ablate, std::ostream& out,
             std::ostream& err);

/// SR block parameter count and its overhead relative to `baseline` (or to the
/// configured host without SR).
int cmd_params(const std::string& config_path, std::optional<std::size_t> baseline, std::ostream& out,
               std::ostream& err);

int cmd_gradcheck(GradcheckSize size, std::uint64_t seed, std::ostream& out, std::ostream& err,
                  const GradcheckHooks& hooks = {});

struct BenchResult {
  double no_sr_ms = 0.0;
  double zero_memory_ms = 0.0;
  double filled_memory_ms = 0.0;
};

/// Median eval-mode forward time over `repeats` runs for the host without SR,
/// with a zero-memory SR block and with a filled memory bank. The SR variants
/// use the configured insertion stage, or stage 3 when none is set.
BenchResult run_bench(const RunConfig& cfg, int repeats);

int cmd_bench(const std::string& config_path, int repeats, std::ostream& out, std::ostream& err);

/// Writes activations.csv, delta.csv, ablation.csv, memory_means.csv and
/// memory_block_<i>.pgm into `outdir`.
int cmd_inspect(const std::string& checkpoint, std::optional<std::uint64_t> dataset_seed, const std::string& outdir,
                std::ostream& out, std::ostream& err);

/// SRKIT_THREADS, defaulting to 1.
int threads_from_env();

}  // namespace srkit
