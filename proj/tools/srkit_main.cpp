#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "srkit/commands.hpp"
#include "srkit/kernels.hpp"

int main(int argc, char** argv) {
  using namespace srkit;

  CLI::App app{"srkit: SR memory blocks on a small CNN host"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train on the synthetic dataset; writes a checkpoint and history CSV");
  train->add_option("-c,--config", train_args.config_path, "JSON run config (omit for defaults)");
  train->add_option("-o,--out", train_args.checkpoint_out, "Checkpoint path")->capture_default_str();
  train->add_option("--history", train_args.history_out, "History CSV path")->capture_default_str();

  std::string ckpt;
  std::optional<std::uint64_t> dataset_seed;
  bool ablate = false;
  auto* eval = app.add_subcommand("eval", "Test accuracy of a checkpoint");
  eval->add_option("checkpoint", ckpt, "Checkpoint path")->required();
  eval->add_option("--dataset-seed", dataset_seed, "Override the stored data seed");
  eval->add_flag("--ablate", ablate, "Zero the SR memory bank before evaluating");

  std::string config_path;
  std::optional<std::size_t> baseline;
  auto* params = app.add_subcommand("params", "SR parameter count and overhead");
  params->add_option("-c,--config", config_path, "JSON run config");
  params->add_option("--baseline", baseline, "Baseline parameter count for the overhead");

  std::string size = "micro";
  std::uint64_t seed = 0;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--size", size, "micro or small")->check(CLI::IsMember({"micro", "small"}))->capture_default_str();
  grad->add_option("--seed", seed, "Case seed")->capture_default_str();

  int repeats = 20;
  auto* bench = app.add_subcommand("bench", "Forward timing with and without SR");
  bench->add_option("-c,--config", config_path, "JSON run config");
  bench->add_option("-r,--repeats", repeats, "Timed repeats per variant")->capture_default_str();

  std::string outdir = "inspect";
  auto* inspect = app.add_subcommand("inspect", "Export activation, delta, ablation and memory analyses");
  inspect->add_option("checkpoint", ckpt, "Checkpoint path")->required();
  inspect->add_option("--dataset-seed", dataset_seed, "Override the stored data seed");
  inspect->add_option("-o,--outdir", outdir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    ops::set_threads(threads_from_env());
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (*train) return cmd_train(train_args, std::cout, std::cerr);
  if (*eval) return cmd_eval(ckpt, dataset_seed, ablate, std::cout, std::cerr);
  if (*params) return cmd_params(config_path, baseline, std::cout, std::cerr);
  if (*grad) {
    return cmd_gradcheck(size == "small" ? GradcheckSize::small : GradcheckSize::micro, seed, std::cout, std::cerr);
  }
  if (*bench) return cmd_bench(config_path, repeats, std::cout, std::cerr);
  return cmd_inspect(ckpt, dataset_seed, outdir, std::cout, std::cerr);
}
