#include "srkit/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <ostream>

#include "srkit/analysis.hpp"
#include "srkit/checkpoint.hpp"
#include "srkit/config.hpp"
#include "srkit/io.hpp"
#include "srkit/train.hpp"

namespace srkit {

namespace {

namespace fs = std::filesystem;

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

std::string num(double v, const char* spec = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

void require_writable_dir(const std::string& file) {
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw IoError("output directory '" + parent.string() + "' does not exist");
  }
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string s = "epoch,lr,train_loss,val_acc\n";
  for (const auto& r : rows) {
    s += std::to_string(r.epoch) + "," + num(r.lr) + "," + num(r.train_loss) + "," + num(r.val_acc) + "\n";
  }
  return s;
}

struct Loaded {
  RunConfig cfg;
  HostParams params;
};

Loaded load_model(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  Loaded m{checkpoint_config(ck), {}};
  m.params = checkpoint_params(ck, m.cfg.host);
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

int threads_from_env() {
  const char* s = std::getenv("SRKIT_THREADS");
  if (!s || !*s) return 1;
  char* end = nullptr;
  const long n = std::strtol(s, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("SRKIT_THREADS must be a positive integer, got '") + s + "'");
  return static_cast<int>(n);
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = config_or_default(args.config_path);
    require_writable_dir(args.checkpoint_out);
    require_writable_dir(args.history_out);

    const SynthData data = synth_generate(cfg.synth);
    const TrainResult res = train(cfg.host, cfg.train, data);
    for (const auto& r : res.history) {
      out << "epoch " << r.epoch << " lr " << num(r.lr, "%.6g") << " train_loss " << num(r.train_loss, "%.6f")
          << " val_acc " << num(r.val_acc, "%.4f") << "\n";
    }
    save_checkpoint(args.checkpoint_out, make_checkpoint(cfg, res.best));
    write_file_atomic(args.history_out, history_csv(res.history));

    const float test_acc = evaluate(cfg.host, res.best, data.test);
    out << "best_epoch " << res.best_epoch << "\n";
    out << "val_acc " << num(res.best_val_acc, "%.6f") << "\n";
    out << "test_acc " << num(test_acc, "%.6f") << "\n";
    return kExitOk;
  });
}

int cmd_eval(const std::string& checkpoint, std::optional<std::uint64_t> dataset_seed, bool ablate, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    Loaded m = load_model(checkpoint);
    if (dataset_seed) m.cfg.synth.seed = *dataset_seed;
    if (ablate) {
      if (m.params.sr) {
        m.params.sr = sr_ablate(*m.params.sr);
      } else {
        err << "warning: checkpoint has no SR block; --ablate has no effect\n";
      }
    }
    const SynthData data = synth_generate(m.cfg.synth);
    out << "test_acc " << num(evaluate(m.cfg.host, m.params, data.test), "%.6f") << "\n";
    return kExitOk;
  });
}

int cmd_params(const std::string& config_path, std::optional<std::size_t> baseline, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = config_or_default(config_path);
    const auto sr = cfg.sr_block();
    if (!sr) throw ConfigError("config key 'sr': no SR block configured (set sr_insert or sr.c/h/w)");
    HostConfig bare = cfg.host;
    bare.sr_insert.reset();
    const std::size_t host_without = host_param_count(bare);
    const std::size_t sr_count = sr_param_count(*sr);
    const std::size_t base = baseline.value_or(host_without);
    if (base == 0) throw ConfigError("baseline must be positive");

    out << "sr_params " << sr_count << "\n";
    out << "host_params_without_sr " << host_without << "\n";
    out << "host_params_with_sr " << host_without + sr_count << "\n";
    out << "baseline " << base << (baseline ? "" : " (host without SR)") << "\n";
    out << "overhead " << num(sr_overhead(*sr, base), "%.2f") << "%\n";
    out << "overhead_exact " << num(sr_overhead_exact(*sr, base), "%.6f") << "%\n";
    return kExitOk;
  });
}

int cmd_gradcheck(GradcheckSize size, std::uint64_t seed, std::ostream& out, std::ostream& err,
                  const GradcheckHooks& hooks) {
  return guarded(err, [&] {
    const GradcheckReport rep = run_gradcheck(size, seed, hooks);
    for (const auto& e : rep.entries) {
      char line[160];
      std::snprintf(line, sizeof line, "%-22s max_rel_err %.3e  checked %zu  skipped %zu  %s\n", e.op.c_str(),
                    e.max_rel_error, e.checked, e.skipped, e.passed() ? "ok" : "FAIL");
      out << line;
    }
    out << (rep.passed() ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << num(kGradcheckTolerance, "%g")
        << ")\n";
    return rep.passed() ? kExitOk : kExitFailure;
  });
}

BenchResult run_bench(const RunConfig& cfg, int repeats) {
  if (repeats < 3) throw ConfigError("repeats must be >= 3, got " + std::to_string(repeats));
  HostConfig with_sr = cfg.host;
  if (!with_sr.sr_insert) with_sr.sr_insert = 3;
  with_sr.validate();
  HostConfig without_sr = cfg.host;
  without_sr.sr_insert.reset();

  Rng rng(cfg.train.seed);
  const HostParams p_without = host_init(without_sr, rng);
  const HostParams p_zero = host_init(with_sr, rng);
  HostParams p_filled = p_zero;
  for (float& v : p_filled.sr->memory.data()) v = rng.symmetric(0.1f);

  Tensor x(Shape{cfg.train.batch, with_sr.in_c, with_sr.in_h, with_sr.in_w});
  for (float& v : x.data()) v = rng.normal();

  struct Variant {
    const HostConfig* cfg;
    const HostParams* params;
    std::vector<double> ms;
  };
  std::array<Variant, 3> vs{{{&without_sr, &p_without, {}}, {&with_sr, &p_zero, {}}, {&with_sr, &p_filled, {}}}};
  Rng unused(0);
  for (auto& v : vs) host_forward(*v.cfg, *v.params, x, Mode::eval, unused);  // warm-up
  // Interleaved so slow drift in machine load hits every variant alike.
  for (int r = 0; r < repeats; ++r) {
    for (auto& v : vs) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor y = host_forward(*v.cfg, *v.params, x, Mode::eval, unused);
      const auto t1 = std::chrono::steady_clock::now();
      v.ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  return {median(vs[0].ms), median(vs[1].ms), median(vs[2].ms)};
}

int cmd_bench(const std::string& config_path, int repeats, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = config_or_default(config_path);
    const BenchResult r = run_bench(cfg, repeats);
    const auto pct = [&](double t) { return num(100.0 * (t - r.no_sr_ms) / r.no_sr_ms, "%.2f"); };
    out << "batch " << cfg.train.batch << " repeats " << repeats << " threads " << ops::threads() << "\n";
    out << "no_sr_ms " << num(r.no_sr_ms, "%.3f") << "\n";
    out << "zero_memory_sr_ms " << num(r.zero_memory_ms, "%.3f") << "  overhead " << pct(r.zero_memory_ms) << "%\n";
    out << "filled_memory_sr_ms " << num(r.filled_memory_ms, "%.3f") << "  overhead " << pct(r.filled_memory_ms)
        << "%\n";
    return kExitOk;
  });
}

int cmd_inspect(const std::string& checkpoint, std::optional<std::uint64_t> dataset_seed, const std::string& outdir,
                std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Loaded m = load_model(checkpoint);
    if (!m.params.sr || !m.cfg.host.sr_insert) throw ConfigError("config key 'sr_insert': checkpoint has no SR block");
    if (dataset_seed) m.cfg.synth.seed = *dataset_seed;
    const SynthData data = synth_generate(m.cfg.synth);
    const SampleFilter filter{std::nullopt, std::size_t{50}};

    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (!fs::is_directory(outdir)) throw IoError("cannot create output directory '" + outdir + "'");
    const fs::path dir(outdir);

    const auto records = collect_activations(m.cfg.host, m.params, data.test, filter);
    auto stats = activation_stats(records, Grouping::per_class);
    const double spread = max_pairwise_l1(stats);
    for (auto& s : activation_stats(records, Grouping::all)) stats.push_back(std::move(s));
    write_file_atomic((dir / "activations.csv").string(), activations_csv(stats, m.params.sr->cfg.p));

    const auto delta = feature_delta(m.cfg.host, m.params, data.test, filter);
    write_file_atomic((dir / "delta.csv").string(), delta_csv(delta));

    const AblationReport abl = ablation_report(m.cfg.host, m.params, data.test);
    write_file_atomic((dir / "ablation.csv").string(), ablation_csv(abl));

    const auto maps = memory_channel_means(*m.params.sr);
    write_file_atomic((dir / "memory_means.csv").string(), memory_means_csv(maps));
    for (std::size_t i = 0; i < maps.size(); ++i) {
      write_file_atomic((dir / ("memory_block_" + std::to_string(i) + ".pgm")).string(), pgm_bytes(maps[i]));
    }

    double shift = 0.0;
    for (const auto& d : delta) shift += d.mean_shift_pct;
    out << "samples " << records.size() << "\n";
    out << "alpha_max_pairwise_l1 " << num(spread, "%.6f") << "\n";
    out << "mean_shift_pct " << num(delta.empty() ? 0.0 : shift / static_cast<double>(delta.size()), "%.4f") << "\n";
    out << "acc_full " << num(abl.acc_full, "%.6f") << " acc_ablated " << num(abl.acc_ablated, "%.6f") << "\n";
    out << "wrote " << 4 + maps.size() << " files to " << outdir << "\n";
    return kExitOk;
  });
}

}  // namespace srkit
