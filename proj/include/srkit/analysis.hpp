#pragma once

// Read-only inspection of a trained host: softmax weights per class, memory
// bank channel means, feature-map change across the SR block and the accuracy
// effect of zeroing the memory.

#include <optional>
#include <string>
#include <vector>

#include "srkit/data.hpp"
#include "srkit/host_net.hpp"

namespace srkit {

struct ActivationRecord {
  std::size_t sample_id = 0;
  int class_label = 0;
  std::vector<float> alpha;
};

inline constexpr int kAllClasses = -1;

struct ActivationStats {
  int class_label = 0;  // kAllClasses for the pooled group
  std::vector<double> mean;
  std::vector<double> std;  // unbiased; zero for a single record
  std::size_t n_samples = 0;
};

struct DeltaStats {
  int class_label = 0;
  std::size_t n_samples = 0;
  std::vector<double> pre_mean;      // per channel, mean of x
  std::vector<double> post_mean;     // per channel, mean of x + recall
  std::vector<double> abs_delta;     // per channel, mean |recall|
  std::vector<double> pre_abs_mean;  // per channel, mean |x|
  /// 100 * abs_delta / pre_abs_mean; NaN when pre_abs_mean < 1e-12.
  std::vector<double> shift_pct;
  /// Average of the finite entries of shift_pct (NaN if none).
  double mean_shift_pct = 0.0;
};

struct SampleFilter {
  std::optional<std::vector<int>> classes;  // unset: every class
  std::optional<std::size_t> per_class_cap;  // first N matching samples per class
};

enum class Grouping { per_class, all };

/// One record per selected sample, in dataset order. Throws ConfigError when
/// the host has no SR block.
std::vector<ActivationRecord> collect_activations(const HostConfig& cfg, const HostParams& params, const Dataset& data,
                                                  const SampleFilter& filter = {});

/// Groups sorted by class label; Grouping::all yields one kAllClasses group.
std::vector<ActivationStats> activation_stats(std::span<const ActivationRecord> records, Grouping group);

/// Largest L1 distance between the mean vectors of any two groups.
double max_pairwise_l1(std::span<const ActivationStats> stats);

/// Per memory block, the mean over channels at each (h, w): [1, 1, h, w].
std::vector<Tensor> memory_channel_means(const SRParams& sr);

/// Compares the feature map entering and leaving the SR block, one entry per
/// class present in the selection.
std::vector<DeltaStats> feature_delta(const HostConfig& cfg, const HostParams& params, const Dataset& data,
                                      const SampleFilter& filter = {});

struct AblationReport {
  float acc_full = 0.0f;
  float acc_ablated = 0.0f;
  float delta = 0.0f;  // acc_full - acc_ablated
};

AblationReport ablation_report(const HostConfig& cfg, const HostParams& params, const Dataset& test);

// File output. CSV layouts:
//   activations.csv  class,block_0..block_{p-1}; per group a mean row then a std row
//   delta.csv        class,channel,pre_mean,post_mean,abs_delta,shift_pct
//   ablation.csv     acc_full,acc_ablated,delta
//   memory_means.csv block,row,col,value
std::string activations_csv(std::span<const ActivationStats> stats, std::size_t p);
std::string delta_csv(std::span<const DeltaStats> stats);
std::string ablation_csv(const AblationReport& report);
std::string memory_means_csv(std::span<const Tensor> maps);
/// Binary 8-bit PGM, min -> 0 and max -> 255 (all zero for a constant map).
std::string pgm_bytes(const Tensor& map);

}  // namespace srkit
