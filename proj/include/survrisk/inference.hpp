#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace survrisk::inference {

// A scalar statistic of the subjects listed by index (repeats allowed).
// Returns nullopt, or throws UndefinedMetricError, when undefined on that
// resample.
using Metric = std::function<std::optional<double>(std::span<const std::size_t>)>;

struct BootstrapOptions {
  std::size_t n_resamples = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  // Replicates are evaluated on this many threads; results do not depend on it.
  unsigned n_threads = 1;
  // More undefined replicates than this fraction raise a reliability error.
  double max_undefined_fraction = 0.10;
};

struct Replicate {
  std::size_t index = 0;
  bool defined = false;
  double value_a = 0.0;
  double value_b = 0.0;  // only for paired runs
  double value = 0.0;    // value_a, or value_a - value_b for paired runs
};

struct BootstrapResult {
  double point_estimate = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t n_resamples = 0;
  std::size_t n_effective = 0;
  std::size_t n_undefined = 0;
  std::uint64_t seed = 0;
  bool paired = false;
  std::vector<Replicate> replicates;
};

// Resample index sets, drawn sequentially from the seed before any metric is
// evaluated.
std::vector<std::vector<std::size_t>> resample_schedule(std::size_t n_subjects,
                                                        std::size_t n_resamples,
                                                        std::uint64_t seed);

// Nearest-rank percentile interval: the order statistics at 1-based ranks
// ceil(alpha/2 * m) and ceil((1 - alpha/2) * m), clamped to [1, m].
std::pair<double, double> percentile_interval(std::vector<double> values, double alpha);

// Case-level bootstrap percentile interval of `metric`.
BootstrapResult bootstrap_ci(const Metric& metric, std::size_t n_subjects,
                             const BootstrapOptions& options = {});

// Paired bootstrap of metric_a - metric_b; both metrics see the same index set
// in every replicate.
BootstrapResult bootstrap_diff_ci(const Metric& metric_a, const Metric& metric_b,
                                  std::size_t n_subjects, const BootstrapOptions& options = {});

// replicate_index,value_a,value_b,diff (value_b and diff empty for unpaired
// runs, all values empty for undefined replicates).
void write_replicates_csv(const std::string& path, const BootstrapResult& result);

}  // namespace survrisk::inference
