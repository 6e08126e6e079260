#include "survrisk/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"

namespace survrisk::inference {

std::vector<std::vector<std::size_t>> resample_schedule(std::size_t n_subjects,
                                                        std::size_t n_resamples,
                                                        std::uint64_t seed) {
  if (n_subjects == 0) throw DataError("cannot resample an empty cohort");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n_subjects - 1);
  std::vector<std::vector<std::size_t>> schedule(n_resamples);
  for (auto& idx : schedule) {
    idx.resize(n_subjects);
    for (auto& i : idx) i = pick(rng);
  }
  return schedule;
}

std::pair<double, double> percentile_interval(std::vector<double> values, double alpha) {
  if (values.empty()) throw NumericError("percentile interval of an empty replicate set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  // Guard against 0.025 * 1000 landing a hair above 25.
  auto rank = [&](double q) {
    const double r = std::ceil(q * m - 1e-9);
    return static_cast<std::size_t>(std::clamp(r, 1.0, m)) - 1;
  };
  return {values[rank(alpha / 2.0)], values[rank(1.0 - alpha / 2.0)]};
}

namespace {

std::optional<double> evaluate(const Metric& metric, std::span<const std::size_t> idx) {
  try {
    auto v = metric(idx);
    if (v && !std::isfinite(*v)) return std::nullopt;
    return v;
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

BootstrapResult run(const Metric& metric_a, const Metric* metric_b, std::size_t n_subjects,
                    const BootstrapOptions& options) {
  if (options.n_resamples == 0) throw ConfigError("bootstrap needs at least one resample");
  if (n_subjects == 0) throw DataError("cannot resample an empty cohort");
  std::vector<std::size_t> identity(n_subjects);
  std::iota(identity.begin(), identity.end(), 0);
  const auto full_a = evaluate(metric_a, identity);
  const auto full_b = metric_b ? evaluate(*metric_b, identity) : std::optional<double>(0.0);
  if (!full_a || !full_b) throw UndefinedMetricError("metric undefined on the full cohort");

  BootstrapResult result;
  result.paired = metric_b != nullptr;
  result.point_estimate = metric_b ? *full_a - *full_b : *full_a;
  result.n_resamples = options.n_resamples;
  result.seed = options.seed;

  const auto schedule = resample_schedule(n_subjects, options.n_resamples, options.seed);
  result.replicates.resize(options.n_resamples);
  auto work = [&](std::size_t r) {
    Replicate& rep = result.replicates[r];
    rep.index = r;
    const auto a = evaluate(metric_a, schedule[r]);
    const auto b = metric_b ? evaluate(*metric_b, schedule[r]) : std::optional<double>(0.0);
    rep.defined = a && b;
    if (!rep.defined) return;
    rep.value_a = *a;
    rep.value_b = metric_b ? *b : 0.0;
    rep.value = metric_b ? *a - *b : *a;
  };
  const unsigned n_threads = std::max(1u, options.n_threads);
  if (n_threads == 1) {
    for (std::size_t r = 0; r < options.n_resamples; ++r) work(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t r = t; r < options.n_resamples; r += n_threads) work(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> values;
  values.reserve(options.n_resamples);
  for (const auto& rep : result.replicates) {
    if (rep.defined) {
      values.push_back(rep.value);
    } else {
      ++result.n_undefined;
    }
  }
  result.n_effective = values.size();
  if (static_cast<double>(result.n_undefined) >
          options.max_undefined_fraction * static_cast<double>(options.n_resamples) ||
      values.empty()) {
    throw NumericError("bootstrap unreliable: metric undefined on " +
                       std::to_string(result.n_undefined) + " of " +
                       std::to_string(options.n_resamples) + " resamples");
  }
  std::tie(result.ci_lower, result.ci_upper) = percentile_interval(std::move(values), options.alpha);
  return result;
}

}  // namespace

BootstrapResult bootstrap_ci(const Metric& metric, std::size_t n_subjects,
                             const BootstrapOptions& options) {
  return run(metric, nullptr, n_subjects, options);
}

BootstrapResult bootstrap_diff_ci(const Metric& metric_a, const Metric& metric_b,
                                  std::size_t n_subjects, const BootstrapOptions& options) {
  return run(metric_a, &metric_b, n_subjects, options);
}

void write_replicates_csv(const std::string& path, const BootstrapResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  csv::write_row(out, {"replicate_index", "value_a", "value_b", "diff"});
  for (const auto& rep : result.replicates) {
    std::vector<std::string> row{std::to_string(rep.index), "", "", ""};
    if (rep.defined) {
      row[1] = csv::format_double(rep.value_a);
      if (result.paired) {
        row[2] = csv::format_double(rep.value_b);
        row[3] = csv::format_double(rep.value);
      }
    }
    csv::write_row(out, row);
  }
}

}  // namespace survrisk::inference
