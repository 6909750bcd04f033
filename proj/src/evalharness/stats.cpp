#include <algorithm>
#include <cmath>
#include <map>

#include "tracemill/evalharness.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/rng.hpp"

namespace tracemill::evalharness {

std::optional<std::string> majority_vote(std::span<const std::optional<std::string>> answers) {
  if (answers.empty()) throw ValidationError("majority_vote: empty answer list");
  std::map<std::string, std::size_t> counts;
  for (const auto& a : answers)
    if (a && !a->empty()) ++counts[*a];
  std::optional<std::string> best;
  std::size_t best_n = 0;
  for (const auto& [ans, n] : counts)  // ascending keys, so strict > keeps the smallest on ties
    if (n > best_n) best = ans, best_n = n;
  return best;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

void check_args(std::span<const int> x, int resamples, double level) {
  if (x.empty()) throw ValidationError("bootstrap_ci: empty correctness vector");
  if (resamples < 1) throw ConfigError("bootstrap_ci: resamples must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap_ci: level must be in (0, 1)");
}

double resample_mean(std::span<const int> x, std::uint64_t seed, int r) {
  util::Rng rng(util::derive_seed(seed, static_cast<std::uint64_t>(r)));
  const std::uint64_t n = x.size();
  std::int64_t sum = 0;
  for (std::uint64_t i = 0; i < n; ++i) sum += x[rng.below(n)];
  return 100.0 * static_cast<double>(sum) / static_cast<double>(n);
}

std::pair<double, double> interval(std::vector<double>& means, double level) {
  std::sort(means.begin(), means.end());
  const double a = (1.0 - level) / 2.0;
  return {quantile_sorted(means, a), quantile_sorted(means, 1.0 - a)};
}

}  // namespace

std::pair<double, double> bootstrap_ci(std::span<const int> x, int resamples, double level, std::uint64_t seed) {
  check_args(x, resamples, level);
  std::vector<double> means(static_cast<std::size_t>(resamples));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < resamples; ++r) means[static_cast<std::size_t>(r)] = resample_mean(x, seed, r);
  return interval(means, level);
}

std::pair<double, double> bootstrap_ci_serial(std::span<const int> x, int resamples, double level,
                                              std::uint64_t seed) {
  check_args(x, resamples, level);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) means[static_cast<std::size_t>(r)] = resample_mean(x, seed, r);
  return interval(means, level);
}

double aggregate_category(std::span<const std::pair<std::string, double>> per_task) {
  if (per_task.empty()) throw ValidationError("aggregate_category: no tasks");
  double sum = 0.0;
  for (const auto& [task, acc] : per_task) sum += acc;
  return sum / static_cast<double>(per_task.size());
}

std::vector<std::pair<std::string, double>> token_report(std::span<const EvalReport> reports) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::int64_t>> acc;
  for (const auto& r : reports) {
    auto [it, fresh] = acc.try_emplace(r.benchmark_id, 0.0, 0);
    if (fresh) order.push_back(r.benchmark_id);
    for (const auto& q : r.per_question)
      for (std::size_t s = 0; s < q.response_tokens.size(); ++s)
        if (q.done[s]) it->second.first += static_cast<double>(q.response_tokens[s]), ++it->second.second;
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& b : order) {
    const auto& [sum, n] = acc.at(b);
    out.emplace_back(b, n ? sum / static_cast<double>(n) : 0.0);
  }
  return out;
}

}  // namespace tracemill::evalharness
