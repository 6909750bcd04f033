#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tracemill/corpus.hpp"
#include "tracemill/modelclient.hpp"

namespace tracemill::evalharness {

using corpus::Question;

struct EvalRun {
  std::string benchmark_id;
  std::string model_id;
  std::string template_id = "eval-boxed";
  modelclient::SamplingParams params;
  std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
  std::string forced_exit_token = "</think>";
  int exit_reserve = 256;   // tokens available to a forced-exit continuation
  int vote_samples = 0;     // 0 disables the majority-vote pass
  std::int64_t vote_seed = 1000;

  void validate() const;
};

void to_json(nlohmann::json& j, const EvalRun& r);
void from_json(const nlohmann::json& j, EvalRun& r);

struct QuestionResult {
  std::string id;
  std::vector<int> correct;                          // per seed, seed order
  std::vector<std::optional<std::string>> answers;   // per seed
  std::vector<std::int64_t> response_tokens;         // per seed
  std::vector<bool> forced_exit;                     // per seed
  std::vector<bool> done;                            // false where the cell failed
  std::optional<std::string> vote_answer;
  std::optional<int> vote_correct;
};

struct EvalReport {
  std::string benchmark_id;
  std::string model_id;
  std::string template_id;
  std::vector<std::int64_t> seeds;
  std::vector<double> per_seed_accuracy;  // percent, over completed cells of that seed
  double mean_accuracy = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::vector<QuestionResult> per_question;
  double avg_response_tokens = 0.0;
  std::int64_t forced_exit_count = 0;
  bool incomplete = false;
  int vote_samples = 0;
  std::optional<double> vote_accuracy;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
void write_report(const std::filesystem::path& path, const EvalReport& r);
EvalReport read_report(const std::filesystem::path& path);
/// benchmark,model,seed,accuracy
void write_results_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);

struct EvalOptions {
  std::filesystem::path checkpoint;  // empty: no checkpointing
  std::size_t workers = 1;
  int bootstrap_resamples = 10000;
  std::uint64_t bootstrap_seed = 0;
  std::string tokenizer_id = "ws";
};

/// One response per question per seed. Completed cells are appended to the
/// checkpoint keyed on (benchmark, seed, question id) and are not re-requested
/// when the same checkpoint is passed again. Transport failures leave cells
/// missing and set `incomplete`.
EvalReport run_eval(const EvalRun& run, modelclient::ModelClient& client, std::span<const Question> benchmark,
                    const EvalOptions& opts = {});

struct ForcedExitResult {
  std::string text;
  bool fired = false;
  bool continued = false;
};

/// When raw has an unterminated think block: appends the close token and asks
/// for a continuation of at most min(256, budget_left) tokens with the amended
/// text as the assistant prefix. Otherwise returns raw unchanged.
ForcedExitResult forced_exit(std::string_view raw, int budget_left, modelclient::ModelClient& client,
                             const modelclient::ChatRequest& original, std::string_view close_token = "</think>");

/// Modal non-empty answer; ties go to the lexicographically smallest.
std::optional<std::string> majority_vote(std::span<const std::optional<std::string>> answers);

/// Percentile interval (percent units) of resampled means. Resample r draws
/// from Rng(derive_seed(seed, r)); quantiles interpolate linearly between
/// order statistics.
std::pair<double, double> bootstrap_ci(std::span<const int> correctness, int resamples = 10000, double level = 0.95,
                                       std::uint64_t seed = 0);
std::pair<double, double> bootstrap_ci_serial(std::span<const int> correctness, int resamples = 10000,
                                              double level = 0.95, std::uint64_t seed = 0);

/// Linear-interpolated quantile of sorted values; p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

/// Unweighted mean of per-task accuracies.
double aggregate_category(std::span<const std::pair<std::string, double>> per_task);

/// Per-benchmark mean response length over all seeds and questions, in
/// first-appearance order.
std::vector<std::pair<std::string, double>> token_report(std::span<const EvalReport> reports);

}  // namespace tracemill::evalharness
