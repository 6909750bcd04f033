#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracemill/corpus.hpp"
#include "tracemill/modelclient.hpp"

namespace tracemill::qfilter {

using corpus::Question;

enum class Strategy { StudentProportion, TeacherProportion, JudgeDifficulty, None };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

struct FilterDecision {
  std::string question_id;
  Strategy strategy = Strategy::None;
  double statistic = 0.0;  // correct count or rating; NaN when the decision was deferred
  bool kept = true;
};

nlohmann::json to_json(const FilterDecision& d);
FilterDecision decision_from_json(const nlohmann::json& j);

struct ProportionConfig {
  int n = 16;
  int lo = 2;
  int hi = 14;
  const modelclient::PromptTemplate* tmpl = nullptr;
  modelclient::SamplingParams params;

  void validate() const;
};

struct JudgeConfig {
  int keep_lo = 3;
  int keep_hi = 6;
  int max_reasks = 2;
  modelclient::SamplingParams params{0.0, 1.0, 32, 1, std::nullopt};
};

/// Samples n responses and counts correct ones through the same
/// extract/score path as distillation; kept iff lo <= count <= hi. A client
/// failure defers the decision: the question is kept with a NaN statistic.
FilterDecision proportion_filter(const Question& q, modelclient::ModelClient& model, Strategy role,
                                 const ProportionConfig& cfg);

/// Rubric text sent to the difficulty judge (question and gold answer are appended).
extern const char* const kDifficultyRubric;
std::string difficulty_prompt(const Question& q);
/// An integer 1-10, preferring one that follows "rating"/"difficulty".
std::optional<int> parse_rating(std::string_view text);

/// Asks for a 1-10 rating, re-asking up to max_reasks times on unparseable
/// output; kept iff keep_lo <= rating <= keep_hi. Fails open (kept, NaN).
FilterDecision judge_difficulty(const Question& q, modelclient::ModelClient& judge, const JudgeConfig& cfg = {});

/// Checks a decision's kept flag against its strategy's inequality.
bool decision_consistent(const FilterDecision& d, int lo, int hi);

struct FilterConfig {
  Strategy strategy = Strategy::None;
  modelclient::ModelClient* client = nullptr;
  ProportionConfig proportion;
  JudgeConfig judge;
  std::size_t workers = 1;
};

struct FilterResult {
  std::vector<Question> kept;
  std::vector<FilterDecision> report;  // one per distinct input question, input order
};

/// Order-preserving; repeated ids after the first are dropped.
FilterResult apply_filter(std::span<const Question> qs, const FilterConfig& cfg);

void write_report(const std::filesystem::path& path, std::span<const FilterDecision> report);
std::vector<FilterDecision> read_report(const std::filesystem::path& path);

}  // namespace tracemill::qfilter
