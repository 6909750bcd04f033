#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracemill/corpus.hpp"
#include "tracemill/modelclient.hpp"

namespace tracemill::distill {

using corpus::Question;
using corpus::TraceSample;
using modelclient::TemplateStyle;

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

/// raw == prefix + "<think>" + reasoning + "</think>" + remainder when closed.
/// Without an open tag everything lands in remainder. With an open tag but no
/// close, reasoning holds the tail and remainder is empty.
struct ThinkSplit {
  std::string prefix;
  std::optional<std::string> reasoning;
  std::string remainder;
  bool opened = false;
  bool closed = false;
};

ThinkSplit split_think(std::string_view raw);
bool has_unterminated_think(std::string_view raw);

/// Canonical answer form: a single option letter uppercased, with any
/// trailing ": option text" removed; other content is returned trimmed.
std::optional<std::string> normalize_answer(std::string_view content);

/// Final answer from a response: last \boxed{...}, else last <answer>...</answer>,
/// else the last "Answer: <letter>" line. When the think block is closed the
/// text after it is searched first. Direct styles additionally accept a bare
/// letter reply ("B", "(B)", "B.").
std::optional<std::string> extract_answer(std::string_view raw, TemplateStyle style = TemplateStyle::BoxedCoT);

enum class ScoreReason { ExactMatch, Mismatch, Unextractable };
std::string_view to_string(ScoreReason r);

struct ScoringResult {
  std::string question_id;
  std::optional<std::string> predicted;
  std::string gold;
  int score = 0;
  ScoreReason reason = ScoreReason::Unextractable;
};

/// 1 iff predicted equals gold after normalization (case-insensitive).
ScoringResult score(const std::optional<std::string>& predicted, const std::string& gold,
                    const std::string& question_id = {});

/// Per-question distillation outcome; one line of distill.log.
struct DistillOutcome {
  std::string question_id;
  int k = 0;
  int accepted = 0;
  int truncated_but_correct = 0;  // correct answer but finish=length; rejected
  bool failed = false;
  std::string failure;
};

nlohmann::json to_json(const DistillOutcome& o);

/// K teacher samples for one question (K = params.n_samples). Throws the
/// client's error when the request fails.
std::vector<TraceSample> distill_question(const Question& q, modelclient::ModelClient& teacher,
                                          const modelclient::PromptTemplate& tmpl,
                                          const modelclient::SamplingParams& params,
                                          std::string_view tokenizer_id = "ws", DistillOutcome* outcome = nullptr);

struct TeacherRoute {
  modelclient::ModelClient* client = nullptr;
  const modelclient::PromptTemplate* tmpl = nullptr;
};

/// Text-capable teacher for TextOnly questions, multimodal teacher otherwise.
struct TeacherRouting {
  TeacherRoute text;
  TeacherRoute multimodal;
  const TeacherRoute& route(const Question& q) const;
};

struct DistillRun {
  std::vector<TraceSample> samples;  // grouped by question, in corpus order
  std::vector<DistillOutcome> outcomes;
};

/// Distills questions concurrently on up to `workers` threads (the client's
/// semaphore still bounds in-flight requests). Failed questions are recorded
/// in outcomes and contribute no samples.
DistillRun distill_corpus(std::span<const Question> qs, const TeacherRouting& routing,
                          const modelclient::SamplingParams& params, std::size_t workers = 1,
                          std::string_view tokenizer_id = "ws");

struct AcceptedEntry {
  std::shared_ptr<const Question> question;
  std::string gold;
  TraceSample trace;
};

struct AcceptedSet {
  std::vector<AcceptedEntry> entries;
  std::map<std::string, std::size_t> per_question_counts;

  std::size_t size() const { return entries.size(); }
};

/// Keeps exactly the samples flagged accepted. Throws ConsistencyError for a
/// sample whose question_id is not in `questions`.
AcceptedSet build_accepted_set(std::span<const TraceSample> samples, std::span<const Question> questions);

/// Re-extracts every accepted trace and compares with gold. Returns one
/// message per violation (empty when sound).
std::vector<std::string> verify_soundness(const AcceptedSet& set);

}  // namespace tracemill::distill
