#include <unordered_map>

#include "tracemill/distill.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/parallel.hpp"

namespace tracemill::distill {

nlohmann::json to_json(const DistillOutcome& o) {
  nlohmann::json j = {{"question_id", o.question_id},
                      {"k", o.k},
                      {"accepted", o.accepted},
                      {"truncated_but_correct", o.truncated_but_correct},
                      {"failed", o.failed}};
  if (o.failed) j["failure"] = o.failure;
  return j;
}

std::vector<TraceSample> distill_question(const Question& q, modelclient::ModelClient& teacher,
                                          const modelclient::PromptTemplate& tmpl,
                                          const modelclient::SamplingParams& params, std::string_view tokenizer_id,
                                          DistillOutcome* outcome) {
  if (params.n_samples < 1) throw ConfigError("distill: K must be >= 1");
  modelclient::ChatRequest req;
  req.prompt = modelclient::render(tmpl, q);
  req.images = q.images;
  req.params = params;
  req.key = q.id;
  const auto completions = teacher.complete(req);

  const auto style = tmpl.prompt_style();
  DistillOutcome local{q.id, params.n_samples};
  std::vector<TraceSample> out;
  out.reserve(completions.size());
  for (std::size_t i = 0; i < completions.size(); ++i) {
    const auto& c = completions[i];
    TraceSample t;
    t.question_id = q.id;
    t.model_id = teacher.model_id();
    t.prompt_style = style;
    t.raw_text = c.text;
    if (style == corpus::PromptStyle::CoT) {
      auto split = split_think(c.text);
      if (split.opened) t.reasoning = split.reasoning;
    }
    t.extracted_answer = extract_answer(c.text, tmpl.style);
    t.response_tokens = corpus::count_tokens(c.text, tokenizer_id);
    t.seed = params.seed.value_or(0) + static_cast<std::int64_t>(i);
    const bool correct = score(t.extracted_answer, q.gold_answer, q.id).score == 1;
    t.accepted = correct && c.finish == modelclient::FinishReason::Stop;
    if (correct && !t.accepted) ++local.truncated_but_correct;
    if (t.accepted) ++local.accepted;
    out.push_back(std::move(t));
  }
  if (outcome) *outcome = local;
  return out;
}

const TeacherRoute& TeacherRouting::route(const Question& q) const {
  const TeacherRoute& r = q.category == corpus::Category::TextOnly ? text : multimodal;
  if (r.client && r.tmpl) return r;
  const TeacherRoute& other = &r == &text ? multimodal : text;
  if (other.client && other.tmpl) return other;
  throw ConfigError("no teacher configured for question " + q.id);
}

DistillRun distill_corpus(std::span<const Question> qs, const TeacherRouting& routing,
                          const modelclient::SamplingParams& params, std::size_t workers,
                          std::string_view tokenizer_id) {
  std::vector<std::vector<TraceSample>> per_question(qs.size());
  std::vector<DistillOutcome> outcomes(qs.size());
  const std::string tok(tokenizer_id);
  util::parallel_for(qs.size(), workers, [&](std::size_t i) {
    const auto& q = qs[i];
    const auto& r = routing.route(q);
    try {
      per_question[i] = distill_question(q, *r.client, *r.tmpl, params, tok, &outcomes[i]);
    } catch (const TransportError& e) {
      outcomes[i] = {q.id, params.n_samples, 0, 0, true, e.what()};
    } catch (const ProtocolError& e) {
      outcomes[i] = {q.id, params.n_samples, 0, 0, true, e.what()};
    }
  });
  DistillRun run;
  for (auto& v : per_question)
    run.samples.insert(run.samples.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  run.outcomes = std::move(outcomes);
  return run;
}

AcceptedSet build_accepted_set(std::span<const TraceSample> samples, std::span<const Question> questions) {
  std::unordered_map<std::string, std::shared_ptr<const Question>> by_id;
  for (const auto& q : questions) by_id.emplace(q.id, std::make_shared<const Question>(q));
  AcceptedSet set;
  for (const auto& t : samples) {
    auto it = by_id.find(t.question_id);
    if (it == by_id.end()) throw ConsistencyError("trace references unknown question '" + t.question_id + "'");
    if (!t.accepted) continue;
    set.entries.push_back({it->second, it->second->gold_answer, t});
    ++set.per_question_counts[t.question_id];
  }
  return set;
}

std::vector<std::string> verify_soundness(const AcceptedSet& set) {
  std::vector<std::string> bad;
  for (const auto& e : set.entries) {
    const auto style = e.trace.prompt_style == corpus::PromptStyle::Direct ? TemplateStyle::LetterDirect
                                                                           : TemplateStyle::BoxedCoT;
    auto again = extract_answer(e.trace.raw_text, style);
    if (!e.trace.accepted) bad.push_back(e.trace.question_id + ": entry not flagged accepted");
    if (score(again, e.gold).score != 1)
      bad.push_back(e.trace.question_id + ": re-extracted '" + again.value_or("<none>") + "' != gold '" + e.gold + "'");
  }
  return bad;
}

}  // namespace tracemill::distill
