#include <cmath>
#include <set>
#include <unordered_map>

#include "tracemill/decontam.hpp"
#include "tracemill/mixture.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/parallel.hpp"
#include "tracemill/util/rng.hpp"
#include "tracemill/util/text.hpp"

namespace tracemill::mixture {

using nlohmann::json;

void MixtureSpec::validate() const {
  if (sources.empty()) throw ConfigError("mixture: no sources");
  if (traces_per_question_cap < 1) throw ConfigError("mixture: traces_per_question_cap must be >= 1");
  if (epochs_hint < 1) throw ConfigError("mixture: epochs_hint must be >= 1");
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (s.name.empty()) throw ConfigError("mixture: source without a name");
    if (!names.insert(s.name).second) throw ConfigError("mixture: duplicate source " + s.name);
    if (s.weight && !(*s.weight >= 0.0 && *s.weight <= 1.0))
      throw ConfigError("mixture: weight of " + s.name + " must be in [0, 1]");
    if (s.decontam_report.empty())
      throw ConfigError("mixture: source " + s.name + " has no decontamination report");
  }
}

void to_json(json& j, const MixtureSource& s) {
  j = {{"name", s.name}, {"decontam_report", s.decontam_report.string()}};
  if (s.category) j["category"] = corpus::to_string(*s.category);
  if (s.weight) j["weight"] = *s.weight;
  if (s.max_examples) j["max_examples"] = *s.max_examples;
  if (!s.template_id.empty()) j["template_id"] = s.template_id;
}

void from_json(const json& j, MixtureSource& s) {
  s.name = j.at("name").get<std::string>();
  s.category = j.contains("category") ? std::optional<Category>(corpus::parse_category(j["category"].get<std::string>()))
                                      : std::nullopt;
  s.weight = j.contains("weight") ? std::optional<double>(j["weight"].get<double>()) : std::nullopt;
  s.max_examples = j.contains("max_examples") ? std::optional<std::size_t>(j["max_examples"].get<std::size_t>())
                                              : std::nullopt;
  s.decontam_report = j.value("decontam_report", std::string());
  s.template_id = j.value("template_id", std::string());
}

void to_json(json& j, const MixtureSpec& s) {
  j = {{"sources", s.sources},
       {"traces_per_question_cap", s.traces_per_question_cap},
       {"epochs_hint", s.epochs_hint},
       {"seed", s.seed},
       {"prompt_style", corpus::to_string(s.prompt_style)}};
}

void from_json(const json& j, MixtureSpec& s) {
  s.sources = j.at("sources").get<std::vector<MixtureSource>>();
  s.traces_per_question_cap = j.value("traces_per_question_cap", 4);
  s.epochs_hint = j.value("epochs_hint", 1);
  s.seed = j.value("seed", std::uint64_t{0});
  s.prompt_style = corpus::parse_prompt_style(j.value("prompt_style", std::string("CoT")));
}

AcceptedSet cap_traces(const AcceptedSet& set, int cap, std::uint64_t seed, std::size_t workers) {
  if (cap < 1) throw ConfigError("cap_traces: cap must be >= 1");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    const auto& qid = set.entries[i].trace.question_id;
    auto [it, fresh] = groups.try_emplace(qid);
    if (fresh) order.push_back(qid);
    it->second.push_back(i);
  }
  std::vector<char> keep(set.entries.size(), 0);
  util::parallel_for(order.size(), workers, [&](std::size_t g) {
    const auto& idx = groups.at(order[g]);
    util::Rng rng(util::derive_seed(seed, order[g]));
    for (std::size_t k : rng.sample_indices(idx.size(), static_cast<std::size_t>(cap))) keep[idx[k]] = 1;
  });
  AcceptedSet out;
  for (std::size_t i = 0; i < set.entries.size(); ++i) {
    if (!keep[i]) continue;
    out.entries.push_back(set.entries[i]);
    ++out.per_question_counts[set.entries[i].trace.question_id];
  }
  return out;
}

std::string make_target(const distill::AcceptedEntry& e, PromptStyle style) {
  std::string answer = e.gold;
  if (const auto* opt = e.question->find_option(e.gold)) answer = opt->letter;
  if (style == PromptStyle::Direct) return answer;
  std::string boxed = answer;
  if (const auto* opt = e.question->find_option(e.gold)) boxed += ": " + opt->text;
  return "<think>\n" + std::string(util::trim(e.trace.reasoning.value_or(""))) + "\n</think>\n\n\\boxed{" + boxed + "}";
}

std::string set_digest(const AcceptedSet& set) {
  std::string all;
  for (const auto& e : set.entries) {
    json j = e.trace;
    all += util::canonical(j);
    all += '\n';
  }
  return util::sha256_hex(all);
}

namespace {

const modelclient::PromptTemplate& source_template(const MixtureSource& s, PromptStyle style) {
  const auto& reg = modelclient::TemplateRegistry::builtins();
  if (!s.template_id.empty()) return reg.get(s.template_id);
  return reg.get(style == PromptStyle::CoT ? "eval-boxed" : "eval-letter-direct");
}

void check_decontaminated(const MixtureSource& s, const AcceptedSet& set) {
  if (!std::filesystem::exists(s.decontam_report))
    throw ConfigError("mixture: decontamination report for " + s.name + " not found: " + s.decontam_report.string());
  std::set<std::string> flagged;
  for (const auto& e : decontam::read_report(s.decontam_report))
    if (e.reason != decontam::Reason::Clean) flagged.insert(e.id);
  for (const auto& e : set.entries)
    if (flagged.count(e.trace.question_id))
      throw ConsistencyError("mixture: source " + s.name + " contains decontaminated question " +
                             e.trace.question_id);
}

}  // namespace

Assembly assemble(const MixtureSpec& spec, const std::map<std::string, AcceptedSet>& sets,
                  std::string_view tokenizer_id, std::size_t workers) {
  spec.validate();
  Assembly out;
  json per_source = json::object();
  json digests = json::object();
  for (const auto& src : spec.sources) {
    auto it = sets.find(src.name);
    if (it == sets.end()) throw ConfigError("mixture: source " + src.name + " was not provided");
    check_decontaminated(src, it->second);
    digests[src.name] = set_digest(it->second);

    AcceptedSet capped = cap_traces(it->second, spec.traces_per_question_cap,
                                    util::derive_seed(spec.seed, "cap:" + src.name), workers);
    std::size_t target = capped.entries.size();
    if (src.weight) target = static_cast<std::size_t>(std::floor(*src.weight * static_cast<double>(target) + 0.5));
    if (src.max_examples) target = std::min(target, *src.max_examples);
    util::Rng rng(util::derive_seed(spec.seed, "take:" + src.name));
    const auto chosen = rng.sample_indices(capped.entries.size(), target);

    const auto& tmpl = source_template(src, spec.prompt_style);
    for (std::size_t k : chosen) {
      const auto& e = capped.entries[k];
      TrainingExample ex;
      ex.question_id = e.trace.question_id;
      ex.source = src.name;
      ex.category = src.category.value_or(e.question->category);
      ex.prompt = modelclient::render(tmpl, *e.question);
      ex.images = e.question->images;
      ex.target = make_target(e, spec.prompt_style);
      ex.target_tokens = corpus::count_tokens(ex.target, tokenizer_id);
      ex.trace_seed = e.trace.seed;
      auto mod = e.question->metadata.find("modality");
      ex.modality = mod == e.question->metadata.end() ? "unknown" : mod->second;
      out.examples.push_back(std::move(ex));
    }
    per_source[src.name] = chosen.size();
  }
  if (out.examples.empty()) throw ConfigError("mixture: assembled dataset is empty");

  util::Rng shuffler(util::derive_seed(spec.seed, "shuffle"));
  shuffler.shuffle(out.examples);

  auto& m = out.manifest;
  m.tokenizer_id = std::string(tokenizer_id);
  std::set<std::string> questions;
  for (const auto& ex : out.examples) {
    questions.insert(ex.question_id);
    m.total_response_tokens += ex.target_tokens;
    ++m.per_category_counts[std::string(corpus::to_string(ex.category))];
    ++m.per_modality_counts[ex.modality];
  }
  m.num_questions = static_cast<std::int64_t>(questions.size());
  m.num_examples = static_cast<std::int64_t>(out.examples.size());
  m.extra["per_source_counts"] = per_source;
  m.extra["input_digests"] = digests;
  m.extra["traces_per_question_cap"] = spec.traces_per_question_cap;
  m.extra["epochs_hint"] = spec.epochs_hint;
  m.extra["prompt_style"] = corpus::to_string(spec.prompt_style);
  return out;
}

}  // namespace tracemill::mixture
