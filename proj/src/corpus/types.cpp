#include <set>

#include "tracemill/corpus.hpp"
#include "tracemill/util/error.hpp"

namespace tracemill::corpus {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::TextOnly: return "TextOnly";
    case Category::MultimodalReasoning: return "MultimodalReasoning";
    case Category::MultimodalClassification: return "MultimodalClassification";
  }
  return "TextOnly";
}

std::string_view to_string(PromptStyle s) { return s == PromptStyle::CoT ? "CoT" : "Direct"; }

Category parse_category(std::string_view s) {
  if (s == "TextOnly") return Category::TextOnly;
  if (s == "MultimodalReasoning") return Category::MultimodalReasoning;
  if (s == "MultimodalClassification") return Category::MultimodalClassification;
  throw ValidationError("unknown category '" + std::string(s) + "'");
}

PromptStyle parse_prompt_style(std::string_view s) {
  if (s == "CoT") return PromptStyle::CoT;
  if (s == "Direct") return PromptStyle::Direct;
  throw ValidationError("unknown prompt_style '" + std::string(s) + "'");
}

const Option* Question::find_option(std::string_view letter) const {
  for (const auto& o : options)
    if (o.letter == letter) return &o;
  return nullptr;
}

namespace {

template <class T>
std::optional<T> optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void to_json(json& j, const ImageRef& v) {
  j = json{{"path_or_uri", v.path_or_uri}, {"width", v.width}, {"height", v.height}, {"digest", v.digest}};
}

void from_json(const json& j, ImageRef& v) {
  v.path_or_uri = j.at("path_or_uri").get<std::string>();
  v.width = j.value("width", 0);
  v.height = j.value("height", 0);
  v.digest = j.value("digest", std::string{});
}

void to_json(json& j, const Question& v) {
  json opts = json::array();
  for (const auto& o : v.options) opts.push_back({{"letter", o.letter}, {"text", o.text}});
  j = json{{"id", v.id},
           {"source", v.source},
           {"category", to_string(v.category)},
           {"text", v.text},
           {"images", v.images},
           {"options", std::move(opts)},
           {"gold_answer", v.gold_answer},
           {"metadata", v.metadata}};
}

void from_json(const json& j, Question& v) {
  v.id = j.value("id", std::string{});
  v.source = j.at("source").get<std::string>();
  v.category = parse_category(j.value("category", std::string("TextOnly")));
  v.text = j.at("text").get<std::string>();
  v.images = j.value("images", std::vector<ImageRef>{});
  v.options.clear();
  if (auto it = j.find("options"); it != j.end())
    for (const auto& o : *it) v.options.push_back({o.at("letter").get<std::string>(), o.at("text").get<std::string>()});
  v.gold_answer = j.at("gold_answer").get<std::string>();
  v.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

void to_json(json& j, const TraceSample& v) {
  j = json{{"question_id", v.question_id},
           {"model_id", v.model_id},
           {"prompt_style", to_string(v.prompt_style)},
           {"raw_text", v.raw_text},
           {"reasoning", v.reasoning ? json(*v.reasoning) : json(nullptr)},
           {"extracted_answer", v.extracted_answer ? json(*v.extracted_answer) : json(nullptr)},
           {"response_tokens", v.response_tokens},
           {"accepted", v.accepted},
           {"seed", v.seed}};
}

void from_json(const json& j, TraceSample& v) {
  v.question_id = j.at("question_id").get<std::string>();
  v.model_id = j.value("model_id", std::string{});
  v.prompt_style = parse_prompt_style(j.value("prompt_style", std::string("CoT")));
  v.raw_text = j.at("raw_text").get<std::string>();
  v.reasoning = optional_field<std::string>(j, "reasoning");
  v.extracted_answer = optional_field<std::string>(j, "extracted_answer");
  v.response_tokens = j.value("response_tokens", std::int64_t{0});
  v.accepted = j.value("accepted", false);
  v.seed = j.value("seed", std::int64_t{0});
}

void to_json(json& j, const DatasetManifest& v) {
  j = json{{"recipe_hash", v.recipe_hash},
           {"num_questions", v.num_questions},
           {"num_examples", v.num_examples},
           {"total_response_tokens", v.total_response_tokens},
           {"per_category_counts", v.per_category_counts},
           {"per_modality_counts", v.per_modality_counts},
           {"shard_paths", v.shard_paths},
           {"tokenizer_id", v.tokenizer_id}};
  if (!v.extra.empty()) j["extra"] = v.extra;
}

void from_json(const json& j, DatasetManifest& v) {
  v.recipe_hash = j.at("recipe_hash").get<std::string>();
  v.num_questions = j.at("num_questions").get<std::int64_t>();
  v.num_examples = j.at("num_examples").get<std::int64_t>();
  v.total_response_tokens = j.at("total_response_tokens").get<std::int64_t>();
  v.per_category_counts = j.value("per_category_counts", std::map<std::string, std::int64_t>{});
  v.per_modality_counts = j.value("per_modality_counts", std::map<std::string, std::int64_t>{});
  v.shard_paths = j.at("shard_paths").get<std::vector<std::string>>();
  v.tokenizer_id = j.value("tokenizer_id", std::string("ws"));
  v.extra = j.value("extra", json::object());
}

void validate(const Question& q) {
  if (q.id.empty()) throw ValidationError("question id is empty");
  if (q.category == Category::TextOnly && !q.images.empty())
    throw ValidationError("question " + q.id + ": TextOnly question carries images");
  for (const auto& img : q.images)
    if (img.width <= 0 || img.height <= 0)
      throw ValidationError("question " + q.id + ": image " + img.path_or_uri + " has non-positive size");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    const auto& letter = q.options[i].letter;
    if (letter.empty()) throw ValidationError("question " + q.id + ": empty option letter");
    if (!seen.insert(letter).second)
      throw ValidationError("question " + q.id + ": duplicate option letter " + letter);
    if (i > 0 && !(q.options[i - 1].letter < letter))
      throw ValidationError("question " + q.id + ": option letters out of order at " + letter);
  }
  if (q.gold_answer.empty()) throw ValidationError("question " + q.id + ": empty gold_answer");
  if (q.is_multiple_choice() && !q.find_option(q.gold_answer))
    throw ValidationError("question " + q.id + ": gold_answer '" + q.gold_answer + "' is not among the option letters");
}

void validate(const TraceSample& t) {
  if (t.question_id.empty()) throw ValidationError("trace has empty question_id");
  if (t.accepted && !t.extracted_answer) throw ValidationError("trace for " + t.question_id + ": accepted without an extracted answer");
  if (t.prompt_style == PromptStyle::Direct && t.reasoning && !t.reasoning->empty())
    throw ValidationError("trace for " + t.question_id + ": Direct trace carries reasoning");
  if (t.response_tokens < 0) throw ValidationError("trace for " + t.question_id + ": negative response_tokens");
}

}  // namespace tracemill::corpus
