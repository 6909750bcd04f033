#include <cmath>
#include <iostream>
#include <limits>
#include <regex>
#include <unordered_set>

#include "tracemill/distill.hpp"
#include "tracemill/qfilter.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/parallel.hpp"

namespace tracemill::qfilter {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::StudentProportion: return "StudentProportion";
    case Strategy::TeacherProportion: return "TeacherProportion";
    case Strategy::JudgeDifficulty: return "JudgeDifficulty";
    case Strategy::None: return "None";
  }
  return "None";
}

Strategy parse_strategy(std::string_view s) {
  for (Strategy v : {Strategy::StudentProportion, Strategy::TeacherProportion, Strategy::JudgeDifficulty, Strategy::None})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown filter strategy '" + std::string(s) + "'");
}

nlohmann::json to_json(const FilterDecision& d) {
  return {{"question_id", d.question_id},
          {"strategy", to_string(d.strategy)},
          {"statistic", std::isnan(d.statistic) ? nlohmann::json(nullptr) : nlohmann::json(d.statistic)},
          {"kept", d.kept}};
}

FilterDecision decision_from_json(const nlohmann::json& j) {
  FilterDecision d;
  d.question_id = j.at("question_id").get<std::string>();
  d.strategy = parse_strategy(j.at("strategy").get<std::string>());
  const auto& s = j.at("statistic");
  d.statistic = s.is_null() ? kNaN : s.get<double>();
  d.kept = j.at("kept").get<bool>();
  return d;
}

void ProportionConfig::validate() const {
  if (n < 1) throw ConfigError("proportion filter: n must be >= 1");
  if (!(0 <= lo && lo <= hi && hi <= n)) throw ConfigError("proportion filter: need 0 <= lo <= hi <= n");
  if (!tmpl) throw ConfigError("proportion filter: no prompt template");
}

FilterDecision proportion_filter(const Question& q, modelclient::ModelClient& model, Strategy role,
                                 const ProportionConfig& cfg) {
  cfg.validate();
  if (role != Strategy::StudentProportion && role != Strategy::TeacherProportion)
    throw ConfigError("proportion_filter: role must be StudentProportion or TeacherProportion");
  modelclient::ChatRequest req;
  req.prompt = modelclient::render(*cfg.tmpl, q);
  req.images = q.images;
  req.params = cfg.params;
  req.params.n_samples = cfg.n;
  req.key = q.id;
  try {
    int correct = 0;
    for (const auto& c : model.complete(req))
      correct += distill::score(distill::extract_answer(c.text, cfg.tmpl->style), q.gold_answer).score;
    return {q.id, role, static_cast<double>(correct), cfg.lo <= correct && correct <= cfg.hi};
  } catch (const TransportError& e) {
    std::cerr << "qfilter: deferring " << q.id << ": " << e.what() << "\n";
  } catch (const ProtocolError& e) {
    std::cerr << "qfilter: deferring " << q.id << ": " << e.what() << "\n";
  }
  return {q.id, role, kNaN, true};
}

const char* const kDifficultyRubric =
    "You are an expert medical educator. Rate how difficult the following question is for a well-trained "
    "physician to answer correctly, on an integer scale from 1 (trivial recall) to 10 (requires rare expertise "
    "and long multi-step reasoning). The correct answer is provided for reference. Reply with a single line of "
    "the form \"Rating: <integer from 1 to 10>\".";

std::string difficulty_prompt(const Question& q) {
  std::string answer = q.gold_answer;
  if (const auto* opt = q.find_option(q.gold_answer)) answer += ": " + opt->text;
  return std::string(kDifficultyRubric) + "\n\nQuestion:\n" + modelclient::render_question_block(q) +
         "\n\nCorrect answer: " + answer;
}

std::optional<int> parse_rating(std::string_view text) {
  static const std::regex kKeyed(R"((?:rating|difficulty)[^0-9\n]{0,20}?(\d+))", std::regex::icase);
  static const std::regex kBare(R"((?:^|[^0-9.])(\d+)(?![0-9.]))");
  const std::string s(text);
  std::smatch m;
  auto in_range = [](const std::string& digits) -> std::optional<int> {
    if (digits.size() > 2) return std::nullopt;
    int v = std::stoi(digits);
    if (v < 1 || v > 10) return std::nullopt;
    return v;
  };
  if (std::regex_search(s, m, kKeyed)) return in_range(m[1].str());
  if (std::regex_search(s, m, kBare)) return in_range(m[1].str());
  return std::nullopt;
}

FilterDecision judge_difficulty(const Question& q, modelclient::ModelClient& judge, const JudgeConfig& cfg) {
  modelclient::ChatRequest req;
  req.prompt = difficulty_prompt(q);
  req.images = q.images;
  req.params = cfg.params;
  req.params.n_samples = 1;
  req.key = q.id;
  for (int attempt = 0; attempt <= cfg.max_reasks; ++attempt) {
    try {
      auto rating = parse_rating(judge.complete(req).front().text);
      if (rating) return {q.id, Strategy::JudgeDifficulty, static_cast<double>(*rating),
                          cfg.keep_lo <= *rating && *rating <= cfg.keep_hi};
    } catch (const TransportError& e) {
      std::cerr << "qfilter: judge failed for " << q.id << ": " << e.what() << "\n";
      break;
    } catch (const ProtocolError& e) {
      std::cerr << "qfilter: judge failed for " << q.id << ": " << e.what() << "\n";
      break;
    }
  }
  std::cerr << "qfilter: no usable rating for " << q.id << "; keeping\n";
  return {q.id, Strategy::JudgeDifficulty, kNaN, true};
}

bool decision_consistent(const FilterDecision& d, int lo, int hi) {
  if (d.strategy == Strategy::None || std::isnan(d.statistic)) return d.kept;
  return d.kept == (lo <= d.statistic && d.statistic <= hi);
}

FilterResult apply_filter(std::span<const Question> qs, const FilterConfig& cfg) {
  std::vector<const Question*> unique;
  std::unordered_set<std::string> seen;
  for (const auto& q : qs)
    if (seen.insert(q.id).second) unique.push_back(&q);

  if (cfg.strategy != Strategy::None && !cfg.client) throw ConfigError("filter strategy needs a model client");
  if (cfg.strategy == Strategy::StudentProportion || cfg.strategy == Strategy::TeacherProportion)
    cfg.proportion.validate();

  std::vector<FilterDecision> decisions(unique.size());
  util::parallel_for(unique.size(), cfg.strategy == Strategy::None ? 1 : cfg.workers, [&](std::size_t i) {
    const Question& q = *unique[i];
    switch (cfg.strategy) {
      case Strategy::None: decisions[i] = {q.id, Strategy::None, kNaN, true}; break;
      case Strategy::JudgeDifficulty: decisions[i] = judge_difficulty(q, *cfg.client, cfg.judge); break;
      default: decisions[i] = proportion_filter(q, *cfg.client, cfg.strategy, cfg.proportion); break;
    }
  });

  FilterResult out;
  for (std::size_t i = 0; i < unique.size(); ++i)
    if (decisions[i].kept) out.kept.push_back(*unique[i]);
  out.report = std::move(decisions);
  return out;
}

void write_report(const std::filesystem::path& path, std::span<const FilterDecision> report) {
  std::vector<nlohmann::json> rows;
  for (const auto& d : report) rows.push_back(to_json(d));
  util::write_jsonl(path, rows);
}

std::vector<FilterDecision> read_report(const std::filesystem::path& path) {
  std::vector<FilterDecision> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(decision_from_json(j));
  return out;
}

}  // namespace tracemill::qfilter
