#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <unordered_map>

#include "tracemill/distill.hpp"
#include "tracemill/evalharness.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/parallel.hpp"

namespace tracemill::evalharness {

using nlohmann::json;

void EvalRun::validate() const {
  if (benchmark_id.empty()) throw ConfigError("eval: benchmark_id is empty");
  if (seeds.empty()) throw ConfigError("eval: no seeds");
  if (std::set<std::int64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("eval: seeds must be distinct");
  if (forced_exit_token.empty()) throw ConfigError("eval: forced_exit_token is empty");
  if (exit_reserve < 0) throw ConfigError("eval: exit_reserve must be >= 0");
  if (vote_samples < 0) throw ConfigError("eval: vote_samples must be >= 0");
  auto p = params;
  p.n_samples = 1;
  p.validate();
}

void to_json(json& j, const EvalRun& r) {
  j = {{"benchmark_id", r.benchmark_id}, {"model_id", r.model_id},         {"template_id", r.template_id},
       {"params", r.params},             {"seeds", r.seeds},               {"forced_exit_token", r.forced_exit_token},
       {"exit_reserve", r.exit_reserve}, {"vote_samples", r.vote_samples}, {"vote_seed", r.vote_seed}};
}

void from_json(const json& j, EvalRun& r) {
  EvalRun d;
  r.benchmark_id = j.value("benchmark_id", d.benchmark_id);
  r.model_id = j.value("model_id", d.model_id);
  r.template_id = j.value("template_id", d.template_id);
  r.params = j.contains("params") ? j["params"].get<modelclient::SamplingParams>() : d.params;
  r.seeds = j.value("seeds", d.seeds);
  r.forced_exit_token = j.value("forced_exit_token", d.forced_exit_token);
  r.exit_reserve = j.value("exit_reserve", d.exit_reserve);
  r.vote_samples = j.value("vote_samples", d.vote_samples);
  r.vote_seed = j.value("vote_seed", d.vote_seed);
}

namespace {

json opt_str(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
std::optional<std::string> str_opt(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<std::string>(j.get<std::string>());
}

}  // namespace

json to_json(const EvalReport& r) {
  json pq = json::array();
  for (const auto& q : r.per_question) {
    json answers = json::array();
    for (const auto& a : q.answers) answers.push_back(opt_str(a));
    json row = {{"id", q.id},
                {"correct", q.correct},
                {"answers", answers},
                {"response_tokens", q.response_tokens},
                {"forced_exit", q.forced_exit},
                {"done", q.done}};
    if (r.vote_samples > 0) {
      row["vote_answer"] = opt_str(q.vote_answer);
      row["vote_correct"] = q.vote_correct ? json(*q.vote_correct) : json(nullptr);
    }
    pq.push_back(std::move(row));
  }
  json j = {{"benchmark_id", r.benchmark_id},
            {"model_id", r.model_id},
            {"template_id", r.template_id},
            {"seeds", r.seeds},
            {"per_seed_accuracy", r.per_seed_accuracy},
            {"mean_accuracy", r.mean_accuracy},
            {"ci95", {r.ci95.first, r.ci95.second}},
            {"per_question", pq},
            {"avg_response_tokens", r.avg_response_tokens},
            {"forced_exit_count", r.forced_exit_count},
            {"incomplete", r.incomplete},
            {"vote_samples", r.vote_samples}};
  if (r.vote_accuracy) j["vote_accuracy"] = *r.vote_accuracy;
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.benchmark_id = j.at("benchmark_id").get<std::string>();
  r.model_id = j.value("model_id", std::string());
  r.template_id = j.value("template_id", std::string());
  r.seeds = j.at("seeds").get<std::vector<std::int64_t>>();
  r.per_seed_accuracy = j.at("per_seed_accuracy").get<std::vector<double>>();
  r.mean_accuracy = j.at("mean_accuracy").get<double>();
  r.ci95 = {j.at("ci95").at(0).get<double>(), j.at("ci95").at(1).get<double>()};
  for (const auto& row : j.at("per_question")) {
    QuestionResult q;
    q.id = row.at("id").get<std::string>();
    q.correct = row.at("correct").get<std::vector<int>>();
    for (const auto& a : row.at("answers")) q.answers.push_back(str_opt(a));
    q.response_tokens = row.at("response_tokens").get<std::vector<std::int64_t>>();
    q.forced_exit = row.at("forced_exit").get<std::vector<bool>>();
    q.done = row.value("done", std::vector<bool>(q.correct.size(), true));
    if (row.contains("vote_answer")) q.vote_answer = str_opt(row["vote_answer"]);
    if (row.contains("vote_correct") && !row["vote_correct"].is_null()) q.vote_correct = row["vote_correct"].get<int>();
    r.per_question.push_back(std::move(q));
  }
  r.avg_response_tokens = j.at("avg_response_tokens").get<double>();
  r.forced_exit_count = j.at("forced_exit_count").get<std::int64_t>();
  r.incomplete = j.value("incomplete", false);
  r.vote_samples = j.value("vote_samples", 0);
  if (j.contains("vote_accuracy")) r.vote_accuracy = j["vote_accuracy"].get<double>();
  return r;
}

void write_report(const std::filesystem::path& path, const EvalReport& r) {
  util::write_file(path, to_json(r).dump(2) + "\n");
}

EvalReport read_report(const std::filesystem::path& path) { return report_from_json(util::read_json(path)); }

void write_results_csv(const std::filesystem::path& path, std::span<const EvalReport> reports) {
  std::string out = "benchmark,model,seed,accuracy\n";
  char buf[64];
  for (const auto& r : reports)
    for (std::size_t s = 0; s < r.seeds.size(); ++s) {
      std::snprintf(buf, sizeof buf, "%.6f", r.per_seed_accuracy.at(s));
      out += r.benchmark_id + "," + r.model_id + "," + std::to_string(r.seeds[s]) + "," + buf + "\n";
    }
  util::write_file(path, out);
}

ForcedExitResult forced_exit(std::string_view raw, int budget_left, modelclient::ModelClient& client,
                             const modelclient::ChatRequest& original, std::string_view close_token) {
  ForcedExitResult out{std::string(raw), false, false};
  if (!distill::has_unterminated_think(raw)) return out;
  out.fired = true;
  out.text += close_token;
  const int budget = std::min(256, budget_left);
  if (budget <= 0) return out;
  modelclient::ChatRequest req = original;
  req.assistant_prefix = out.text;
  req.params.max_tokens = budget;
  req.params.n_samples = 1;
  req.key = original.key + "/continue";
  try {
    out.text += client.complete(req).front().text;
    out.continued = true;
  } catch (const TransportError& e) {
    std::cerr << "eval: continuation failed for " << original.key << ": " << e.what() << "\n";
  } catch (const ProtocolError& e) {
    std::cerr << "eval: continuation failed for " << original.key << ": " << e.what() << "\n";
  }
  return out;
}

namespace {

struct Cell {
  bool done = false;
  std::optional<std::string> answer;
  int correct = 0;
  std::int64_t tokens = 0;
  bool forced = false;
};

std::string cell_key(std::string_view bench, std::int64_t seed, std::string_view qid) {
  return std::string(bench) + '\x1f' + std::to_string(seed) + '\x1f' + std::string(qid);
}

}  // namespace

EvalReport run_eval(const EvalRun& run, modelclient::ModelClient& client, std::span<const Question> benchmark,
                    const EvalOptions& opts) {
  run.validate();
  const auto& tmpl = modelclient::TemplateRegistry::builtins().get(run.template_id);
  const std::size_t nq = benchmark.size();
  const std::size_t ns = run.seeds.size();

  std::unordered_map<std::string, json> cached;
  std::unique_ptr<util::JsonlAppender> ckpt;
  std::mutex ckpt_mu;
  if (!opts.checkpoint.empty()) {
    if (std::filesystem::exists(opts.checkpoint))
      for (auto& row : util::read_jsonl(opts.checkpoint)) {
        const auto bench = row.at("benchmark").get<std::string>();
        const auto qid = row.at("question_id").get<std::string>();
        const std::string k = row.value("vote", false) ? cell_key(bench, 0, "vote:" + qid)
                                                       : cell_key(bench, row.at("seed").get<std::int64_t>(), qid);
        cached[k] = std::move(row);
      }
    ckpt = std::make_unique<util::JsonlAppender>(opts.checkpoint);
  }
  auto checkpoint = [&](const json& row) {
    if (!ckpt) return;
    std::lock_guard lock(ckpt_mu);
    ckpt->append(row);
  };

  std::vector<Cell> cells(nq * ns);
  std::atomic<bool> incomplete{false};
  util::parallel_for(cells.size(), opts.workers, [&](std::size_t c) {
    const std::size_t s = c / nq, qi = c % nq;
    const Question& q = benchmark[qi];
    const std::int64_t seed = run.seeds[s];
    Cell& cell = cells[c];
    if (auto it = cached.find(cell_key(run.benchmark_id, seed, q.id)); it != cached.end()) {
      const json& row = it->second;
      cell = {true, str_opt(row.at("answer")), row.at("correct").get<int>(),
              row.at("response_tokens").get<std::int64_t>(), row.at("forced_exit").get<bool>()};
      return;
    }
    modelclient::ChatRequest req;
    req.prompt = modelclient::render(tmpl, q);
    req.images = q.images;
    req.params = run.params;
    req.params.n_samples = 1;
    req.params.seed = seed;
    req.key = q.id;
    try {
      const auto first = client.complete(req).front();
      std::string text = first.text;
      if (first.finish == modelclient::FinishReason::Length) {
        auto fe = forced_exit(text, run.exit_reserve, client, req, run.forced_exit_token);
        cell.forced = fe.fired;
        text = std::move(fe.text);
      }
      cell.answer = distill::extract_answer(text, tmpl.style);
      cell.correct = distill::score(cell.answer, q.gold_answer, q.id).score;
      cell.tokens = corpus::count_tokens(text, opts.tokenizer_id);
      cell.done = true;
    } catch (const TransportError& e) {
      std::cerr << "eval: " << q.id << " seed " << seed << ": " << e.what() << "\n";
      incomplete = true;
      return;
    } catch (const ProtocolError& e) {
      std::cerr << "eval: " << q.id << " seed " << seed << ": " << e.what() << "\n";
      incomplete = true;
      return;
    }
    checkpoint({{"benchmark", run.benchmark_id}, {"seed", seed}, {"question_id", q.id}, {"answer", opt_str(cell.answer)},
                {"correct", cell.correct}, {"response_tokens", cell.tokens}, {"forced_exit", cell.forced}});
  });

  EvalReport rep;
  rep.benchmark_id = run.benchmark_id;
  rep.model_id = run.model_id.empty() ? client.model_id() : run.model_id;
  rep.template_id = run.template_id;
  rep.seeds = run.seeds;
  rep.vote_samples = run.vote_samples;
  rep.per_question.resize(nq);
  std::vector<int> pooled;
  double token_sum = 0.0;
  for (std::size_t qi = 0; qi < nq; ++qi) {
    auto& qr = rep.per_question[qi];
    qr.id = benchmark[qi].id;
    for (std::size_t s = 0; s < ns; ++s) {
      const Cell& cell = cells[s * nq + qi];
      qr.correct.push_back(cell.correct);
      qr.answers.push_back(cell.answer);
      qr.response_tokens.push_back(cell.tokens);
      qr.forced_exit.push_back(cell.forced);
      qr.done.push_back(cell.done);
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    std::int64_t done = 0, correct = 0;
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const Cell& cell = cells[s * nq + qi];
      if (!cell.done) continue;
      ++done;
      correct += cell.correct;
      pooled.push_back(cell.correct);
      token_sum += static_cast<double>(cell.tokens);
      rep.forced_exit_count += cell.forced;
    }
    if (done < static_cast<std::int64_t>(nq)) rep.incomplete = true;
    rep.per_seed_accuracy.push_back(done ? 100.0 * static_cast<double>(correct) / static_cast<double>(done) : 0.0);
  }
  double acc_sum = 0.0;
  for (double a : rep.per_seed_accuracy) acc_sum += a;
  rep.mean_accuracy = acc_sum / static_cast<double>(ns);
  if (!pooled.empty()) {
    rep.ci95 = bootstrap_ci(pooled, opts.bootstrap_resamples, 0.95, opts.bootstrap_seed);
    rep.avg_response_tokens = token_sum / static_cast<double>(pooled.size());
  }

  if (run.vote_samples > 0) {
    std::vector<char> vote_done(nq, 0);
    util::parallel_for(nq, opts.workers, [&](std::size_t qi) {
      const Question& q = benchmark[qi];
      auto& qr = rep.per_question[qi];
      std::vector<std::optional<std::string>> answers;
      if (auto it = cached.find(cell_key(run.benchmark_id, 0, "vote:" + q.id)); it != cached.end()) {
        for (const auto& a : it->second.at("answers")) answers.push_back(str_opt(a));
      } else {
        modelclient::ChatRequest req;
        req.prompt = modelclient::render(tmpl, q);
        req.images = q.images;
        req.params = run.params;
        req.params.n_samples = run.vote_samples;
        req.params.seed = run.vote_seed;
        req.key = q.id + "/vote";
        try {
          for (const auto& c : client.complete(req)) answers.push_back(distill::extract_answer(c.text, tmpl.style));
        } catch (const TransportError& e) {
          std::cerr << "eval: vote " << q.id << ": " << e.what() << "\n";
          incomplete = true;
          return;
        } catch (const ProtocolError& e) {
          std::cerr << "eval: vote " << q.id << ": " << e.what() << "\n";
          incomplete = true;
          return;
        }
        json arr = json::array();
        for (const auto& a : answers) arr.push_back(opt_str(a));
        checkpoint({{"benchmark", run.benchmark_id}, {"vote", true}, {"question_id", q.id}, {"answers", arr}});
      }
      qr.vote_answer = majority_vote(answers);
      qr.vote_correct = distill::score(qr.vote_answer, q.gold_answer, q.id).score;
      vote_done[qi] = 1;
    });
    double hits = 0.0, n = 0.0;
    for (std::size_t qi = 0; qi < nq; ++qi)
      if (vote_done[qi]) hits += *rep.per_question[qi].vote_correct, n += 1.0;
      else rep.incomplete = true;
    if (n > 0) rep.vote_accuracy = 100.0 * hits / n;
  }
  if (incomplete) rep.incomplete = true;
  return rep;
}

}  // namespace tracemill::evalharness
