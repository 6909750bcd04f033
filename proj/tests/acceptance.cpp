// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "tracemill/cli.hpp"
#include "tracemill/decontam.hpp"
#include "tracemill/distill.hpp"
#include "tracemill/evalharness.hpp"
#include "tracemill/mixture.hpp"
#include "tracemill/preprocess.hpp"
#include "tracemill/qfilter.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/text.hpp"

using namespace tracemill;
namespace fs = std::filesystem;
using modelclient::FinishReason;
using modelclient::MockScript;

namespace {

// Tolerances and budgets.
constexpr double kTable1Tol = 0.01 + 1e-9;  // printed values carry two decimals
constexpr double kTable1Seconds = 1.0;
constexpr double kSoundnessSeconds = 30.0;
constexpr double kDecontamSeconds = 60.0;
constexpr double kBootstrapTol = 0.1;
constexpr double kE2eSeconds = 120.0;
constexpr int kResizeSamples = 100000;

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ----------------------------------------------------------------------- 1

constexpr double NA = std::numeric_limits<double>::quiet_NaN();

struct Block {
  const char* category;
  std::vector<std::vector<double>> rows;  // per task, 11 columns
  std::vector<double> overall;
};

std::vector<Block> table1() {
  return {
      {"Text-Only",
       {{57.99, 55.40, 58.56, 73.37, 76.83, 58.30, 62.09, 90.81, 85.17, 90.72, 93.16},
        {69.61, 67.14, 71.00, 81.00, 81.73, 70.94, 69.23, 82.36, 84.56, 89.56, 90.93},
        {51.45, 50.74, 54.87, 60.72, 64.64, 53.11, 53.16, 72.70, 70.34, 77.21, 79.36},
        {12.16, 10.85, 12.91, 12.82, 17.67, 11.72, 12.54, 24.51, 21.89, 30.31, 37.30},
        {49.32, 44.77, 52.13, 62.96, 68.33, 49.93, 50.73, 68.75, 70.83, 76.06, 79.39}},
       {48.10, 45.78, 49.89, 58.17, 61.84, 48.80, 49.55, 67.83, 66.56, 72.77, 76.05}},
      {"Multimodal Reasoning",
       {{32.87, 30.00, 38.95, 47.90, 49.65, 33.29, 36.78, 42.52, 40.77, 57.76, NA},
        {43.76, 44.06, 44.31, 52.90, 54.81, 44.01, 48.43, 61.14, 57.06, 69.99, NA},
        {49.66, 51.46, 49.88, 59.55, 57.05, 49.79, 58.76, 61.13, 46.08, 60.14, NA},
        {22.47, 22.63, 24.81, 26.10, 28.65, 22.74, 26.19, 36.65, 33.13, 44.38, NA}},
       {37.19, 37.04, 39.49, 46.61, 47.54, 37.46, 42.54, 50.36, 44.25, 58.07, NA}},
      {"Multimodal Classification",
       {{27.82, 37.16, 31.07, 64.47, 47.72, 55.33, 78.99, 80.86, 58.33, 65.99, NA},
        {34.17, 42.76, 36.41, 38.62, 39.90, 50.13, 42.24, 71.22, 58.27, 41.70, NA},
        {26.71, 40.95, 25.08, 51.96, 42.76, 64.60, 56.83, 75.43, 49.20, 66.58, NA},
        {20.63, 33.66, 22.40, 27.71, 26.86, 59.14, 42.86, 55.20, 53.09, 45.26, NA},
        {43.12, 43.72, 48.01, 50.95, 52.84, 52.02, 52.40, 53.72, 35.95, 50.28, NA}},
       {30.49, 46.39, 32.59, 46.39, 41.76, 56.24, 54.66, 67.29, 50.97, 53.96, NA}},
  };
}

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int cells = 0, bad = 0;
  std::string misses;
  for (const auto& b : table1()) {
    for (std::size_t col = 0; col < b.overall.size(); ++col) {
      std::vector<std::pair<std::string, double>> per_task;
      bool complete = !std::isnan(b.overall[col]);
      for (std::size_t r = 0; r < b.rows.size(); ++r) {
        if (std::isnan(b.rows[r][col])) complete = false;
        per_task.emplace_back("task" + std::to_string(r), b.rows[r][col]);
      }
      if (!complete) continue;
      ++cells;
      const double got = evalharness::aggregate_category(per_task);
      if (std::abs(got - b.overall[col]) > kTable1Tol) {
        ++bad;
        misses += std::string(misses.empty() ? "" : ", ") + b.category + " column " + std::to_string(col + 1) +
                  fmt(" (computed %.3f, printed %.2f)", got, b.overall[col]);
      }
    }
  }
  const double secs = seconds_since(t0);
  o.detail = std::to_string(cells - bad) + "/" + std::to_string(cells) + " Overall cells within 0.01";
  if (bad) o.fail(std::to_string(bad) + " of " + std::to_string(cells) + " Overall cells off: " + misses);
  if (secs > kTable1Seconds) o.fail(fmt("took %.2f s", secs));
  return o;
}

// ----------------------------------------------------------------------- 2

Outcome criterion2() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2);
  std::vector<corpus::Question> qs;
  MockScript script;
  std::size_t expected = 0;
  const int k = 8;
  for (int i = 0; i < 500; ++i) {
    const std::string gold(1, static_cast<char>('A' + rng() % 5));
    qs.push_back(testing::mcq("q" + std::to_string(i), "question " + std::to_string(i), gold, 5));
    modelclient::MockEntry e;
    e.key = qs.back().id;
    for (int s = 0; s < k; ++s) {
      const int kind = static_cast<int>(rng() % 6);
      std::string ans = gold;
      if (kind == 1) ans = std::string(1, static_cast<char>('A' + (gold[0] - 'A' + 1) % 5));
      const bool truncated = kind == 2;
      std::string text;
      if (kind == 3)
        text = "<think>I lean toward " + gold + " but never finish";
      else if (kind == 4)
        text = "<think>considering \\boxed{" + gold + "}</think>final: \\boxed{" + ans + "}";
      else
        text = "<think>reasoning " + std::to_string(s) + "</think>\\boxed{" + ans + ": option}";
      e.responses.push_back({text, truncated ? FinishReason::Length : FinishReason::Stop});
      expected += kind != 1 && kind != 2 && kind != 3;
    }
    script.entries.push_back(e);
  }
  modelclient::MockModelClient teacher(script, "teacher", 4);
  const auto& tmpl = modelclient::TemplateRegistry::builtins().get("eval-boxed");
  auto run = distill::distill_corpus(qs, {{&teacher, &tmpl}, {}}, {0.6, 0.95, 512, k, 0}, 4);
  auto set = distill::build_accepted_set(run.samples, qs);
  auto violations = distill::verify_soundness(set);
  const double secs = seconds_since(t0);
  o.detail = "accepted " + std::to_string(set.size()) + " (scripted " + std::to_string(expected) + "), " +
             std::to_string(violations.size()) + " soundness violations, " + fmt("%.2f s", secs);
  if (set.size() != expected) o.fail("accepted " + std::to_string(set.size()) + " != scripted " + std::to_string(expected));
  if (!violations.empty()) o.fail(std::to_string(violations.size()) + " violations, first: " + violations.front());
  if (secs > kSoundnessSeconds) o.fail(fmt("took %.2f s", secs));
  return o;
}

// ----------------------------------------------------------------------- 3

Outcome criterion3() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0, planted15_flagged = 0, planted16_missed = 0, total = 0;
  std::size_t planted[3] = {0, 0, 0};
  auto bench_words = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " b" : "b") + std::to_string(rng() % 3000);
    return s;
  };
  auto filler = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " t" : "t") + std::to_string(rng() % 3000);
    return s;
  };
  for (int round = 0; round < 200; ++round) {
    std::vector<corpus::Question> bench;
    const std::size_t nb = 10 + rng() % 60;
    for (std::size_t i = 0; i < nb; ++i) {
      auto q = testing::mcq("b" + std::to_string(i), bench_words(4 + rng() % 60), "A");
      if (rng() % 5 == 0) {
        q.category = corpus::Category::MultimodalReasoning;
        q.images.push_back({"x.png", 8, 8, util::sha256_hex("img" + std::to_string(rng() % 40))});
      }
      bench.push_back(q);
    }
    std::vector<corpus::Question> train;
    std::vector<int> plant_len;
    const std::size_t nt = 1 + rng() % 1000;
    for (std::size_t i = 0; i < nt; ++i) {
      std::string text;
      int len = 0;
      const auto& src = bench[rng() % nb];
      const auto toks = decontam::normalize(src.text);
      const auto roll = rng() % 10;
      if (roll < 3 && src.category == corpus::Category::TextOnly && toks.size() >= 17) {
        len = 15 + static_cast<int>(rng() % 3);
        const std::size_t start = rng() % (toks.size() - static_cast<std::size_t>(len) + 1);
        text = filler(1 + rng() % 5);
        for (int t = 0; t < len; ++t) text += " " + toks[start + static_cast<std::size_t>(t)];
        text += " " + filler(rng() % 5);
        ++planted[len - 15];
      } else if (roll == 3) {
        text = src.text;
      } else {
        text = filler(rng() % 40);
      }
      auto q = testing::mcq("t" + std::to_string(i), text, "A");
      if (rng() % 8 == 0) {
        q.category = corpus::Category::MultimodalReasoning;
        q.images.push_back({"y.png", 8, 8, util::sha256_hex("img" + std::to_string(rng() % 400))});
      }
      train.push_back(q);
      plant_len.push_back(len);
    }
    const auto idx = decontam::build_index(bench);
    const auto expect = oracle::decontam_flags(train, bench, decontam::kDefaultN);
    const auto res = decontam::filter_corpus(train, idx);
    std::set<std::string> flagged;
    std::map<std::string, decontam::Reason> reason;
    for (const auto& e : res.report) {
      flagged.insert(e.id);
      reason[e.id] = e.reason;
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
      ++total;
      oracle::Flag got = oracle::Flag::Clean;
      if (flagged.count(train[i].id)) {
        switch (reason[train[i].id]) {
          case decontam::Reason::NgramOverlap: got = oracle::Flag::Ngram; break;
          case decontam::Reason::ShortExactMatch: got = oracle::Flag::Short; break;
          case decontam::Reason::ImageOverlap: got = oracle::Flag::Image; break;
          default: break;
        }
      }
      if (got != expect[i]) ++mismatches;
      const bool text_flag = got == oracle::Flag::Ngram;
      if (plant_len[i] == 15 && text_flag) ++planted15_flagged;
      if (plant_len[i] >= 16 && !text_flag) ++planted16_missed;
    }
  }
  const double secs = seconds_since(t0);
  o.detail = std::to_string(total) + " questions over 200 corpora, planted 15/16/17 = " + std::to_string(planted[0]) +
             "/" + std::to_string(planted[1]) + "/" + std::to_string(planted[2]) + ", 0 oracle mismatches, " +
             fmt("%.1f s", secs);
  if (mismatches) o.fail(std::to_string(mismatches) + " oracle mismatches");
  if (planted15_flagged) o.fail(std::to_string(planted15_flagged) + " planted 15-token overlaps flagged");
  if (planted16_missed) o.fail(std::to_string(planted16_missed) + " planted 16+-token overlaps missed");
  if (secs > kDecontamSeconds) o.fail(fmt("took %.1f s", secs));
  return o;
}

// ----------------------------------------------------------------------- 4

Outcome criterion4() {
  Outcome o;
  const std::vector<int> counts = {0, 1, 2, 14, 15, 16};
  MockScript s;
  std::vector<corpus::Question> qs;
  for (int c : counts) {
    std::vector<std::string> texts;
    for (int i = 0; i < 16; ++i) texts.push_back(i < c ? "\\boxed{A}" : "\\boxed{D}");
    s.entries.push_back(testing::keyed("c" + std::to_string(c), texts));
    qs.push_back(testing::mcq("c" + std::to_string(c), "t", "A"));
  }
  modelclient::MockModelClient student(s);
  qfilter::FilterConfig cfg;
  cfg.strategy = qfilter::Strategy::StudentProportion;
  cfg.client = &student;
  cfg.proportion.tmpl = &modelclient::TemplateRegistry::builtins().get("eval-boxed");
  auto res = qfilter::apply_filter(qs, cfg);
  std::vector<std::string> kept;
  for (const auto& q : res.kept) kept.push_back(q.id);
  if (kept != std::vector<std::string>{"c2", "c14"}) o.fail("proportion kept " + util::join(kept, ","));

  MockScript js;
  std::vector<corpus::Question> rq;
  for (int r = 1; r <= 10; ++r) {
    js.entries.push_back(testing::keyed("r" + std::to_string(r), {"Difficulty rating: " + std::to_string(r)}));
    rq.push_back(testing::mcq("r" + std::to_string(r), "t", "A"));
  }
  modelclient::MockModelClient judge(js);
  qfilter::FilterConfig jc;
  jc.strategy = qfilter::Strategy::JudgeDifficulty;
  jc.client = &judge;
  auto jr = qfilter::apply_filter(rq, jc);
  std::vector<std::string> jkept;
  for (const auto& q : jr.kept) jkept.push_back(q.id);
  if (jkept != std::vector<std::string>{"r3", "r4", "r5", "r6"}) o.fail("judge kept " + util::join(jkept, ","));
  if (o.pass) o.detail = "proportion kept {2,14} of {0,1,2,14,15,16}; judge kept ratings {3,4,5,6} of 1..10";
  return o;
}

// ----------------------------------------------------------------------- 5

Outcome criterion5() {
  Outcome o;
  testing::TempDir d;
  decontam::write_report(d / "clean.jsonl", {});
  const int nq = 40;
  std::vector<corpus::Question> qs;
  std::vector<corpus::TraceSample> ts;
  for (int i = 0; i < nq; ++i) {
    qs.push_back(testing::mcq("q" + std::to_string(i), "question " + std::to_string(i), "C"));
    for (int k = 0; k < 16; ++k) {
      corpus::TraceSample t;
      t.question_id = qs.back().id;
      t.reasoning = "r" + std::to_string(k);
      t.raw_text = "<think>" + *t.reasoning + "</think>\\boxed{C}";
      t.extracted_answer = "C";
      t.accepted = true;
      t.seed = k;
      ts.push_back(t);
    }
  }
  const auto set = distill::build_accepted_set(ts, qs);
  std::string sizes;
  for (int cap : {1, 4, 16}) {
    mixture::MixtureSpec spec;
    spec.sources.push_back({"train", std::nullopt, std::nullopt, std::nullopt, d / "clean.jsonl", ""});
    spec.traces_per_question_cap = cap;
    spec.seed = 5;
    const auto a = mixture::assemble(spec, {{"train", set}});
    sizes += (sizes.empty() ? "" : ", ") + std::string("cap ") + std::to_string(cap) + " -> " +
             std::to_string(a.examples.size());
    if (a.examples.size() != static_cast<std::size_t>(cap * nq))
      o.fail("cap " + std::to_string(cap) + " gave " + std::to_string(a.examples.size()));
  }
  if (o.pass) o.detail = std::to_string(nq) + " questions x 16 traces: " + sizes;
  return o;
}

// ----------------------------------------------------------------------- 6

Outcome criterion6() {
  Outcome o;
  const preprocess::ResizePolicy pol;
  const auto ref = preprocess::smart_resize(1024, 1024, pol);
  const auto oref = oracle::smart_resize(1024, 1024);
  if (!(ref == preprocess::Dims{504, 504}) || ref.height != oref.first || ref.width != oref.second)
    o.fail("(1024,1024) -> (" + std::to_string(ref.height) + "," + std::to_string(ref.width) + ")");
  std::mt19937_64 rng(6);
  int checked = 0, bad_align = 0, bad_area = 0, bad_oracle = 0;
  std::string example;
  while (checked < kResizeSamples) {
    const std::int64_t h = 1 + static_cast<std::int64_t>(rng() % 10000);
    const std::int64_t w = 1 + static_cast<std::int64_t>(rng() % 10000);
    if (std::max(h, w) > 200 * std::min(h, w)) continue;
    ++checked;
    const auto dm = preprocess::smart_resize(h, w, pol);
    const auto [oh, ow] = oracle::smart_resize(h, w);
    if (dm.height % pol.factor || dm.width % pol.factor) ++bad_align;
    const auto area = dm.height * dm.width;
    if (area < pol.min_pixels || area > pol.max_pixels) {
      if (!bad_area) example = "(" + std::to_string(h) + "," + std::to_string(w) + ") -> area " + std::to_string(area);
      ++bad_area;
    }
    if (dm.height != oh || dm.width != ow) ++bad_oracle;
  }
  if (bad_align) o.fail(std::to_string(bad_align) + " not factor-aligned");
  if (bad_area) o.fail(std::to_string(bad_area) + " outside the pixel bounds, e.g. " + example);
  if (bad_oracle) o.fail(std::to_string(bad_oracle) + " differ from the enumeration oracle");
  if (o.pass)
    o.detail = std::to_string(checked) + " random sizes aligned and within [3136, 262144]; (1024,1024) -> (504,504)";
  return o;
}

// ----------------------------------------------------------------------- 7

Outcome criterion7() {
  Outcome o;
  const std::vector<std::int64_t> seeds = {0, 1, 2, 3, 4};
  std::mt19937_64 rng(7);
  MockScript s;
  std::vector<corpus::Question> qs;
  int expected_forced = 0;
  for (int i = 0; i < 40; ++i) {
    qs.push_back(testing::mcq("e" + std::to_string(i), "q " + std::to_string(i), "B"));
    for (auto seed : seeds) {
      modelclient::MockEntry e;
      e.key = qs.back().id + "@" + std::to_string(seed);
      const int kind = static_cast<int>(rng() % 5);
      if (kind == 0) {
        e.responses.push_back({"<think>running out of room", FinishReason::Length});
        ++expected_forced;
      } else if (kind == 1) {
        e.responses.push_back({"<think>done</think> long tail \\boxed{B}", FinishReason::Length});
      } else if (kind == 2) {
        e.responses.push_back({"<think>never closed but stopped \\boxed{A}", FinishReason::Stop});
      } else {
        e.responses.push_back({rng() % 2 ? "<think>ok</think>\\boxed{B}" : "<think>ok</think>\\boxed{C}", FinishReason::Stop});
      }
      s.entries.push_back(e);
    }
    s.entries.push_back(testing::keyed(qs.back().id + "/continue", {"\\boxed{B}"}));
  }
  modelclient::MockModelClient m(s);
  evalharness::EvalRun run;
  run.benchmark_id = "acc7";
  run.seeds = seeds;
  auto rep = evalharness::run_eval(run, m, qs);
  double sum = 0;
  for (double a : rep.per_seed_accuracy) sum += a;
  if (rep.mean_accuracy != sum / static_cast<double>(seeds.size())) o.fail("mean is not the seed mean");
  if (rep.forced_exit_count != expected_forced)
    o.fail("forced exits " + std::to_string(rep.forced_exit_count) + " != scripted " + std::to_string(expected_forced));
  int continuations = 0;
  for (const auto& e : m.ledger()) continuations += e.key.ends_with("/continue");
  if (continuations != expected_forced) o.fail("continuations " + std::to_string(continuations));

  using A = std::optional<std::string>;
  std::vector<A> v1 = {"B", "B", "C"}, none = {std::nullopt, std::nullopt};
  std::vector<A> tie(5, A("A"));
  tie.insert(tie.end(), 5, A("B"));
  if (evalharness::majority_vote(v1) != A("B")) o.fail("vote [B,B,C]");
  if (evalharness::majority_vote(tie) != A("A")) o.fail("vote tie");
  if (evalharness::majority_vote(none)) o.fail("vote all-absent");

  std::vector<int> ones(25, 1), zeros(25, 0);
  if (evalharness::bootstrap_ci(ones) != std::pair<double, double>{100.0, 100.0}) o.fail("bootstrap all-ones");
  if (evalharness::bootstrap_ci(zeros) != std::pair<double, double>{0.0, 0.0}) o.fail("bootstrap all-zeros");
  std::vector<int> x(30);
  for (auto& v : x) v = static_cast<int>(rng() % 2);
  double mean = 0;
  for (int v : x) mean += v;
  mean = 100.0 * mean / 30.0;
  const auto ci = evalharness::bootstrap_ci(x, 10000, 0.95, 11);
  const auto ref = oracle::bootstrap(x, 10000, 0.95, 11);
  const double diff = std::max(std::abs(ci.first - ref.first), std::abs(ci.second - ref.second));
  if (diff > kBootstrapTol) o.fail(fmt("bootstrap differs from reference by %.3f", diff));
  if (!(ci.first <= mean && mean <= ci.second)) o.fail("interval does not bracket the mean");
  if (o.pass)
    o.detail = fmt("mean %.4f = seed mean; forced exits %.0f/%.0f scripted truncations; ", rep.mean_accuracy,
                   static_cast<double>(rep.forced_exit_count), expected_forced) +
               fmt("CI [%.2f, %.2f] vs reference max diff %.3f", ci.first, ci.second, diff);
  return o;
}

// ----------------------------------------------------------------------- 8

Outcome criterion8() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  testing::TempDir d;
  const std::string cmd = std::string(MAKE_FIXTURE_EXE) + " " + (d / "fixture").string() + " >/dev/null";
  if (std::system(cmd.c_str()) != 0) {
    o.fail("fixture generation failed");
    return o;
  }
  std::vector<cli::RunResult> results;
  for (const char* name : {"run1", "run2"}) {
    cli::RunOptions opts;
    opts.run_dir = d / name;
    results.push_back(cli::run(d / "fixture" / "recipe.json", opts));
    if (results.back().exit_code != cli::kOk) o.fail(std::string(name) + ": " + results.back().message);
  }
  if (!o.pass) return o;
  if (results[0].recipe_hash != results[1].recipe_hash) o.fail("recipe hashes differ");
  std::size_t compared = 0;
  auto same = [&](const fs::path& rel) {
    ++compared;
    if (!fs::exists(d / "run1" / rel) || util::sha256_file(d / "run1" / rel) != util::sha256_file(d / "run2" / rel))
      o.fail(rel.string() + " differs");
  };
  const fs::path ds = "stages/06-export/dataset";
  for (const auto& e : fs::directory_iterator(d / "run1" / ds)) same(ds / e.path().filename());
  for (const auto& e : fs::directory_iterator(d / "run1" / "stages/07-eval"))
    if (e.path().string().ends_with(".report.json") || e.path().extension() == ".csv") same("stages/07-eval" / e.path().filename());
  const auto m = corpus::read_manifest(d / "run1" / ds / "manifest.json");
  if (m.recipe_hash != results[0].recipe_hash) o.fail("manifest recipe_hash does not match the run");
  const double secs = seconds_since(t0);
  if (secs > kE2eSeconds) o.fail(fmt("took %.1f s", secs));
  if (o.pass)
    o.detail = std::to_string(compared) + " output files byte-identical across two runs, " +
               std::to_string(m.num_examples) + " examples, recipe_hash " + m.recipe_hash.substr(0, 12) + ", " +
               fmt("%.1f s", secs);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s  %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
