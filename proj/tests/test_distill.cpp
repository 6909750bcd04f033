#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tracemill/distill.hpp"
#include "tracemill/util/error.hpp"

using namespace tracemill;
using namespace tracemill::distill;
using modelclient::FinishReason;
using modelclient::MockScript;

TEST_SUITE("distill") {
  TEST_CASE("split_think") {
    auto s = split_think("pre<think>why</think>after");
    CHECK(s.prefix == "pre");
    CHECK(s.reasoning == "why");
    CHECK(s.remainder == "after");
    CHECK(s.closed);
    auto none = split_think("just text");
    CHECK_FALSE(none.opened);
    CHECK(none.remainder == "just text");
    auto open = split_think("<think>still going");
    CHECK(open.opened);
    CHECK_FALSE(open.closed);
    CHECK(open.reasoning == "still going");
    CHECK(open.remainder.empty());
    CHECK(has_unterminated_think("<think>abc"));
    CHECK_FALSE(has_unterminated_think("<think>abc</think>x"));
    CHECK_FALSE(has_unterminated_think("plain"));
  }

  TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("b") == "B");
    CHECK(normalize_answer(" C: Pneumonia ") == "C");
    CHECK(normalize_answer("(D)") == "D");
    CHECK(normalize_answer("free text") == "free text");
    CHECK_FALSE(normalize_answer("   "));
  }

  TEST_CASE("extract_answer precedence") {
    CHECK(extract_answer("\\boxed{A} then \\boxed{C: text}") == "C");
    CHECK(extract_answer("<answer>B</answer>") == "B");
    CHECK(extract_answer("blah\nAnswer: D") == "D");
    CHECK(extract_answer("<think>maybe \\boxed{A}</think>so \\boxed{B}") == "B");
    CHECK(extract_answer("<think>only \\boxed{A}</think>nothing here") == "A");
    CHECK_FALSE(extract_answer("no answer at all"));
    CHECK_FALSE(extract_answer("B"));
    CHECK(extract_answer("B", TemplateStyle::LetterDirect) == "B");
    CHECK(extract_answer("(c).", TemplateStyle::LetterDirect) == "C");
    CHECK(extract_answer("\\boxed{\\text{A}}") == "A");
  }

  TEST_CASE("score") {
    CHECK(score(std::string("a"), "A").score == 1);
    CHECK(score(std::string("a"), "A").reason == ScoreReason::ExactMatch);
    CHECK(score(std::string("B"), "A").reason == ScoreReason::Mismatch);
    CHECK(score(std::nullopt, "A").reason == ScoreReason::Unextractable);
    CHECK(score(std::nullopt, "A").score == 0);
  }

  TEST_CASE("truncated correct samples are rejected and counted") {
    MockScript s;
    modelclient::MockEntry e;
    e.key = "q";
    e.responses = {{"<think>r1</think>\\boxed{A}", FinishReason::Stop},
                   {"<think>r2</think>\\boxed{A}", FinishReason::Length},
                   {"<think>r3</think>\\boxed{B}", FinishReason::Stop},
                   {"<think>no end", FinishReason::Length}};
    s.entries.push_back(e);
    modelclient::MockModelClient m(s, "teacher");
    auto q = testing::mcq("q", "t", "A");
    const auto& tmpl = modelclient::TemplateRegistry::builtins().get("eval-boxed");
    DistillOutcome o;
    auto out = distill_question(q, m, tmpl, {0.6, 0.95, 100, 4, 50}, "ws", &o);
    REQUIRE(out.size() == 4);
    CHECK(out[0].accepted);
    CHECK_FALSE(out[1].accepted);
    CHECK_FALSE(out[2].accepted);
    CHECK_FALSE(out[3].accepted);
    CHECK(o.accepted == 1);
    CHECK(o.truncated_but_correct == 1);
    CHECK(out[0].reasoning == "r1");
    CHECK(out[0].model_id == "teacher");
    CHECK(out[2].seed == 52);
    CHECK(out[0].response_tokens == 1);
  }

  TEST_CASE("routing picks the multimodal teacher for image questions") {
    MockScript ts, ms;
    ts.fallback = modelclient::MockResponse{"\\boxed{A}", FinishReason::Stop};
    ms.fallback = modelclient::MockResponse{"<think>x</think><answer>A</answer>", FinishReason::Stop};
    modelclient::MockModelClient text(ts, "text"), mm(ms, "mm");
    const auto& reg = modelclient::TemplateRegistry::builtins();
    TeacherRouting r{{&text, &reg.get("distill-r1-answer")}, {&mm, &reg.get("distill-cot-think")}};
    std::vector<corpus::Question> qs = {testing::mcq("t", "x", "A"), testing::mcq("m", "y", "A")};
    qs[1].category = corpus::Category::MultimodalReasoning;
    qs[1].images.push_back({"i.png", 2, 2, "d"});
    auto run = distill_corpus(qs, r, {0.6, 0.95, 100, 2, 0}, 2);
    REQUIRE(run.samples.size() == 4);
    CHECK(run.samples[0].model_id == "text");
    CHECK(run.samples[2].model_id == "mm");
    CHECK(mm.ledger().front().prompt.find("<image 1>") != std::string::npos);
    for (const auto& t : run.samples) CHECK(t.accepted);
    TeacherRouting only_text{{&text, &reg.get("eval-boxed")}, {}};
    CHECK(&only_text.route(qs[1]) == &only_text.text);
  }

  TEST_CASE("failed requests are recorded and produce no samples") {
    modelclient::ClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    cfg.model_id = "dead";
    cfg.retry = {1, 1, 1};
    cfg.timeout_ms = 500;
    modelclient::HttpModelClient dead(cfg);
    const auto& reg = modelclient::TemplateRegistry::builtins();
    TeacherRouting r{{&dead, &reg.get("eval-boxed")}, {}};
    std::vector<corpus::Question> qs = {testing::mcq("a", "x", "A")};
    auto run = distill_corpus(qs, r, {0.6, 0.95, 10, 3, 0});
    CHECK(run.samples.empty());
    REQUIRE(run.outcomes.size() == 1);
    CHECK(run.outcomes[0].failed);
    CHECK(to_json(run.outcomes[0]).contains("failure"));
  }

  TEST_CASE("accepted set is exactly the accepted samples and is sound") {
    std::mt19937_64 rng(6);
    std::vector<corpus::Question> qs;
    MockScript s;
    std::size_t expected = 0;
    for (int i = 0; i < 60; ++i) {
      const std::string gold(1, static_cast<char>('A' + rng() % 4));
      qs.push_back(testing::mcq("q" + std::to_string(i), "t", gold));
      modelclient::MockEntry e;
      e.key = qs.back().id;
      for (int k = 0; k < 4; ++k) {
        const bool right = rng() % 2;
        const bool trunc = rng() % 4 == 0;
        const std::string ans = right ? gold : std::string(1, static_cast<char>('A' + (gold[0] - 'A' + 1) % 4));
        e.responses.push_back({"<think>r</think>\\boxed{" + ans + "}", trunc ? FinishReason::Length : FinishReason::Stop});
        expected += right && !trunc;
      }
      s.entries.push_back(e);
    }
    modelclient::MockModelClient m(s);
    const auto& reg = modelclient::TemplateRegistry::builtins();
    auto run = distill_corpus(qs, {{&m, &reg.get("eval-boxed")}, {}}, {0.6, 0.95, 100, 4, 0}, 3);
    auto set = build_accepted_set(run.samples, qs);
    CHECK(set.size() == expected);
    CHECK(verify_soundness(set).empty());
    std::size_t sum = 0;
    for (const auto& [_, c] : set.per_question_counts) sum += c;
    CHECK(sum == expected);

    std::vector<corpus::Question> missing(qs.begin() + 1, qs.end());
    CHECK_THROWS_AS(build_accepted_set(run.samples, missing), ConsistencyError);

    set.entries.front().gold = set.entries.front().gold == "A" ? "B" : "A";
    CHECK(verify_soundness(set).size() == 1);
  }
}
