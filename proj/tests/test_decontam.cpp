#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "tracemill/decontam.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"

using namespace tracemill;
using corpus::Question;
using decontam::Reason;
using testing::TempDir;

namespace {

oracle::Flag flag_of(const decontam::Verdict& v) {
  if (!v.flag) return oracle::Flag::Clean;
  switch (v.reason) {
    case Reason::NgramOverlap: return oracle::Flag::Ngram;
    case Reason::ShortExactMatch: return oracle::Flag::Short;
    case Reason::ImageOverlap: return oracle::Flag::Image;
    default: return oracle::Flag::Clean;
  }
}

// Splices `len` consecutive benchmark tokens into otherwise disjoint train text.
std::string plant(std::mt19937_64& rng, const std::string& bench_text, std::size_t len) {
  auto toks = decontam::normalize(bench_text);
  const std::size_t start = rng() % (toks.size() - len + 1);
  std::string s = "alpha beta gamma";
  for (std::size_t i = 0; i < len; ++i) s += " " + toks[start + i];
  return s + " delta epsilon";
}

std::vector<Question> random_bench(std::mt19937_64& rng, std::size_t n) {
  std::vector<Question> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto q = testing::mcq("b" + std::to_string(i), testing::random_words(rng, 3 + rng() % 40, 5000), "A");
    if (rng() % 4 == 0) {
      q.category = corpus::Category::MultimodalReasoning;
      q.images.push_back({"i.png", 8, 8, util::sha256_hex("img" + std::to_string(rng() % 50))});
    }
    out.push_back(q);
  }
  return out;
}

}  // namespace

TEST_SUITE("decontam") {
  TEST_CASE("normalize matches the regex oracle") {
    CHECK(decontam::normalize("Hello, World!  x-ray") == std::vector<std::string>{"hello", "world", "x", "ray"});
    CHECK(decontam::normalize("\xc3\x89t\xc3\xa9 DE") == std::vector<std::string>{"\xc3\x89t\xc3\xa9", "de"});
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
      std::string s;
      for (std::size_t k = 0; k < rng() % 50; ++k) s.push_back(static_cast<char>(1 + rng() % 127));
      CHECK(decontam::normalize(s) == oracle::normalize(s));
    }
  }

  TEST_CASE("window fingerprints") {
    std::vector<std::string> t = {"a", "b", "c", "d"};
    CHECK(decontam::window_fingerprints(t, 2).size() == 3);
    CHECK(decontam::window_fingerprints(t, 5).empty());
    auto w = decontam::window_fingerprints(t, 2);
    CHECK(w[0] != w[1]);
    std::vector<std::string> u = {"x", "a", "b"};
    CHECK(decontam::window_fingerprints(u, 2)[1] == w[0]);
    // token boundaries matter
    std::vector<std::string> p = {"ab", "c"}, q = {"a", "bc"};
    CHECK(decontam::whole_text_fingerprint(p) != decontam::whole_text_fingerprint(q));
  }

  TEST_CASE("planted overlaps of 15, 16 and 17 tokens") {
    std::mt19937_64 rng(9);
    auto bench = std::vector<Question>{testing::mcq("b", testing::random_words(rng, 60, 100000), "A")};
    auto idx = decontam::build_index(bench);
    for (std::size_t len : {15u, 16u, 17u}) {
      for (int rep = 0; rep < 20; ++rep) {
        auto q = testing::mcq("t", plant(rng, bench[0].text, len), "A");
        auto v = decontam::is_contaminated(q, idx);
        CHECK(v.flag == (len >= 16));
        if (v.flag) CHECK(v.reason == Reason::NgramOverlap);
      }
    }
  }

  TEST_CASE("short benchmark texts match only exactly") {
    std::vector<Question> bench = {testing::mcq("b", "Which nerve, exactly?", "A")};
    auto idx = decontam::build_index(bench);
    CHECK(decontam::is_contaminated(testing::mcq("t", "which NERVE exactly", "A"), idx).reason ==
          Reason::ShortExactMatch);
    CHECK_FALSE(decontam::is_contaminated(testing::mcq("t", "which nerve exactly now", "A"), idx).flag);
    CHECK_FALSE(decontam::is_contaminated(testing::mcq("t", "", "A"), idx).flag);
  }

  TEST_CASE("image digests flag from any benchmark category") {
    auto b = testing::mcq("b", "look", "A");
    b.category = corpus::Category::MultimodalClassification;
    b.images.push_back({"x.png", 4, 4, "abc"});
    std::vector<Question> bench = {b};
    auto idx = decontam::build_index(bench);
    auto t = testing::mcq("t", "totally different words here", "A");
    t.category = corpus::Category::MultimodalReasoning;
    t.images.push_back({"y.png", 4, 4, "abc"});
    CHECK(decontam::is_contaminated(t, idx).reason == Reason::ImageOverlap);
    // multimodal bench text is not indexed by default
    auto t2 = testing::mcq("t2", "look", "A");
    CHECK_FALSE(decontam::is_contaminated(t2, idx).flag);
    auto all = decontam::build_index(bench, {16, false});
    CHECK(decontam::is_contaminated(t2, all).flag);
  }

  TEST_CASE("random corpora agree with the exact oracle") {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 30; ++round) {
      auto bench = random_bench(rng, 1 + rng() % 40);
      std::vector<Question> train;
      for (std::size_t i = 0; i < 150; ++i) {
        Question q;
        const auto& src = bench[rng() % bench.size()];
        const auto bt = decontam::normalize(src.text).size();
        if (rng() % 3 == 0 && bt >= 17)
          q = testing::mcq("t" + std::to_string(i), plant(rng, src.text, 15 + rng() % 3), "A");
        else if (rng() % 5 == 0)
          q = testing::mcq("t" + std::to_string(i), src.text, "A");
        else
          q = testing::mcq("t" + std::to_string(i), testing::random_words(rng, rng() % 30, 5000), "A");
        if (rng() % 6 == 0) {
          q.category = corpus::Category::MultimodalReasoning;
          q.images.push_back({"i.png", 8, 8, util::sha256_hex("img" + std::to_string(rng() % 50))});
        }
        train.push_back(q);
      }
      const std::size_t n = 16;
      auto expect = oracle::decontam_flags(train, bench, n);
      auto idx = decontam::build_index(bench, {n});
      REQUIRE(idx == decontam::build_index_serial(bench, {n}));
      for (std::size_t i = 0; i < train.size(); ++i)
        CHECK(flag_of(decontam::is_contaminated(train[i], idx)) == expect[i]);
      auto par = decontam::filter_corpus(train, idx);
      auto ser = decontam::filter_corpus_serial(train, idx);
      CHECK(par.report == ser.report);
      CHECK(par.clean == ser.clean);
      CHECK(par.clean.size() + par.report.size() == train.size());
    }
  }

  TEST_CASE("filter output preserves order and every id lands in exactly one list") {
    std::mt19937_64 rng(2);
    auto bench = random_bench(rng, 10);
    bench[0].category = corpus::Category::TextOnly;
    bench[0].images.clear();
    std::vector<Question> train;
    for (int i = 0; i < 40; ++i)
      train.push_back(testing::mcq("t" + std::to_string(i), i % 4 ? testing::random_words(rng, 20) : bench[0].text, "A"));
    auto res = decontam::filter_corpus(train, decontam::build_index(bench));
    std::vector<std::string> merged;
    std::size_t c = 0, r = 0;
    for (const auto& q : train) {
      if (c < res.clean.size() && res.clean[c].id == q.id) {
        ++c;
        merged.push_back(q.id);
      } else if (r < res.report.size() && res.report[r].id == q.id) {
        ++r;
        merged.push_back(q.id);
      }
    }
    CHECK(merged.size() == train.size());
    CHECK(res.report.size() == 10);
  }

  TEST_CASE("index save/load round trip and report io") {
    TempDir d;
    std::mt19937_64 rng(4);
    auto bench = random_bench(rng, 30);
    auto idx = decontam::build_index(bench, {8});
    decontam::save_index(d / "idx.bin", idx);
    auto back = decontam::load_index(d / "idx.bin");
    CHECK(back == idx);
    CHECK(back.n() == 8);
    util::write_file(d / "bad.bin", "not an index");
    CHECK_THROWS_AS(decontam::load_index(d / "bad.bin"), Error);

    std::vector<decontam::ContaminationEntry> rep = {{"a", Reason::NgramOverlap}, {"b", Reason::ImageOverlap}};
    decontam::write_report(d / "r.jsonl", rep);
    CHECK(decontam::read_report(d / "r.jsonl") == rep);
    CHECK_THROWS_AS(decontam::parse_reason("Dirty"), ValidationError);
  }

  TEST_CASE("n must be positive") {
    std::vector<Question> none;
    CHECK_THROWS_AS(decontam::build_index(none, {0}), ConfigError);
  }
}
