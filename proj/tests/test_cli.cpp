#include <doctest.h>

#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"
#include "tracemill/cli.hpp"
#include "tracemill/decontam.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"

using namespace tracemill;
using namespace tracemill::cli;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

int sh(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void make_fixture(const fs::path& dir, int questions = 50) {
  REQUIRE(sh(std::string(MAKE_FIXTURE_EXE) + " " + dir.string() + " --questions " + std::to_string(questions)) == 0);
}

// relative path -> sha256 of every regular file below root
// Checkpoints are append logs in completion order; skip them when worker counts differ.
std::map<std::string, std::string> tree_digest(const fs::path& root, bool with_checkpoints = true) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (!with_checkpoints && rel.ends_with(".ckpt.jsonl")) continue;
    out[rel] = util::sha256_file(e.path());
  }
  return out;
}

json fixture_recipe(const fs::path& dir) { return util::read_json(dir / "recipe.json"); }

bool mentions(const std::vector<Diagnostic>& d, const std::string& a, const std::string& b = {}) {
  for (const auto& x : d)
    if (x.message.find(a) != std::string::npos && (b.empty() || x.message.find(b) != std::string::npos)) return true;
  return false;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("the fixture recipe validates") {
    TempDir d;
    make_fixture(d.path(), 10);
    auto diags = validate_recipe(fixture_recipe(d.path()));
    for (const auto& x : diags) MESSAGE(x.path << ": " << x.message);
    CHECK(diags.empty());
  }

  TEST_CASE("misordered stages name both stages") {
    TempDir d;
    make_fixture(d.path(), 10);
    auto doc = fixture_recipe(d.path());
    auto& st = doc["stages"];
    std::swap(st[1], st[4]);  // distill before decontaminate
    auto diags = validate_recipe(doc);
    CHECK(mentions(diags, "'distill'", "'decontaminate'"));

    auto no_decontam = fixture_recipe(d.path());
    no_decontam["stages"].erase(1);
    CHECK(mentions(validate_recipe(no_decontam), "'distill'", "'decontaminate'"));
    CHECK_THROWS_AS(parse_recipe(no_decontam, d.path()), RecipeError);
  }

  TEST_CASE("field-level diagnostics carry paths") {
    TempDir d;
    make_fixture(d.path(), 10);
    auto doc = fixture_recipe(d.path());
    doc["stages"][4]["k"] = "four";
    doc["stages"][4]["bogus"] = 1;
    doc["stages"].push_back({{"stage", "ingest"}, {"inputs", json::array()}});
    auto diags = validate_recipe(doc);
    bool k = false, bogus = false;
    for (const auto& x : diags) {
      k |= x.path == "stages[4].k";
      bogus |= x.path == "stages[4].bogus";
    }
    CHECK(k);
    CHECK(bogus);
    CHECK(diags.size() >= 3);
    try {
      parse_recipe(doc, d.path());
      FAIL("expected RecipeError");
    } catch (const RecipeError& e) {
      CHECK(e.diagnostics().size() == diags.size());
      CHECK(std::string(e.what()).find("stages[4].k") != std::string::npos);
    }
  }

  TEST_CASE("secrets must be environment references") {
    TempDir d;
    make_fixture(d.path(), 10);
    auto doc = fixture_recipe(d.path());
    doc["endpoints"]["remote"] = {{"kind", "http"}, {"endpoint", "https://example.invalid/v1/chat/completions"},
                                  {"model_id", "m"}, {"api_key", "sk-literal"}};
    CHECK(mentions(validate_recipe(doc), "environment reference"));
    doc["endpoints"]["remote"]["api_key"] = "${REMOTE_KEY}";
    auto r = parse_recipe(doc, d.path());
    CHECK(r.endpoints.at("remote").at("api_key_env") == "REMOTE_KEY");
    CHECK_FALSE(r.endpoints.at("remote").contains("api_key"));
  }

  TEST_CASE("recipe hash ignores key order, whitespace and workers") {
    TempDir d;
    make_fixture(d.path(), 10);
    auto doc = fixture_recipe(d.path());
    const auto h = recipe_hash(doc);
    auto reordered = json::parse(doc.dump(4));
    CHECK(recipe_hash(reordered) == h);
    reordered["workers"] = 8;
    CHECK(recipe_hash(reordered) == h);
    reordered["seed"] = 8;
    CHECK(recipe_hash(reordered) != h);
    auto a = parse_recipe(doc, d.path());
    auto b = parse_recipe(doc, d.path(), 99);
    CHECK(a.hash != b.hash);
    CHECK(b.seed == 99);
    CHECK(load_recipe(d / "recipe.json").hash == a.hash);
    util::write_file(d / "broken.json", "{ nope");
    CHECK_THROWS_AS(load_recipe(d / "broken.json"), RecipeError);
  }

  TEST_CASE("full fixture run, determinism and resume without requests") {
    TempDir d;
    make_fixture(d.path());
    RunOptions o1;
    o1.run_dir = d / "run1";
    auto r1 = run(d / "recipe.json", o1);
    INFO(r1.message);
    REQUIRE(r1.exit_code == kOk);
    CHECK(r1.stages.size() == 8);
    for (const auto& s : r1.stages) CHECK(s.executed);

    RunOptions o2 = o1;
    o2.run_dir = d / "run2";
    o2.workers = 3;
    auto r2 = run(d / "recipe.json", o2);
    REQUIRE(r2.exit_code == kOk);
    CHECK(r2.recipe_hash == r1.recipe_hash);
    CHECK(tree_digest(d / "run1", false) == tree_digest(d / "run2", false));

    const auto manifest = corpus::read_manifest(d / "run1/stages/06-export/dataset/manifest.json");
    CHECK(manifest.recipe_hash == r1.recipe_hash);
    CHECK(manifest.num_examples > 0);
    std::int64_t n = 0;
    for (const auto& row : corpus::read_shard_rows(d / "run1/stages/06-export/dataset/manifest.json")) {
      ++n;
      CHECK(row.contains("messages"));
    }
    CHECK(n == manifest.num_examples);
    auto rep = util::read_json(d / "run1/stages/07-eval/bench.report.json");
    CHECK(rep.at("recipe_hash") == r1.recipe_hash);
    CHECK(rep.at("per_seed_accuracy").size() == 3);
    CHECK(rep.at("forced_exit_count").get<int>() == 4);

    // contaminated train items never reach the export
    std::set<std::string> flagged;
    for (const auto& e : decontam::read_report(d / "run1/stages/01-decontaminate/train.decontam.jsonl"))
      flagged.insert(e.id);
    CHECK(flagged.size() == 6);
    for (const auto& row : corpus::read_shard_rows(d / "run1/stages/06-export/dataset/manifest.json")) {
      const auto id = row.at("id").get<std::string>();
      CHECK(flagged.count(id.substr(0, id.find('@'))) == 0);
    }

    int factory_calls = 0;
    RunOptions o3 = o1;
    o3.resume = true;
    o3.client_factory = [&](const std::string&, const json&) {
      ++factory_calls;
      return std::shared_ptr<modelclient::ModelClient>();
    };
    const auto before = tree_digest(d / "run1");
    auto r3 = run(d / "recipe.json", o3);
    REQUIRE(r3.exit_code == kOk);
    for (const auto& s : r3.stages) CHECK(s.skipped_done);
    CHECK(factory_calls == 0);
    CHECK(tree_digest(d / "run1") == before);
  }

  TEST_CASE("a failing endpoint gives exit 3, resume finishes the run") {
    TempDir d;
    make_fixture(d.path(), 20);
    RunOptions o;
    o.run_dir = d / "run";
    o.client_factory = [](const std::string& role, const json&) -> std::shared_ptr<modelclient::ModelClient> {
      if (role != "student") return nullptr;
      modelclient::ClientConfig cfg;
      cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
      cfg.model_id = "dead";
      cfg.retry = {1, 1, 1};
      cfg.timeout_ms = 500;
      return std::make_shared<modelclient::HttpModelClient>(cfg);
    };
    auto r = run(d / "recipe.json", o);
    CHECK(r.exit_code == kPartial);
    CHECK(r.stages.back().partial);
    CHECK_FALSE(fs::exists(d / "run/stages/07-eval/.done"));

    RunOptions again;
    again.run_dir = d / "run";
    again.resume = true;
    auto r2 = run(d / "recipe.json", again);
    CHECK(r2.exit_code == kOk);
    for (std::size_t i = 0; i + 1 < r2.stages.size(); ++i) CHECK(r2.stages[i].skipped_done);
    CHECK(r2.stages.back().executed);
  }

  TEST_CASE("stage selection and bad selectors") {
    TempDir d;
    make_fixture(d.path(), 10);
    RunOptions o;
    o.run_dir = d / "run";
    o.stages = {"ingest", "decontaminate"};
    auto r = run(d / "recipe.json", o);
    CHECK(r.exit_code == kOk);
    CHECK(fs::exists(d / "run/stages/01-decontaminate/.done"));
    CHECK_FALSE(fs::exists(d / "run/stages/02-preprocess"));
    o.stages = {"teleport"};
    CHECK(run(d / "recipe.json", o).exit_code == kValidation);
    RunOptions none;
    CHECK(run(d / "recipe.json", none).exit_code == kValidation);
    CHECK(run(d / "missing.json", o).exit_code != kOk);
  }

  TEST_CASE("report formatting") {
    corpus::DatasetManifest m;
    m.recipe_hash = "abc";
    m.num_questions = 2;
    m.num_examples = 4;
    m.total_response_tokens = 10;
    m.per_category_counts["TextOnly"] = 4;
    m.shard_paths = {"shard-00000.jsonl"};
    CHECK(format_manifest(m) ==
          "dataset manifest\n"
          "  recipe_hash      abc\n"
          "  tokenizer        ws\n"
          "  questions        2\n"
          "  examples         4\n"
          "  response tokens  10 (2.5 per example)\n"
          "  shards           1\n"
          "per category\n"
          "  TextOnly  4\n");

    evalharness::EvalReport r;
    r.benchmark_id = "bench";
    r.model_id = "m";
    r.template_id = "eval-boxed";
    r.seeds = {0, 1};
    r.per_seed_accuracy = {50.0, 75.0};
    r.mean_accuracy = 62.5;
    r.ci95 = {40.0, 80.0};
    r.per_question.resize(4);
    r.avg_response_tokens = 12.25;
    r.forced_exit_count = 1;
    r.incomplete = true;
    CHECK(format_eval_report(r) ==
          "eval report: bench\n"
          "  model     m\n"
          "  template  eval-boxed\n"
          "  questions 4\n"
          "seed      accuracy\n"
          "  0        50.00\n"
          "  1        75.00\n"
          "mean accuracy        62.50\n"
          "95% CI               [40.00, 80.00]\n"
          "avg response tokens  12.2\n"
          "forced exits         1\n"
          "status               INCOMPLETE\n");
  }

  TEST_CASE("report exit codes") {
    TempDir d;
    std::ostringstream out, err;
    CHECK(report(d / "nothing.json", out, err) == kRuntime);
    CHECK(err.str().find("no such file") != std::string::npos);
    util::write_file(d / "bad.json", "{");
    CHECK(report(d / "bad.json", out, err) == kValidation);
    util::write_file(d / "other.json", "{\"hello\": 1}");
    CHECK(report(d / "other.json", out, err) == kValidation);
    corpus::write_manifest(d / "m.json", corpus::DatasetManifest{});
    CHECK(report(d / "m.json", out, err) == kOk);
  }

  TEST_CASE("command line binary") {
    TempDir d;
    make_fixture(d.path(), 10);
    const std::string exe = TRACEMILL_EXE;
    const std::string recipe = (d / "recipe.json").string();
    CHECK(sh(exe + " run -r " + recipe + " --run-dir " + (d / "run").string()) == 0);
    CHECK(sh(exe + " report " + (d / "run/stages/06-export/dataset/manifest.json").string()) == 0);
    CHECK(sh(exe + " report " + (d / "nope.json").string()) == 2);
    CHECK(sh(exe + " eval -r " + recipe + " --run-dir " + (d / "run").string() + " --resume") == 0);
    auto doc = fixture_recipe(d.path());
    doc["stages"][4]["k"] = 0;
    util::write_file(d / "bad.json", doc.dump());
    CHECK(sh(exe + " run -r " + (d / "bad.json").string() + " --run-dir " + (d / "run2").string()) == 1);
    CHECK(sh(exe + " frobnicate") != 0);
  }
}
