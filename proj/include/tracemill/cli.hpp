#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracemill/corpus.hpp"
#include "tracemill/evalharness.hpp"
#include "tracemill/modelclient.hpp"
#include "tracemill/util/error.hpp"

namespace tracemill::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kPartial = 3 };

/// Pipeline order; a recipe lists a subset, each at most once.
inline const std::vector<std::string> kStageTypes = {"ingest", "decontaminate", "preprocess", "filter",
                                                     "distill", "mix",           "export",     "eval"};

struct Diagnostic {
  std::string path;  // e.g. "stages[2].k"
  std::string message;
};

class RecipeError : public ValidationError {
 public:
  explicit RecipeError(std::vector<Diagnostic> diags);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

struct StageConfig {
  std::string type;
  json cfg;
  std::size_t index = 0;

  /// "NN-type", the stage's directory name under <run_dir>/stages.
  std::string dir_name() const;
};

struct Recipe {
  std::string version;
  std::uint64_t seed = 0;
  std::string tokenizer_id = "ws";
  std::map<std::string, json> endpoints;  // role -> client config, secrets resolved to env names
  std::vector<StageConfig> stages;
  std::filesystem::path base_dir;  // relative input paths resolve against this
  json canonical;                  // the hashed form
  std::string hash;
  std::size_t workers = 1;

  const StageConfig* find(std::string_view type) const;
};

/// Every problem found, with field paths. Empty when the recipe is valid.
std::vector<Diagnostic> validate_recipe(const json& doc);

/// Validates and normalizes. `api_key: "${VAR}"` in an endpoint becomes
/// api_key_env VAR; any other api_key value is rejected. The seed override,
/// when given, replaces the recipe seed before hashing. Throws RecipeError.
Recipe parse_recipe(const json& doc, const std::filesystem::path& base_dir,
                    std::optional<std::uint64_t> seed_override = std::nullopt);
Recipe load_recipe(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// sha256 of the canonical (sorted-key, whitespace-free) recipe with
/// execution-only fields ("workers") removed.
std::string recipe_hash(const json& doc);

using ClientFactory =
    std::function<std::shared_ptr<modelclient::ModelClient>(const std::string& role, const json& cfg)>;

struct RunOptions {
  std::filesystem::path run_dir;
  std::vector<std::string> stages;  // stage types to execute; empty = all
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;       // 0: the recipe's "workers" field, else 1
  ClientFactory client_factory;  // default: make_client(cfg, recipe dir)
};

struct StageStatus {
  std::string id;
  bool executed = false;
  bool skipped_done = false;
  bool partial = false;
};

struct RunResult {
  int exit_code = kOk;
  std::string recipe_hash;
  std::vector<StageStatus> stages;
  std::string message;
};

/// Runs the selected stages in recipe order. Stage outputs live under
/// <run_dir>/stages/NN-type/ and a completed stage leaves a `.done` stamp
/// holding the recipe hash; with resume, stamped stages are skipped.
/// Errors are reported through exit_code/message rather than thrown.
RunResult run(const std::filesystem::path& recipe_path, const RunOptions& opts);
RunResult run(const Recipe& recipe, const RunOptions& opts);

/// Human-readable summary of a manifest.json or eval report JSON.
std::string format_manifest(const corpus::DatasetManifest& m);
std::string format_eval_report(const evalharness::EvalReport& r);
/// Prints the summary to out, errors to err; returns an exit code.
int report(const std::filesystem::path& path, std::ostream& out, std::ostream& err);

}  // namespace tracemill::cli
