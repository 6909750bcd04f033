// Command-line front end: one subcommand per pipeline stage plus run/report.
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tracemill/cli.hpp"

namespace cli = tracemill::cli;

namespace {

struct RunFlags {
  std::string recipe;
  std::string run_dir = "run";
  std::vector<std::string> stages;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
};

void add_run_flags(CLI::App* sub, RunFlags& f, bool with_stages) {
  sub->add_option("-r,--recipe", f.recipe, "recipe JSON file")->required();
  sub->add_option("--run-dir", f.run_dir, "directory holding every stage's outputs");
  sub->add_flag("--resume", f.resume, "skip stages already completed under this recipe");
  sub->add_option("--seed", f.seed, "override the recipe seed");
  sub->add_option("--workers", f.workers, "worker threads per stage");
  if (with_stages) sub->add_option("--stages", f.stages, "stage types to execute (default: all)");
}

int execute(const RunFlags& f) {
  cli::RunOptions opts;
  opts.run_dir = f.run_dir;
  opts.stages = f.stages;
  opts.resume = f.resume;
  opts.seed = f.seed;
  opts.workers = f.workers;
  const auto res = cli::run(f.recipe, opts);
  for (const auto& s : res.stages) {
    const char* what = s.partial ? "partial" : s.executed ? "done" : s.skipped_done ? "skipped (complete)" : "not selected";
    std::cout << s.id << ": " << what << "\n";
  }
  if (!res.recipe_hash.empty()) std::cout << "recipe_hash " << res.recipe_hash << "\n";
  if (!res.message.empty()) std::cerr << res.message << "\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tracemill: reasoning-trace dataset pipeline"};
  app.require_subcommand(1);

  RunFlags run_flags;
  add_run_flags(app.add_subcommand("run", "run a recipe"), run_flags, true);

  // Standalone stage commands run the recipe's entry for that stage only;
  // upstream outputs are expected in the run directory.
  const std::vector<std::pair<std::string, std::string>> stage_cmds = {
      {"ingest", "ingest"}, {"decontam", "decontaminate"}, {"preprocess", "preprocess"}, {"filter", "filter"},
      {"distill", "distill"}, {"mix", "mix"}, {"export", "export"}, {"eval", "eval"}};
  std::vector<std::pair<CLI::App*, std::string>> stage_subs;
  std::vector<RunFlags> stage_flags(stage_cmds.size());
  for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
    auto* sub = app.add_subcommand(stage_cmds[i].first, "run only the " + stage_cmds[i].second + " stage");
    add_run_flags(sub, stage_flags[i], false);
    stage_subs.emplace_back(sub, stage_cmds[i].second);
  }

  std::string report_path;
  auto* rep = app.add_subcommand("report", "summarize a manifest or eval report");
  rep->add_option("path", report_path, "manifest.json or *.report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cli::kOk : cli::kValidation;
  }

  if (app.got_subcommand("run")) return execute(run_flags);
  if (*rep) return cli::report(report_path, std::cout, std::cerr);
  for (std::size_t i = 0; i < stage_subs.size(); ++i)
    if (*stage_subs[i].first) {
      stage_flags[i].stages = {stage_subs[i].second};
      return execute(stage_flags[i]);
    }
  return cli::kValidation;
}
