#include <algorithm>
#include <iostream>
#include <set>

#include "tracemill/cli.hpp"
#include "tracemill/decontam.hpp"
#include "tracemill/distill.hpp"
#include "tracemill/mixture.hpp"
#include "tracemill/preprocess.hpp"
#include "tracemill/qfilter.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/parallel.hpp"

namespace tracemill::cli {

namespace fs = std::filesystem;
using corpus::Question;

namespace {

constexpr const char* kDoneStamp = ".done";
constexpr const char* kOwnerStamp = ".recipe";

// Where each stage left its outputs; rebuilt by replaying the recipe, so
// skipped stages still tell later ones where to read. Paths are relative to
// the run directory.
struct State {
  std::map<std::string, fs::path> corpus;
  std::map<std::string, fs::path> decontam_report;
  std::map<std::string, fs::path> traces;  // manifest path
  fs::path assembly_dir;
};

std::vector<std::string> string_list(const json& cfg, const char* key) {
  return cfg.value(key, std::vector<std::string>{});
}

modelclient::SamplingParams params_from(const json& cfg, std::uint64_t seed) {
  modelclient::SamplingParams p = cfg.contains("params") ? cfg["params"].get<modelclient::SamplingParams>()
                                                         : modelclient::SamplingParams{};
  if (!p.seed) p.seed = static_cast<std::int64_t>(seed);
  return p;
}

class Runner {
 public:
  Runner(const Recipe& r, const RunOptions& o) : r_(r), o_(o), run_dir_(o.run_dir) {
    workers_ = o.workers ? o.workers : std::max<std::size_t>(1, r.workers);
  }

  RunResult run() {
    RunResult res;
    res.recipe_hash = r_.hash;
    fs::create_directories(run_dir_);
    util::write_file(run_dir_ / "run.json",
                     json{{"recipe_hash", r_.hash}, {"recipe", r_.canonical}}.dump(2) + "\n");
    for (const auto& stage : r_.stages) {
      StageStatus status{stage.dir_name()};
      const fs::path rel = fs::path("stages") / stage.dir_name();
      const fs::path dir = run_dir_ / rel;
      const bool selected = o_.stages.empty() || std::find(o_.stages.begin(), o_.stages.end(), stage.type) != o_.stages.end();
      const bool done = stamped(dir / kDoneStamp);
      const bool execute = selected && !(o_.resume && done);
      if (execute) {
        if (!(o_.resume && stamped(dir / kOwnerStamp))) fs::remove_all(dir);
        fs::remove(dir / kDoneStamp);
        fs::create_directories(dir);
        util::write_file(dir / kOwnerStamp, r_.hash);
      }
      status.executed = execute;
      status.skipped_done = selected && !execute;
      status.partial = dispatch(stage, rel, execute);
      res.stages.push_back(status);
      if (status.partial) {
        res.exit_code = kPartial;
        res.message = "stage " + stage.dir_name() + " finished partially; re-run with --resume to continue";
        return res;
      }
      if (execute) util::write_file(dir / kDoneStamp, r_.hash);
    }
    return res;
  }

 private:
  bool stamped(const fs::path& p) const {
    if (!fs::exists(p)) return false;
    return util::read_file(p) == r_.hash;
  }

  bool dispatch(const StageConfig& s, const fs::path& rel, bool execute) {
    if (s.type == "ingest") return ingest(s.cfg, rel, execute);
    if (s.type == "decontaminate") return decontaminate(s.cfg, rel, execute);
    if (s.type == "preprocess") return preprocess(s.cfg, rel, execute);
    if (s.type == "filter") return filter(s.cfg, rel, execute);
    if (s.type == "distill") return distill(s.cfg, rel, execute);
    if (s.type == "mix") return mix(s.cfg, rel, execute);
    if (s.type == "export") return export_stage(s.cfg, rel, execute);
    if (s.type == "eval") return eval(s.cfg, rel, execute);
    throw ConfigError("unknown stage " + s.type);
  }

  modelclient::ModelClient& client(const std::string& role) {
    auto it = clients_.find(role);
    if (it != clients_.end()) return *it->second;
    const json& cfg = r_.endpoints.at(role);
    std::shared_ptr<modelclient::ModelClient> c;
    if (o_.client_factory) c = o_.client_factory(role, cfg);
    if (!c) c = modelclient::make_client(cfg, r_.base_dir);
    return *clients_.emplace(role, std::move(c)).first->second;
  }

  fs::path input_path(const std::string& p) const {
    fs::path path(p);
    return path.is_relative() ? r_.base_dir / path : path;
  }

  std::vector<Question> load(const std::string& name) const {
    const auto it = state_.corpus.find(name);
    if (it == state_.corpus.end()) throw ConfigError("corpus '" + name + "' has not been produced");
    auto res = corpus::ingest(run_dir_ / it->second, "native");
    return std::move(res.questions);
  }

  // Images written by the preprocess stage are stored relative to the run
  // directory; clients need a path they can open.
  std::vector<Question> resolved(std::vector<Question> qs) const {
    for (auto& q : qs)
      for (auto& img : q.images)
        if (fs::path(img.path_or_uri).is_relative()) img.path_or_uri = (run_dir_ / img.path_or_uri).string();
    return qs;
  }

  static std::vector<Question> select(const std::vector<Question>& qs, const std::vector<Question>& kept) {
    std::set<std::string> ids;
    for (const auto& q : kept) ids.insert(q.id);
    std::vector<Question> out;
    for (const auto& q : qs)
      if (ids.count(q.id)) out.push_back(q);
    return out;
  }

  bool ingest(const json& cfg, const fs::path& rel, bool execute) {
    const auto on_error = cfg.value("on_error", std::string("abort")) == "skip" ? corpus::OnError::Skip : corpus::OnError::Abort;
    json meta = json::object();
    for (const auto& in : cfg.at("inputs")) {
      const std::string name = in.at("name").get<std::string>();
      const fs::path out = rel / (name + ".jsonl");
      state_.corpus[name] = out;
      if (!execute) continue;
      const fs::path src = input_path(in.at("path").get<std::string>());
      auto res = corpus::ingest(src, in.value("schema", std::string("native")), on_error);
      for (auto& q : res.questions)
        for (auto& img : q.images)
          if (fs::path(img.path_or_uri).is_relative())
            img.path_or_uri = fs::absolute(src.parent_path() / img.path_or_uri).lexically_normal().string();
      corpus::write_questions(run_dir_ / out, res.questions);
      meta[name] = {{"questions", res.questions.size()}, {"skipped", res.errors.size()}};
    }
    if (execute) util::write_file(run_dir_ / rel / "ingest.json", meta.dump(2) + "\n");
    return false;
  }

  bool decontaminate(const json& cfg, const fs::path& rel, bool execute) {
    const auto names = string_list(cfg, "corpora");
    std::vector<Question> bench;
    decontam::DecontamIndex idx;
    if (execute) {
      for (const auto& b : string_list(cfg, "benchmarks")) {
        auto qs = load(b);
        bench.insert(bench.end(), qs.begin(), qs.end());
      }
      decontam::BuildOptions bo;
      bo.n = cfg.value("n", decontam::kDefaultN);
      bo.text_only_benchmarks = cfg.value("text_only_benchmarks", true);
      idx = decontam::build_index(bench, bo);
      decontam::save_index(run_dir_ / rel / "index.bin", idx);
    }
    json meta = json::object();
    for (const auto& name : names) {
      const fs::path out = rel / (name + ".jsonl");
      const fs::path report = rel / (name + ".decontam.jsonl");
      if (execute) {
        const auto qs = load(name);
        auto res = decontam::filter_corpus(qs, idx);
        corpus::write_questions(run_dir_ / out, res.clean);
        decontam::write_report(run_dir_ / report, res.report);
        meta[name] = {{"input", qs.size()}, {"clean", res.clean.size()}, {"flagged", res.report.size()}};
      }
      state_.corpus[name] = out;
      state_.decontam_report[name] = report;
    }
    if (execute) util::write_file(run_dir_ / rel / "decontam.json", meta.dump(2) + "\n");
    return false;
  }

  bool preprocess(const json& cfg, const fs::path& rel, bool execute) {
    for (const auto& name : string_list(cfg, "corpora")) {
      const fs::path out = rel / (name + ".jsonl");
      if (execute) {
        auto qs = load(name);
        if (cfg.contains("resize") && cfg["resize"] != false) {
          preprocess::ResizePolicy policy;
          if (cfg["resize"].is_object()) {
            policy.max_pixels = cfg["resize"].value("max_pixels", policy.max_pixels);
            policy.min_pixels = cfg["resize"].value("min_pixels", policy.min_pixels);
            policy.factor = cfg["resize"].value("factor", policy.factor);
          }
          policy.validate();
          const fs::path img_dir = run_dir_ / rel / "images";
          for (auto& q : qs)
            for (auto& img : q.images) {
              const bool in_run = fs::path(img.path_or_uri).is_relative();
              auto resized = preprocess::apply_resize(img, policy, in_run ? run_dir_ : fs::path{}, img_dir);
              if (resized.path_or_uri != img.path_or_uri)
                resized.path_or_uri = fs::relative(resized.path_or_uri, run_dir_).string();
              img = resized;
            }
        }
        if (cfg.contains("balance")) {
          const auto& b = cfg["balance"];
          std::optional<std::size_t> cap;
          if (b.contains("per_class_cap")) cap = b["per_class_cap"].get<std::size_t>();
          qs = preprocess::stratified_balance(qs, util::derive_seed(r_.seed, "balance:" + name), cap);
        }
        if (cfg.contains("annotate")) {
          auto& judge = client(cfg["annotate"].at("endpoint").get<std::string>());
          const auto calls = resolved(qs);
          std::vector<std::optional<std::string>> errors(qs.size());
          util::parallel_for(qs.size(), workers_, [&](std::size_t i) {
            auto a = preprocess::annotate_metadata(calls[i], judge);
            errors[i] = a.error;
            if (!a.error) qs[i].metadata = a.question.metadata;
          });
          for (std::size_t i = 0; i < qs.size(); ++i)
            if (errors[i]) std::cerr << "preprocess: annotation failed for " << qs[i].id << ": " << *errors[i] << "\n";
        }
        corpus::write_questions(run_dir_ / out, qs);
      }
      state_.corpus[name] = out;
    }
    return false;
  }

  bool filter(const json& cfg, const fs::path& rel, bool execute) {
    const auto strategy = qfilter::parse_strategy(cfg.value("strategy", std::string("None")));
    for (const auto& name : string_list(cfg, "corpora")) {
      const fs::path out = rel / (name + ".jsonl");
      if (execute) {
        const auto qs = load(name);
        qfilter::FilterConfig fc;
        fc.strategy = strategy;
        fc.workers = workers_;
        if (strategy != qfilter::Strategy::None) fc.client = &client(cfg.at("endpoint").get<std::string>());
        fc.proportion.n = cfg.value("n", 16);
        fc.proportion.lo = cfg.value("lo", 2);
        fc.proportion.hi = cfg.value("hi", 14);
        fc.proportion.tmpl = &modelclient::TemplateRegistry::builtins().get(cfg.value("template", std::string("eval-boxed")));
        fc.proportion.params = params_from(cfg, r_.seed);
        fc.judge.keep_lo = cfg.value("keep_lo", 3);
        fc.judge.keep_hi = cfg.value("keep_hi", 6);
        const auto calls = resolved(qs);
        auto res = qfilter::apply_filter(calls, fc);
        corpus::write_questions(run_dir_ / out, select(qs, res.kept));
        qfilter::write_report(run_dir_ / rel / (name + ".filter.jsonl"), res.report);
      }
      state_.corpus[name] = out;
    }
    if (execute) {
      json meta = {{"strategy", qfilter::to_string(strategy)}};
      if (strategy == qfilter::Strategy::JudgeDifficulty)
        meta["difficulty_rubric"] = qfilter::kDifficultyRubric, meta["keep_lo"] = cfg.value("keep_lo", 3),
        meta["keep_hi"] = cfg.value("keep_hi", 6);
      else if (strategy != qfilter::Strategy::None)
        meta["n"] = cfg.value("n", 16), meta["lo"] = cfg.value("lo", 2), meta["hi"] = cfg.value("hi", 14);
      util::write_file(run_dir_ / rel / "filter.json", meta.dump(2) + "\n");
    }
    return false;
  }

  bool distill(const json& cfg, const fs::path& rel, bool execute) {
    bool partial = false;
    for (const auto& name : string_list(cfg, "corpora")) {
      const fs::path out_dir = rel / name;
      if (execute) {
        const auto& reg = modelclient::TemplateRegistry::builtins();
        const auto& text_tmpl = reg.get(cfg.value("template", std::string("distill-cot-think")));
        const auto& mm_tmpl = reg.get(cfg.value("multimodal_template", text_tmpl.template_id));
        distill::TeacherRouting routing;
        routing.text = {&client(cfg.at("teacher").get<std::string>()), &text_tmpl};
        routing.multimodal = {&client(cfg.value("multimodal_teacher", cfg.at("teacher").get<std::string>())), &mm_tmpl};
        auto params = params_from(cfg, r_.seed);
        params.n_samples = cfg.value("k", 4);

        const auto qs = load(name);
        const auto calls = resolved(qs);
        auto res = distill::distill_corpus(calls, routing, params, workers_, r_.tokenizer_id);
        std::vector<json> log;
        for (const auto& o : res.outcomes) {
          log.push_back(distill::to_json(o));
          partial = partial || o.failed;
        }
        util::write_jsonl(run_dir_ / rel / (name + ".log.jsonl"), log);

        corpus::EmitOptions eo;
        eo.out_dir = run_dir_ / out_dir;
        eo.tokenizer_id = r_.tokenizer_id;
        eo.recipe_hash = r_.hash;
        eo.extra = {{"template_id", text_tmpl.template_id},
                    {"multimodal_template_id", mm_tmpl.template_id},
                    {"prompt", text_tmpl.body},
                    {"sampling", params}};
        const auto lookup = corpus::make_lookup(qs);
        corpus::emit(res.samples, eo, &lookup);
      }
      state_.traces[name] = out_dir / corpus::kManifestName;
    }
    return partial;
  }

  mixture::MixtureSpec mix_spec(const json& cfg, bool absolute) const {
    mixture::MixtureSpec spec;
    spec.traces_per_question_cap = cfg.value("cap", 4);
    spec.epochs_hint = cfg.value("epochs_hint", 1);
    spec.seed = r_.seed;
    spec.prompt_style = corpus::parse_prompt_style(cfg.value("prompt_style", std::string("CoT")));
    for (const auto& s : cfg.at("sources")) {
      mixture::MixtureSource src;
      src.name = s.at("corpus").get<std::string>();
      if (s.contains("category")) src.category = corpus::parse_category(s["category"].get<std::string>());
      if (s.contains("weight")) src.weight = s["weight"].get<double>();
      if (s.contains("max_examples")) src.max_examples = s["max_examples"].get<std::size_t>();
      src.template_id = s.value("template_id", std::string());
      const auto rep = state_.decontam_report.find(src.name);
      if (rep != state_.decontam_report.end()) src.decontam_report = absolute ? run_dir_ / rep->second : rep->second;
      spec.sources.push_back(std::move(src));
    }
    return spec;
  }

  bool mix(const json& cfg, const fs::path& rel, bool execute) {
    state_.assembly_dir = rel;
    if (!execute) return false;
    const auto spec = mix_spec(cfg, true);
    std::map<std::string, distill::AcceptedSet> sets;
    for (const auto& src : spec.sources) {
      auto qs = load(src.name);
      const auto it = state_.traces.find(src.name);
      if (it == state_.traces.end()) throw ConfigError("corpus '" + src.name + "' has no traces");
      const auto samples = corpus::read_traces(run_dir_ / it->second);
      sets[src.name] = distill::build_accepted_set(samples, qs);
    }
    auto assembly = mixture::assemble(spec, sets, r_.tokenizer_id, workers_);
    mixture::write_assembly(run_dir_ / rel, assembly);
    json spec_rel = mix_spec(cfg, false);
    util::write_file(run_dir_ / rel / "mixture.json", spec_rel.dump(2) + "\n");
    return false;
  }

  bool export_stage(const json& cfg, const fs::path& rel, bool execute) {
    if (!execute) return false;
    if (state_.assembly_dir.empty()) throw ConfigError("export: no mix stage output");
    auto assembly = mixture::read_assembly(run_dir_ / state_.assembly_dir);
    const auto spec = util::read_json(run_dir_ / state_.assembly_dir / "mixture.json").get<mixture::MixtureSpec>();
    json provenance = json::object();
    for (const auto& s : r_.stages)
      if (s.type == "filter" && fs::exists(run_dir_ / "stages" / s.dir_name() / "filter.json"))
        provenance["filter"] = util::read_json(run_dir_ / "stages" / s.dir_name() / "filter.json");
      else if (s.type == "distill")
        provenance["distill"] = {{"template", s.cfg.value("template", std::string("distill-cot-think"))},
                                 {"k", s.cfg.value("k", 4)}};
    assembly.manifest.extra["provenance"] = provenance;
    mixture::ExportOptions eo;
    eo.out_dir = run_dir_ / rel / "dataset";
    eo.format = mixture::parse_export_format(cfg.value("format", std::string("ChatMessages")));
    eo.shard_size = cfg.value("shard_size", std::size_t{1000});
    eo.recipe_hash = r_.hash;
    mixture::export_sft(assembly, spec, eo);
    return false;
  }

  bool eval(const json& cfg, const fs::path& rel, bool execute) {
    if (!execute) return false;
    auto& model = client(cfg.at("endpoint").get<std::string>());
    std::vector<evalharness::EvalReport> reports;
    bool partial = false;
    for (const auto& name : string_list(cfg, "benchmarks")) {
      evalharness::EvalRun run;
      run.benchmark_id = name;
      run.model_id = cfg.value("model_id", model.model_id());
      run.template_id = cfg.value("template", run.template_id);
      run.params = cfg.contains("params") ? cfg["params"].get<modelclient::SamplingParams>() : run.params;
      run.seeds = cfg.value("seeds", run.seeds);
      run.exit_reserve = cfg.value("exit_reserve", run.exit_reserve);
      run.vote_samples = cfg.value("vote_samples", run.vote_samples);
      run.vote_seed = cfg.value("vote_seed", run.vote_seed);
      evalharness::EvalOptions eo;
      eo.checkpoint = run_dir_ / rel / (name + ".ckpt.jsonl");
      eo.workers = workers_;
      eo.bootstrap_seed = r_.seed;
      eo.tokenizer_id = r_.tokenizer_id;
      const auto qs = resolved(load(name));
      auto rep = evalharness::run_eval(run, model, qs, eo);
      partial = partial || rep.incomplete;
      json j = evalharness::to_json(rep);
      j["recipe_hash"] = r_.hash;
      util::write_file(run_dir_ / rel / (name + ".report.json"), j.dump(2) + "\n");
      reports.push_back(std::move(rep));
    }
    evalharness::write_results_csv(run_dir_ / rel / "results.csv", reports);
    std::string tokens = "benchmark,avg_response_tokens\n";
    char buf[64];
    for (const auto& [b, avg] : evalharness::token_report(reports)) {
      std::snprintf(buf, sizeof buf, "%.4f", avg);
      tokens += b + "," + buf + "\n";
    }
    util::write_file(run_dir_ / rel / "tokens.csv", tokens);
    return partial;
  }

  const Recipe& r_;
  const RunOptions& o_;
  fs::path run_dir_;
  std::size_t workers_ = 1;
  State state_;
  std::map<std::string, std::shared_ptr<modelclient::ModelClient>> clients_;
};

}  // namespace

RunResult run(const Recipe& recipe, const RunOptions& opts) {
  RunResult res;
  res.recipe_hash = recipe.hash;
  for (const auto& s : opts.stages)
    if (std::find(kStageTypes.begin(), kStageTypes.end(), s) == kStageTypes.end()) {
      res.exit_code = kValidation;
      res.message = "unknown stage selector '" + s + "'";
      return res;
    }
  if (opts.run_dir.empty()) {
    res.exit_code = kValidation;
    res.message = "no run directory";
    return res;
  }
  try {
    return Runner(recipe, opts).run();
  } catch (const std::exception& e) {
    res.exit_code = kRuntime;
    res.message = e.what();
  }
  return res;
}

RunResult run(const fs::path& recipe_path, const RunOptions& opts) {
  try {
    return run(load_recipe(recipe_path, opts.seed), opts);
  } catch (const RecipeError& e) {
    return {kValidation, {}, {}, e.what()};
  } catch (const std::exception& e) {
    return {kRuntime, {}, {}, e.what()};
  }
}

}  // namespace tracemill::cli
