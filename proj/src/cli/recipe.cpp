#include <algorithm>
#include <set>

#include "tracemill/cli.hpp"
#include "tracemill/qfilter.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::cli {

namespace {

std::string join_diags(const std::vector<Diagnostic>& d) {
  std::string s = "invalid recipe:";
  for (const auto& x : d) s += "\n  " + x.path + ": " + x.message;
  return s;
}

const std::map<std::string, std::set<std::string>> kStageFields = {
    {"ingest", {"stage", "inputs", "on_error"}},
    {"decontaminate", {"stage", "corpora", "benchmarks", "n", "text_only_benchmarks"}},
    {"preprocess", {"stage", "corpora", "resize", "balance", "annotate"}},
    {"filter", {"stage", "corpora", "strategy", "endpoint", "n", "lo", "hi", "template", "keep_lo", "keep_hi", "params"}},
    {"distill", {"stage", "corpora", "teacher", "multimodal_teacher", "template", "multimodal_template", "k", "params"}},
    {"mix", {"stage", "sources", "cap", "epochs_hint", "prompt_style"}},
    {"export", {"stage", "format", "shard_size"}},
    {"eval", {"stage", "benchmarks", "endpoint", "template", "seeds", "params", "vote_samples", "vote_seed",
              "exit_reserve", "model_id"}},
};

// Hard order constraints: (later, earlier, required).
struct Dependency {
  const char* stage;
  const char* after;
  bool required;
};
constexpr Dependency kDependencies[] = {
    {"decontaminate", "ingest", true}, {"preprocess", "ingest", true},     {"filter", "ingest", true},
    {"distill", "decontaminate", true}, {"distill", "preprocess", false}, {"distill", "filter", false},
    {"mix", "distill", true},           {"export", "mix", true},          {"eval", "ingest", true},
};

std::string join(const std::string& path, const char* key) { return path.empty() ? std::string(key) : path + "." + key; }

class Checker {
 public:
  std::vector<Diagnostic> diags;

  void error(std::string path, std::string msg) { diags.push_back({std::move(path), std::move(msg)}); }

  const json* field(const json& obj, const std::string& path, const char* key, bool required) {
    if (!obj.contains(key)) {
      if (required) error(join(path, key), "required field is missing");
      return nullptr;
    }
    return &obj[key];
  }

  void string_field(const json& obj, const std::string& path, const char* key, bool required) {
    if (const json* v = field(obj, path, key, required); v && !v->is_string())
      error(join(path, key), "must be a string");
  }

  void int_field(const json& obj, const std::string& path, const char* key, long long lo, long long hi) {
    const json* v = field(obj, path, key, false);
    if (!v) return;
    if (!v->is_number_integer()) return error(join(path, key), "must be an integer");
    const auto x = v->get<long long>();
    if (x < lo || x > hi)
      error(join(path, key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  void bool_field(const json& obj, const std::string& path, const char* key) {
    if (const json* v = field(obj, path, key, false); v && !v->is_boolean()) error(join(path, key), "must be a boolean");
  }

  void names(const json& obj, const std::string& path, const char* key, const std::set<std::string>& known,
             const char* what) {
    const json* v = field(obj, path, key, true);
    if (!v) return;
    if (!v->is_array() || v->empty()) return error(join(path, key), "must be a non-empty list");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = join(path, key) + "[" + std::to_string(i) + "]";
      if (!(*v)[i].is_string()) error(p, "must be a string");
      else if (!known.count((*v)[i].get<std::string>()))
        error(p, std::string("unknown ") + what + " '" + (*v)[i].get<std::string>() + "'");
    }
  }

  void endpoint(const json& obj, const std::string& path, const char* key, const json& endpoints, bool required) {
    const json* v = field(obj, path, key, required);
    if (!v) return;
    if (!v->is_string()) return error(join(path, key), "must be a string");
    if (!endpoints.is_object() || !endpoints.contains(v->get<std::string>()))
      error(join(path, key), "unknown endpoint '" + v->get<std::string>() + "'");
  }

  void template_id(const json& obj, const std::string& path, const char* key) {
    const json* v = field(obj, path, key, false);
    if (!v) return;
    if (!v->is_string()) return error(join(path, key), "must be a string");
    if (!modelclient::TemplateRegistry::builtins().contains(v->get<std::string>()))
      error(join(path, key), "unknown template '" + v->get<std::string>() + "'");
  }

  void params(const json& obj, const std::string& path) {
    const json* v = field(obj, path, "params", false);
    if (!v) return;
    try {
      auto p = v->get<modelclient::SamplingParams>();
      p.n_samples = 1;
      p.validate();
    } catch (const std::exception& e) {
      error(path + ".params", e.what());
    }
  }
};

void check_endpoints(Checker& c, const json& doc) {
  if (!doc.contains("endpoints")) return;
  const json& eps = doc["endpoints"];
  if (!eps.is_object()) return c.error("endpoints", "must be an object");
  for (const auto& [role, cfg] : eps.items()) {
    const std::string p = "endpoints." + role;
    if (!cfg.is_object()) {
      c.error(p, "must be an object");
      continue;
    }
    const std::string kind = cfg.value("kind", std::string());
    if (kind == "mock") {
      if (!cfg.contains("script") && !cfg.contains("script_path")) c.error(p, "mock endpoint needs script or script_path");
    } else if (kind == "http") {
      c.string_field(cfg, p, "endpoint", true);
      c.string_field(cfg, p, "model_id", true);
    } else {
      c.error(p + ".kind", "must be \"mock\" or \"http\"");
    }
    if (cfg.contains("api_key")) {
      const auto& k = cfg["api_key"];
      const std::string s = k.is_string() ? k.get<std::string>() : "";
      if (!(s.size() > 3 && s.rfind("${", 0) == 0 && s.back() == '}'))
        c.error(p + ".api_key", "must be an environment reference \"${VAR}\"; literal keys are not accepted");
    }
  }
}

void check_stage(Checker& c, const json& st, const std::string& p, const std::string& type, const json& endpoints,
                 std::set<std::string>& corpora, std::set<std::string>& decontaminated,
                 std::set<std::string>& distilled) {
  for (const auto& [k, v] : st.items())
    if (!kStageFields.at(type).count(k)) c.error(p + "." + k, "unknown field for stage '" + type + "'");

  if (type == "ingest") {
    const json* inputs = c.field(st, p, "inputs", true);
    if (inputs && (!inputs->is_array() || inputs->empty())) c.error(p + ".inputs", "must be a non-empty list");
    else if (inputs)
      for (std::size_t i = 0; i < inputs->size(); ++i) {
        const std::string ip = p + ".inputs[" + std::to_string(i) + "]";
        const json& in = (*inputs)[i];
        if (!in.is_object()) {
          c.error(ip, "must be an object");
          continue;
        }
        c.string_field(in, ip, "name", true);
        c.string_field(in, ip, "path", true);
        c.string_field(in, ip, "schema", false);
        if (in.contains("schema") && in["schema"].is_string()) {
          auto known = corpus::known_schemas();
          if (std::find(known.begin(), known.end(), in["schema"].get<std::string>()) == known.end())
            c.error(ip + ".schema", "unknown schema '" + in["schema"].get<std::string>() + "'");
        }
        if (in.contains("name") && in["name"].is_string() && !corpora.insert(in["name"].get<std::string>()).second)
          c.error(ip + ".name", "duplicate corpus name '" + in["name"].get<std::string>() + "'");
      }
    if (st.contains("on_error") && st["on_error"] != "abort" && st["on_error"] != "skip")
      c.error(p + ".on_error", "must be \"abort\" or \"skip\"");
  } else if (type == "decontaminate") {
    c.names(st, p, "corpora", corpora, "corpus");
    c.names(st, p, "benchmarks", corpora, "corpus");
    c.int_field(st, p, "n", 1, 1 << 20);
    c.bool_field(st, p, "text_only_benchmarks");
    if (st.contains("corpora") && st["corpora"].is_array())
      for (const auto& n : st["corpora"])
        if (n.is_string()) decontaminated.insert(n.get<std::string>());
  } else if (type == "preprocess") {
    c.names(st, p, "corpora", corpora, "corpus");
    if (st.contains("resize") && !st["resize"].is_boolean() && !st["resize"].is_object())
      c.error(p + ".resize", "must be a boolean or an object");
    if (st.contains("annotate")) {
      if (!st["annotate"].is_object()) c.error(p + ".annotate", "must be an object");
      else c.endpoint(st["annotate"], p + ".annotate", "endpoint", endpoints, true);
    }
    if (st.contains("balance") && !st["balance"].is_object()) c.error(p + ".balance", "must be an object");
  } else if (type == "filter") {
    c.names(st, p, "corpora", corpora, "corpus");
    const std::string strategy = st.value("strategy", std::string("None"));
    try {
      if (qfilter::parse_strategy(strategy) != qfilter::Strategy::None) c.endpoint(st, p, "endpoint", endpoints, true);
    } catch (const ConfigError& e) {
      c.error(p + ".strategy", e.what());
    }
    c.int_field(st, p, "n", 1, 1 << 16);
    const long long n = st.value("n", 16LL);
    c.int_field(st, p, "lo", 0, n);
    c.int_field(st, p, "hi", st.value("lo", 2LL), n);
    c.int_field(st, p, "keep_lo", 1, 10);
    c.int_field(st, p, "keep_hi", st.value("keep_lo", 3LL), 10);
    c.template_id(st, p, "template");
    c.params(st, p);
  } else if (type == "distill") {
    c.names(st, p, "corpora", corpora, "corpus");
    if (st.contains("corpora") && st["corpora"].is_array())
      for (std::size_t i = 0; i < st["corpora"].size(); ++i) {
        const auto& n = st["corpora"][i];
        if (!n.is_string()) continue;
        if (!decontaminated.count(n.get<std::string>()))
          c.error(p + ".corpora[" + std::to_string(i) + "]",
                  "corpus '" + n.get<std::string>() + "' is not listed in the decontaminate stage");
        distilled.insert(n.get<std::string>());
      }
    c.endpoint(st, p, "teacher", endpoints, true);
    c.endpoint(st, p, "multimodal_teacher", endpoints, false);
    c.template_id(st, p, "template");
    c.template_id(st, p, "multimodal_template");
    c.int_field(st, p, "k", 1, 1 << 16);
    c.params(st, p);
  } else if (type == "mix") {
    const json* src = c.field(st, p, "sources", true);
    if (src && (!src->is_array() || src->empty())) c.error(p + ".sources", "must be a non-empty list");
    else if (src)
      for (std::size_t i = 0; i < src->size(); ++i) {
        const std::string sp = p + ".sources[" + std::to_string(i) + "]";
        const json& s = (*src)[i];
        if (!s.is_object()) {
          c.error(sp, "must be an object");
          continue;
        }
        c.string_field(s, sp, "corpus", true);
        if (s.contains("corpus") && s["corpus"].is_string() && !distilled.count(s["corpus"].get<std::string>()))
          c.error(sp + ".corpus", "corpus '" + s["corpus"].get<std::string>() + "' is not distilled");
        if (s.contains("weight") && !(s["weight"].is_number() && s["weight"].get<double>() >= 0.0 &&
                                      s["weight"].get<double>() <= 1.0))
          c.error(sp + ".weight", "must be a number in [0, 1]");
        c.int_field(s, sp, "max_examples", 0, 1LL << 40);
        c.template_id(s, sp, "template_id");
        if (s.contains("category")) try {
            corpus::parse_category(s["category"].get<std::string>());
          } catch (const std::exception& e) {
            c.error(sp + ".category", e.what());
          }
      }
    c.int_field(st, p, "cap", 1, 1 << 20);
    c.int_field(st, p, "epochs_hint", 1, 1 << 10);
    if (st.contains("prompt_style") && st["prompt_style"] != "CoT" && st["prompt_style"] != "Direct")
      c.error(p + ".prompt_style", "must be \"CoT\" or \"Direct\"");
  } else if (type == "export") {
    if (st.contains("format") && st["format"] != "ChatMessages" && st["format"] != "PromptCompletion")
      c.error(p + ".format", "must be \"ChatMessages\" or \"PromptCompletion\"");
    c.int_field(st, p, "shard_size", 1, 1LL << 40);
  } else if (type == "eval") {
    c.names(st, p, "benchmarks", corpora, "corpus");
    c.endpoint(st, p, "endpoint", endpoints, true);
    c.template_id(st, p, "template");
    c.params(st, p);
    c.int_field(st, p, "vote_samples", 0, 1 << 16);
    c.int_field(st, p, "exit_reserve", 0, 1 << 20);
    if (st.contains("seeds")) {
      const auto& s = st["seeds"];
      if (!s.is_array() || s.empty()) c.error(p + ".seeds", "must be a non-empty list");
      else {
        std::set<long long> seen;
        for (std::size_t i = 0; i < s.size(); ++i)
          if (!s[i].is_number_integer()) c.error(p + ".seeds[" + std::to_string(i) + "]", "must be an integer");
          else if (!seen.insert(s[i].get<long long>()).second)
            c.error(p + ".seeds[" + std::to_string(i) + "]", "duplicate seed");
      }
    }
  }
}

}  // namespace

RecipeError::RecipeError(std::vector<Diagnostic> diags) : ValidationError(join_diags(diags)), diags_(std::move(diags)) {}

std::string StageConfig::dir_name() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02zu-", index);
  return buf + type;
}

const StageConfig* Recipe::find(std::string_view type) const {
  for (const auto& s : stages)
    if (s.type == type) return &s;
  return nullptr;
}

std::vector<Diagnostic> validate_recipe(const json& doc) {
  Checker c;
  if (!doc.is_object()) {
    c.error("$", "recipe must be a JSON object");
    return c.diags;
  }
  for (const auto& [k, v] : doc.items())
    if (k != "version" && k != "seed" && k != "tokenizer_id" && k != "endpoints" && k != "stages" && k != "workers")
      c.error(k, "unknown top-level field");
  c.string_field(doc, "", "version", true);
  if (doc.contains("version") && doc["version"].is_string() && doc["version"] != "1")
    c.error("version", "unsupported recipe version");
  if (doc.contains("seed") && !doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0))
    c.error("seed", "must be a non-negative integer");
  if (doc.contains("workers") && !(doc["workers"].is_number_integer() && doc["workers"].get<long long>() >= 1))
    c.error("workers", "must be a positive integer");
  if (doc.contains("tokenizer_id") &&
      (!doc["tokenizer_id"].is_string() || !corpus::has_tokenizer(doc["tokenizer_id"].get<std::string>())))
    c.error("tokenizer_id", "unknown tokenizer");
  check_endpoints(c, doc);

  const json endpoints = doc.value("endpoints", json::object());
  const json* stages = c.field(doc, "", "stages", true);
  if (!stages) return c.diags;
  if (!stages->is_array() || stages->empty()) {
    c.error("stages", "must be a non-empty list");
    return c.diags;
  }

  std::map<std::string, std::size_t> position;
  std::set<std::string> corpora, decontaminated, distilled;
  for (std::size_t i = 0; i < stages->size(); ++i) {
    const std::string p = "stages[" + std::to_string(i) + "]";
    const json& st = (*stages)[i];
    if (!st.is_object() || !st.contains("stage") || !st["stage"].is_string()) {
      c.error(p + ".stage", "required field is missing");
      continue;
    }
    const std::string type = st["stage"].get<std::string>();
    if (!kStageFields.count(type)) {
      c.error(p + ".stage", "unknown stage '" + type + "'");
      continue;
    }
    if (!position.emplace(type, i).second) {
      c.error(p + ".stage", "duplicate stage '" + type + "'");
      continue;
    }
    check_stage(c, st, p, type, endpoints, corpora, decontaminated, distilled);
  }

  for (const auto& d : kDependencies) {
    auto later = position.find(d.stage);
    if (later == position.end()) continue;
    auto earlier = position.find(d.after);
    const std::string p = "stages[" + std::to_string(later->second) + "]";
    if (earlier == position.end()) {
      if (d.required) c.error(p, std::string("stage '") + d.stage + "' requires a preceding '" + d.after + "' stage");
    } else if (earlier->second > later->second) {
      c.error(p, std::string("stage '") + d.stage + "' must come after stage '" + d.after + "' (stages[" +
                     std::to_string(earlier->second) + "])");
    }
  }
  return c.diags;
}

std::string recipe_hash(const json& doc) {
  json d = doc;
  d.erase("workers");
  return util::sha256_hex(util::canonical(d));
}

Recipe parse_recipe(const json& input, const std::filesystem::path& base_dir, std::optional<std::uint64_t> seed_override) {
  if (auto diags = validate_recipe(input); !diags.empty()) throw RecipeError(std::move(diags));
  json doc = input;
  if (seed_override) doc["seed"] = *seed_override;
  if (doc.contains("endpoints"))
    for (auto& [role, cfg] : doc["endpoints"].items())
      if (cfg.contains("api_key")) {
        const std::string s = cfg["api_key"].get<std::string>();
        cfg["api_key_env"] = s.substr(2, s.size() - 3);
        cfg.erase("api_key");
      }

  Recipe r;
  r.version = doc["version"].get<std::string>();
  r.seed = doc.value("seed", std::uint64_t{0});
  r.tokenizer_id = doc.value("tokenizer_id", std::string("ws"));
  r.workers = doc.value("workers", std::size_t{1});
  const json endpoints = doc.value("endpoints", json::object());
  for (const auto& [role, cfg] : endpoints.items()) r.endpoints[role] = cfg;
  std::size_t i = 0;
  for (const auto& st : doc["stages"]) r.stages.push_back({st["stage"].get<std::string>(), st, i++});
  r.base_dir = base_dir;
  r.canonical = doc;
  r.canonical.erase("workers");
  r.hash = recipe_hash(doc);
  return r;
}

Recipe load_recipe(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  json doc;
  try {
    doc = json::parse(util::read_file(path));
  } catch (const json::parse_error& e) {
    throw RecipeError({{"$", "cannot parse " + path.string() + ": " + e.what()}});
  }
  return parse_recipe(doc, path.parent_path(), seed_override);
}

}  // namespace tracemill::cli
