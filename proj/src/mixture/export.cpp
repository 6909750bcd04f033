#include "tracemill/mixture.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::mixture {

using nlohmann::json;

std::string_view to_string(ExportFormat f) {
  return f == ExportFormat::ChatMessages ? "ChatMessages" : "PromptCompletion";
}

ExportFormat parse_export_format(std::string_view s) {
  if (s == "ChatMessages") return ExportFormat::ChatMessages;
  if (s == "PromptCompletion") return ExportFormat::PromptCompletion;
  throw ConfigError("unknown export format '" + std::string(s) + "'");
}

void to_json(json& j, const TrainingExample& e) {
  j = {{"question_id", e.question_id}, {"source", e.source},        {"category", corpus::to_string(e.category)},
       {"prompt", e.prompt},           {"images", e.images},        {"target", e.target},
       {"target_tokens", e.target_tokens}, {"trace_seed", e.trace_seed}, {"modality", e.modality}};
}

void from_json(const json& j, TrainingExample& e) {
  e.question_id = j.at("question_id").get<std::string>();
  e.source = j.at("source").get<std::string>();
  e.category = corpus::parse_category(j.at("category").get<std::string>());
  e.prompt = j.at("prompt").get<std::string>();
  e.images = j.at("images").get<std::vector<corpus::ImageRef>>();
  e.target = j.at("target").get<std::string>();
  e.target_tokens = j.at("target_tokens").get<std::int64_t>();
  e.trace_seed = j.at("trace_seed").get<std::int64_t>();
  e.modality = j.value("modality", std::string("unknown"));
}

void write_assembly(const std::filesystem::path& dir, const Assembly& a) {
  std::vector<json> rows(a.examples.begin(), a.examples.end());
  util::write_jsonl(dir / "examples.jsonl", rows);
  json m = a.manifest;
  util::write_file(dir / "assembly.json", m.dump(2) + "\n");
}

Assembly read_assembly(const std::filesystem::path& dir) {
  Assembly a;
  for (const auto& row : util::read_jsonl(dir / "examples.jsonl")) a.examples.push_back(row.get<TrainingExample>());
  a.manifest = util::read_json(dir / "assembly.json").get<corpus::DatasetManifest>();
  return a;
}

json export_record(const TrainingExample& ex, ExportFormat fmt) {
  if (fmt == ExportFormat::PromptCompletion) return {{"prompt", ex.prompt}, {"completion", ex.target}};
  json user = json::array();
  for (const auto& img : ex.images) user.push_back({{"type", "image"}, {"image", img.path_or_uri}});
  user.push_back({{"type", "text"}, {"text", ex.prompt}});
  return {{"id", ex.question_id + "@" + std::to_string(ex.trace_seed)},
          {"messages", json::array({{{"role", "user"}, {"content", user}},
                                    {{"role", "assistant"}, {"content", ex.target}}})}};
}

std::string mixture_hash(const MixtureSpec& spec, ExportFormat fmt, const json& input_digests) {
  json doc = {{"spec", spec}, {"format", to_string(fmt)}, {"inputs", input_digests}};
  return util::sha256_hex(util::canonical(doc));
}

corpus::EmitResult export_sft(const Assembly& assembly, const MixtureSpec& spec, const ExportOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("export: no output directory");
  std::vector<json> rows;
  rows.reserve(assembly.examples.size());
  for (const auto& ex : assembly.examples) rows.push_back(export_record(ex, opts.format));

  corpus::EmitResult out;
  out.manifest = assembly.manifest;
  out.manifest.extra["format"] = to_string(opts.format);
  out.manifest.extra["mixture"] = spec;
  out.manifest.shard_paths = corpus::write_shards(opts.out_dir, rows, opts.shard_size);
  out.manifest.recipe_hash = opts.recipe_hash.empty()
                                 ? mixture_hash(spec, opts.format, assembly.manifest.extra.value("input_digests", json::object()))
                                 : opts.recipe_hash;
  corpus::write_manifest(opts.out_dir / corpus::kManifestName, out.manifest);
  for (const auto& name : out.manifest.shard_paths) out.shards.push_back(opts.out_dir / name);
  return out;
}

}  // namespace tracemill::mixture
