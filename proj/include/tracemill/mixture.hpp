#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracemill/corpus.hpp"
#include "tracemill/distill.hpp"

namespace tracemill::mixture {

using corpus::Category;
using corpus::PromptStyle;
using distill::AcceptedSet;

struct MixtureSource {
  std::string name;  // key into the sets passed to assemble(); usually the corpus path
  std::optional<Category> category;         // absent: each question keeps its own
  std::optional<double> weight;             // fraction of the capped source to retain, in [0, 1]
  std::optional<std::size_t> max_examples;  // applied after weight
  std::filesystem::path decontam_report;    // required
  std::string template_id;                  // empty: eval-boxed for CoT, eval-letter-direct for Direct
};

struct MixtureSpec {
  std::vector<MixtureSource> sources;
  int traces_per_question_cap = 4;
  int epochs_hint = 1;
  std::uint64_t seed = 0;
  PromptStyle prompt_style = PromptStyle::CoT;

  void validate() const;
};

void to_json(nlohmann::json& j, const MixtureSource& s);
void from_json(const nlohmann::json& j, MixtureSource& s);
void to_json(nlohmann::json& j, const MixtureSpec& s);
void from_json(const nlohmann::json& j, MixtureSpec& s);

/// Keeps min(available, cap) traces per question, drawn uniformly without
/// replacement from a per-question stream seeded by (seed, question id).
/// Surviving entries keep their relative order.
AcceptedSet cap_traces(const AcceptedSet& set, int cap, std::uint64_t seed, std::size_t workers = 1);

struct TrainingExample {
  std::string question_id;
  std::string source;
  Category category = Category::TextOnly;
  std::string prompt;
  std::vector<corpus::ImageRef> images;
  std::string target;
  std::int64_t target_tokens = 0;
  std::int64_t trace_seed = 0;
  std::string modality;  // metadata "modality" or "unknown"
};

/// "<think>\n{reasoning}\n</think>\n\n\boxed{L: option text}" for CoT, the bare answer for Direct.
std::string make_target(const distill::AcceptedEntry& e, PromptStyle style);

struct Assembly {
  std::vector<TrainingExample> examples;
  corpus::DatasetManifest manifest;  // no shards yet; extra carries per-source counts and input digests
};

void to_json(nlohmann::json& j, const TrainingExample& e);
void from_json(const nlohmann::json& j, TrainingExample& e);
/// examples.jsonl plus assembly.json (manifest statistics) under dir.
void write_assembly(const std::filesystem::path& dir, const Assembly& a);
Assembly read_assembly(const std::filesystem::path& dir);

/// Caps, subsamples by weight/max_examples, renders and shuffles. Each source
/// must reference a decontamination report none of whose flagged ids occur in
/// its set. Throws ConfigError for an empty mixture or a missing source.
Assembly assemble(const MixtureSpec& spec, const std::map<std::string, AcceptedSet>& sets,
                  std::string_view tokenizer_id = "ws", std::size_t workers = 1);

/// Digest of a set's accepted traces (canonical JSON lines).
std::string set_digest(const AcceptedSet& set);

enum class ExportFormat { ChatMessages, PromptCompletion };
std::string_view to_string(ExportFormat f);
ExportFormat parse_export_format(std::string_view s);

nlohmann::json export_record(const TrainingExample& ex, ExportFormat fmt);

struct ExportOptions {
  std::filesystem::path out_dir;
  ExportFormat format = ExportFormat::ChatMessages;
  std::size_t shard_size = 1000;
  std::string recipe_hash;  // empty: digest of spec, format and input digests
};

/// PromptCompletion records are exactly {"prompt", "completion"} and carry no images.
corpus::EmitResult export_sft(const Assembly& assembly, const MixtureSpec& spec, const ExportOptions& opts);

/// Hash used when ExportOptions::recipe_hash is empty.
std::string mixture_hash(const MixtureSpec& spec, ExportFormat fmt, const nlohmann::json& input_digests);

}  // namespace tracemill::mixture
