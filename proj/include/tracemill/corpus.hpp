#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace tracemill::corpus {

using json = nlohmann::json;

enum class Category { TextOnly, MultimodalReasoning, MultimodalClassification };
enum class PromptStyle { CoT, Direct };

std::string_view to_string(Category c);
std::string_view to_string(PromptStyle s);
Category parse_category(std::string_view s);
PromptStyle parse_prompt_style(std::string_view s);

struct ImageRef {
  std::string path_or_uri;
  int width = 0;
  int height = 0;
  std::string digest;  // sha256 hex of the raw file bytes

  bool operator==(const ImageRef&) const = default;
};

struct Option {
  std::string letter;
  std::string text;

  bool operator==(const Option&) const = default;
};

struct Question {
  std::string id;
  std::string source;
  Category category = Category::TextOnly;
  std::string text;
  std::vector<ImageRef> images;
  std::vector<Option> options;  // empty for open-ended
  std::string gold_answer;      // option letter, or free text when options is empty
  std::map<std::string, std::string> metadata;

  bool is_multiple_choice() const { return !options.empty(); }
  const Option* find_option(std::string_view letter) const;
  bool operator==(const Question&) const = default;
};

struct TraceSample {
  std::string question_id;
  std::string model_id;
  PromptStyle prompt_style = PromptStyle::CoT;
  std::string raw_text;
  std::optional<std::string> reasoning;
  std::optional<std::string> extracted_answer;
  std::int64_t response_tokens = 0;
  bool accepted = false;
  std::int64_t seed = 0;

  bool operator==(const TraceSample&) const = default;
};

struct DatasetManifest {
  std::string recipe_hash;
  std::int64_t num_questions = 0;
  std::int64_t num_examples = 0;
  std::int64_t total_response_tokens = 0;
  std::map<std::string, std::int64_t> per_category_counts;
  std::map<std::string, std::int64_t> per_modality_counts;
  std::vector<std::string> shard_paths;  // relative to the manifest's directory
  std::string tokenizer_id = "ws";
  json extra = json::object();  // stage-specific provenance (sampling params, prompt text, ...)
};

// JSON mapping; field names match the interchange schema exactly.
void to_json(json& j, const ImageRef& v);
void from_json(const json& j, ImageRef& v);
void to_json(json& j, const Question& v);
void from_json(const json& j, Question& v);
void to_json(json& j, const TraceSample& v);
void from_json(const json& j, TraceSample& v);
void to_json(json& j, const DatasetManifest& v);
void from_json(const json& j, DatasetManifest& v);

/// Throws ValidationError if any per-record invariant fails.
void validate(const Question& q);
void validate(const TraceSample& t);

// ---------------------------------------------------------------- ingest

enum class OnError { Abort, Skip };

struct IngestError {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  std::vector<Question> questions;
  std::vector<IngestError> errors;
};

/// Source schemas understood by ingest():
///   "native" - Question records as emitted by this library.
///   "mcq"    - {"question", "options": {"A": ...} | [...], "answer": letter | index,
///               "images"?, "source"?, "id"?, "category"?, "metadata"?}
std::vector<std::string> known_schemas();

/// Reads a JSONL file. Missing ids become `source#index` with index the 0-based
/// record ordinal. Duplicate ids are record-level errors.
IngestResult ingest(const std::filesystem::path& path, std::string_view schema = "native",
                    OnError on_error = OnError::Abort);

void write_questions(const std::filesystem::path& path, std::span<const Question> qs);
std::vector<TraceSample> read_traces(const std::filesystem::path& path);

// ------------------------------------------------------------------ emit

inline constexpr const char* kManifestName = "manifest.json";

/// `shard-%05d.jsonl`
std::string shard_name(std::size_t index);

/// Splits rows into consecutive shards of at most shard_size lines. Returns
/// shard file names relative to out_dir. Existing shard-*.jsonl files in
/// out_dir are removed first so a shrinking re-emit leaves no stale shards.
std::vector<std::string> write_shards(const std::filesystem::path& out_dir,
                                      std::span<const json> rows, std::size_t shard_size);

using QuestionLookup = std::unordered_map<std::string, const Question*>;
QuestionLookup make_lookup(std::span<const Question> qs);

struct EmitOptions {
  std::filesystem::path out_dir;
  std::size_t shard_size = 1000;
  std::string tokenizer_id = "ws";
  std::string recipe_hash;  // empty: digest of the shard bytes
  json extra = json::object();
};

struct EmitResult {
  std::vector<std::filesystem::path> shards;
  DatasetManifest manifest;
};

/// Writes trace shards plus manifest.json. With a lookup, per-category and
/// per-modality counts are filled from the owning questions.
EmitResult emit(std::span<const TraceSample> records, const EmitOptions& opts,
                const QuestionLookup* questions = nullptr);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// Records of every shard listed in a manifest, in shard order.
std::vector<json> read_shard_rows(const std::filesystem::path& manifest_path);

// ---------------------------------------------------------------- tokens

using Tokenizer = std::function<std::int64_t(std::string_view)>;

/// Built-ins: "ws" (whitespace-delimited) and "utf8-chars" (code points).
std::int64_t count_tokens(std::string_view text, std::string_view tokenizer_id = "ws");
void register_tokenizer(std::string id, Tokenizer fn);
bool has_tokenizer(std::string_view id);

}  // namespace tracemill::corpus
