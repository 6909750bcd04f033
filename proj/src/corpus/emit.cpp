#include <cstdio>
#include <set>

#include "tracemill/corpus.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::corpus {

namespace fs = std::filesystem;

std::string shard_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05zu.jsonl", index);
  return buf;
}

std::vector<std::string> write_shards(const fs::path& out_dir, std::span<const json> rows, std::size_t shard_size) {
  if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("shard-", 0) == 0 && entry.path().extension() == ".jsonl") fs::remove(entry.path());
  }
  std::vector<std::string> names;
  for (std::size_t start = 0, idx = 0; start < rows.size(); start += shard_size, ++idx) {
    const std::size_t end = std::min(rows.size(), start + shard_size);
    std::string buf;
    for (std::size_t i = start; i < end; ++i) {
      buf += rows[i].dump();
      buf += '\n';
    }
    names.push_back(shard_name(idx));
    util::write_file(out_dir / names.back(), buf);
  }
  return names;
}

QuestionLookup make_lookup(std::span<const Question> qs) {
  QuestionLookup m;
  for (const auto& q : qs) m.emplace(q.id, &q);
  return m;
}

EmitResult emit(std::span<const TraceSample> records, const EmitOptions& opts, const QuestionLookup* questions) {
  if (!has_tokenizer(opts.tokenizer_id)) throw ConfigError("unknown tokenizer '" + opts.tokenizer_id + "'");
  std::vector<json> rows;
  rows.reserve(records.size());
  DatasetManifest m;
  std::set<std::string> qids;
  for (const auto& r : records) {
    validate(r);
    rows.emplace_back(r);
    qids.insert(r.question_id);
    m.total_response_tokens += r.response_tokens;
    if (questions) {
      auto it = questions->find(r.question_id);
      if (it == questions->end()) throw ConsistencyError("trace references unknown question " + r.question_id);
      const Question& q = *it->second;
      ++m.per_category_counts[std::string(to_string(q.category))];
      auto mod = q.metadata.find("modality");
      ++m.per_modality_counts[mod == q.metadata.end() ? std::string("unknown") : mod->second];
    }
  }
  m.num_examples = static_cast<std::int64_t>(records.size());
  m.num_questions = static_cast<std::int64_t>(qids.size());
  m.tokenizer_id = opts.tokenizer_id;
  m.extra = opts.extra;

  EmitResult out;
  m.shard_paths = write_shards(opts.out_dir, rows, opts.shard_size);
  if (opts.recipe_hash.empty()) {
    std::string all;
    for (const auto& name : m.shard_paths) all += util::read_file(opts.out_dir / name);
    m.recipe_hash = util::sha256_hex(opts.tokenizer_id + "\n" + all);
  } else {
    m.recipe_hash = opts.recipe_hash;
  }
  for (const auto& name : m.shard_paths) out.shards.push_back(opts.out_dir / name);
  write_manifest(opts.out_dir / kManifestName, m);
  out.manifest = std::move(m);
  return out;
}

DatasetManifest read_manifest(const fs::path& path) {
  json j = util::read_json(path);
  try {
    return j.get<DatasetManifest>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": not a dataset manifest: " + e.what());
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  util::write_file(path, json(m).dump(2) + "\n");
}

std::vector<json> read_shard_rows(const fs::path& manifest_path) {
  DatasetManifest m = read_manifest(manifest_path);
  std::vector<json> rows;
  for (const auto& name : m.shard_paths) {
    auto part = util::read_jsonl(manifest_path.parent_path() / name);
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return rows;
}

}  // namespace tracemill::corpus
