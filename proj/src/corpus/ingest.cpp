#include <iostream>
#include <unordered_set>

#include "tracemill/corpus.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/text.hpp"

namespace tracemill::corpus {

namespace fs = std::filesystem;

std::vector<std::string> known_schemas() { return {"native", "mcq"}; }

namespace {

std::string letter_for_index(std::size_t i) {
  if (i >= 26) throw ValidationError("more than 26 options");
  return std::string(1, static_cast<char>('A' + i));
}

Question parse_mcq(const json& j, const std::string& default_source) {
  Question q;
  q.id = j.value("id", std::string{});
  q.source = j.value("source", default_source);
  q.text = j.at("question").get<std::string>();
  const json& opts = j.at("options");
  if (opts.is_object()) {
    for (auto it = opts.begin(); it != opts.end(); ++it)
      q.options.push_back({it.key(), it.value().get<std::string>()});
  } else {
    for (std::size_t i = 0; i < opts.size(); ++i) q.options.push_back({letter_for_index(i), opts[i].get<std::string>()});
  }
  const json& ans = j.at("answer");
  q.gold_answer = ans.is_number_integer() ? letter_for_index(ans.get<std::size_t>()) : ans.get<std::string>();
  q.images = j.value("images", std::vector<ImageRef>{});
  q.metadata = j.value("metadata", std::map<std::string, std::string>{});
  if (auto it = j.find("category"); it != j.end())
    q.category = parse_category(it->get<std::string>());
  else
    q.category = q.images.empty() ? Category::TextOnly : Category::MultimodalReasoning;
  return q;
}

void fill_digests(Question& q, const fs::path& base_dir) {
  for (auto& img : q.images) {
    if (!img.digest.empty()) continue;
    fs::path p = img.path_or_uri;
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) throw ValidationError("image " + img.path_or_uri + " has no digest and is not readable");
    img.digest = util::sha256_file(p);
  }
}

}  // namespace

IngestResult ingest(const fs::path& path, std::string_view schema, OnError on_error) {
  if (schema != "native" && schema != "mcq") throw ConfigError("unknown source schema '" + std::string(schema) + "'");
  IngestResult result;
  std::unordered_set<std::string> ids;
  const std::string default_source = path.stem().string();
  const fs::path base_dir = path.parent_path();
  std::size_t ordinal = 0;

  util::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const std::size_t index = ordinal++;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
      }
      Question q;
      try {
        q = schema == "native" ? j.get<Question>() : parse_mcq(j, default_source);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("schema mismatch: ") + e.what());
      }
      if (q.id.empty()) q.id = q.source + "#" + std::to_string(index);
      fill_digests(q, base_dir);
      validate(q);
      if (!ids.insert(q.id).second) throw ValidationError("duplicate id " + q.id);
      result.questions.push_back(std::move(q));
    } catch (const ValidationError& e) {
      if (on_error == OnError::Abort) throw ValidationError(path.string() + ": " + e.what(), line_no);
      result.errors.push_back({line_no, e.what()});
      std::cerr << "ingest: skipping " << path.string() << ":" << line_no << ": " << e.what() << "\n";
    }
  });
  return result;
}

void write_questions(const fs::path& path, std::span<const Question> qs) {
  std::vector<json> rows;
  rows.reserve(qs.size());
  for (const auto& q : qs) rows.emplace_back(q);
  util::write_jsonl(path, rows);
}

std::vector<TraceSample> read_traces(const fs::path& path) {
  std::vector<json> rows;
  if (fs::is_directory(path))
    rows = read_shard_rows(path / kManifestName);
  else if (path.filename() == kManifestName)
    rows = read_shard_rows(path);
  else
    rows = util::read_jsonl(path);
  std::vector<TraceSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    TraceSample t = r.get<TraceSample>();
    validate(t);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tracemill::corpus
