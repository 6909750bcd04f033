#include <cstdio>
#include <ostream>

#include "tracemill/cli.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::cli {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string counts_table(const std::map<std::string, std::int64_t>& counts) {
  std::size_t w = 8;
  for (const auto& [k, v] : counts) w = std::max(w, k.size() + 2);
  std::string out;
  for (const auto& [k, v] : counts) out += "  " + pad(k, w) + std::to_string(v) + "\n";
  return out;
}

}  // namespace

std::string format_manifest(const corpus::DatasetManifest& m) {
  std::string out;
  out += "dataset manifest\n";
  out += "  recipe_hash      " + m.recipe_hash + "\n";
  out += "  tokenizer        " + m.tokenizer_id + "\n";
  out += "  questions        " + std::to_string(m.num_questions) + "\n";
  out += "  examples         " + std::to_string(m.num_examples) + "\n";
  out += "  response tokens  " + std::to_string(m.total_response_tokens);
  if (m.num_examples > 0)
    out += " (" + fmt("%.1f", static_cast<double>(m.total_response_tokens) / static_cast<double>(m.num_examples)) +
           " per example)";
  out += "\n  shards           " + std::to_string(m.shard_paths.size()) + "\n";
  if (!m.per_category_counts.empty()) out += "per category\n" + counts_table(m.per_category_counts);
  if (!m.per_modality_counts.empty()) out += "per modality\n" + counts_table(m.per_modality_counts);
  return out;
}

std::string format_eval_report(const evalharness::EvalReport& r) {
  std::string out;
  out += "eval report: " + r.benchmark_id + "\n";
  out += "  model     " + r.model_id + "\n";
  out += "  template  " + r.template_id + "\n";
  out += "  questions " + std::to_string(r.per_question.size()) + "\n";
  out += "seed      accuracy\n";
  for (std::size_t i = 0; i < r.seeds.size() && i < r.per_seed_accuracy.size(); ++i)
    out += "  " + pad(std::to_string(r.seeds[i]), 8) + fmt("%6.2f", r.per_seed_accuracy[i]) + "\n";
  out += "mean accuracy        " + fmt("%.2f", r.mean_accuracy) + "\n";
  out += "95% CI               [" + fmt("%.2f", r.ci95.first) + ", " + fmt("%.2f", r.ci95.second) + "]\n";
  out += "avg response tokens  " + fmt("%.1f", r.avg_response_tokens) + "\n";
  out += "forced exits         " + std::to_string(r.forced_exit_count) + "\n";
  if (r.vote_samples > 0 && r.vote_accuracy)
    out += "majority vote (" + std::to_string(r.vote_samples) + ")    " + fmt("%.2f", *r.vote_accuracy) + "\n";
  if (r.incomplete) out += "status               INCOMPLETE\n";
  return out;
}

int report(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  if (!std::filesystem::exists(path)) {
    err << "report: no such file: " << path.string() << "\n";
    return kRuntime;
  }
  json doc;
  try {
    doc = json::parse(util::read_file(path));
  } catch (const std::exception& e) {
    err << "report: cannot parse " << path.string() << ": " << e.what() << "\n";
    return kValidation;
  }
  try {
    if (doc.is_object() && doc.contains("per_seed_accuracy")) {
      out << format_eval_report(evalharness::report_from_json(doc));
      return kOk;
    }
    if (doc.is_object() && doc.contains("num_examples")) {
      out << format_manifest(doc.get<corpus::DatasetManifest>());
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "report: malformed " << path.string() << ": " << e.what() << "\n";
    return kValidation;
  }
  err << "report: " << path.string() << " is neither a manifest nor an eval report\n";
  return kValidation;
}

}  // namespace tracemill::cli
