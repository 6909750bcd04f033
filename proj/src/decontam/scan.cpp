#include "tracemill/decontam.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::decontam {

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::NgramOverlap: return "NgramOverlap";
    case Reason::ImageOverlap: return "ImageOverlap";
    case Reason::ShortExactMatch: return "ShortExactMatch";
    case Reason::Clean: return "Clean";
  }
  return "Clean";
}

Reason parse_reason(std::string_view s) {
  for (Reason r : {Reason::NgramOverlap, Reason::ImageOverlap, Reason::ShortExactMatch, Reason::Clean})
    if (to_string(r) == s) return r;
  throw ValidationError("unknown contamination reason '" + std::string(s) + "'");
}

Verdict is_contaminated(const Question& q, const DecontamIndex& idx) {
  auto tokens = normalize(q.text);
  if (tokens.size() >= idx.n()) {
    for (std::uint64_t fp : window_fingerprints(tokens, idx.n()))
      if (idx.has_ngram(fp)) return {true, Reason::NgramOverlap};
  } else if (!tokens.empty() && idx.has_short(whole_text_fingerprint(tokens))) {
    return {true, Reason::ShortExactMatch};
  }
  for (const auto& img : q.images)
    if (!img.digest.empty() && idx.has_image(img.digest)) return {true, Reason::ImageOverlap};
  return {};
}

namespace {

FilterResult partition(std::span<const Question> qs, const std::vector<Verdict>& verdicts) {
  FilterResult out;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (verdicts[i].flag)
      out.report.push_back({qs[i].id, verdicts[i].reason});
    else
      out.clean.push_back(qs[i]);
  }
  return out;
}

}  // namespace

FilterResult filter_corpus_serial(std::span<const Question> qs, const DecontamIndex& idx) {
  std::vector<Verdict> verdicts(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) verdicts[i] = is_contaminated(qs[i], idx);
  return partition(qs, verdicts);
}

FilterResult filter_corpus(std::span<const Question> qs, const DecontamIndex& idx) {
  std::vector<Verdict> verdicts(qs.size());
  const auto count = static_cast<std::ptrdiff_t>(qs.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    verdicts[static_cast<std::size_t>(i)] = is_contaminated(qs[static_cast<std::size_t>(i)], idx);
  return partition(qs, verdicts);
}

void write_report(const std::filesystem::path& path, std::span<const ContaminationEntry> report) {
  std::vector<util::json> rows;
  rows.reserve(report.size());
  for (const auto& e : report) rows.push_back({{"id", e.id}, {"reason", to_string(e.reason)}});
  util::write_jsonl(path, rows);
}

std::vector<ContaminationEntry> read_report(const std::filesystem::path& path) {
  std::vector<ContaminationEntry> out;
  for (const auto& row : util::read_jsonl(path))
    out.push_back({row.at("id").get<std::string>(), parse_reason(row.at("reason").get<std::string>())});
  return out;
}

}  // namespace tracemill::decontam
