#include <algorithm>

#include "tracemill/decontam.hpp"
#include "tracemill/util/error.hpp"

namespace tracemill::decontam {

namespace {

template <class T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

struct QuestionPrints {
  std::vector<std::uint64_t> windows;
  std::vector<std::uint64_t> whole;  // at most one entry
};

QuestionPrints fingerprint_question(const Question& q, const BuildOptions& opts) {
  QuestionPrints p;
  if (opts.text_only_benchmarks && q.category != corpus::Category::TextOnly) return p;
  auto tokens = normalize(q.text);
  if (tokens.empty()) return p;
  if (tokens.size() < opts.n)
    p.whole.push_back(whole_text_fingerprint(tokens));
  else
    p.windows = window_fingerprints(tokens, opts.n);
  return p;
}

void check(const BuildOptions& opts) {
  if (opts.n < 1) throw ConfigError("decontam n must be >= 1");
}

std::vector<std::string> collect_digests(std::span<const Question> benchmarks) {
  std::vector<std::string> digests;
  for (const auto& q : benchmarks)
    for (const auto& img : q.images)
      if (!img.digest.empty()) digests.push_back(img.digest);
  sort_unique(digests);
  return digests;
}

std::vector<std::string> collect_ids(std::span<const Question> benchmarks) {
  std::vector<std::string> ids;
  ids.reserve(benchmarks.size());
  for (const auto& q : benchmarks) ids.push_back(q.id);
  return ids;
}

}  // namespace

DecontamIndex::DecontamIndex(std::size_t n, std::string normalization_id, std::vector<std::uint64_t> ngram_fingerprints,
                             std::vector<std::uint64_t> short_fingerprints, std::vector<std::string> image_digests,
                             std::vector<std::string> benchmark_ids)
    : n_(n),
      normalization_id_(std::move(normalization_id)),
      ngram_(std::move(ngram_fingerprints)),
      short_(std::move(short_fingerprints)),
      digests_(std::move(image_digests)),
      benchmark_ids_(std::move(benchmark_ids)) {
  if (n_ < 1) throw ConfigError("decontam n must be >= 1");
  sort_unique(ngram_);
  sort_unique(short_);
  sort_unique(digests_);
}

bool DecontamIndex::has_ngram(std::uint64_t fp) const { return std::binary_search(ngram_.begin(), ngram_.end(), fp); }
bool DecontamIndex::has_short(std::uint64_t fp) const { return std::binary_search(short_.begin(), short_.end(), fp); }
bool DecontamIndex::has_image(std::string_view digest) const {
  return std::binary_search(digests_.begin(), digests_.end(), digest, std::less<>{});
}

DecontamIndex build_index_serial(std::span<const Question> benchmarks, const BuildOptions& opts) {
  check(opts);
  std::vector<std::uint64_t> windows, whole;
  for (const auto& q : benchmarks) {
    auto p = fingerprint_question(q, opts);
    windows.insert(windows.end(), p.windows.begin(), p.windows.end());
    whole.insert(whole.end(), p.whole.begin(), p.whole.end());
  }
  return {opts.n, kNormalizationId, std::move(windows), std::move(whole), collect_digests(benchmarks),
          collect_ids(benchmarks)};
}

DecontamIndex build_index(std::span<const Question> benchmarks, const BuildOptions& opts) {
  check(opts);
  const auto count = static_cast<std::ptrdiff_t>(benchmarks.size());
  std::vector<QuestionPrints> prints(benchmarks.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i) prints[static_cast<std::size_t>(i)] = fingerprint_question(benchmarks[static_cast<std::size_t>(i)], opts);

  std::size_t total = 0;
  for (const auto& p : prints) total += p.windows.size();
  std::vector<std::uint64_t> windows;
  windows.reserve(total);
  std::vector<std::uint64_t> whole;
  for (auto& p : prints) {
    windows.insert(windows.end(), p.windows.begin(), p.windows.end());
    whole.insert(whole.end(), p.whole.begin(), p.whole.end());
  }
  return {opts.n, kNormalizationId, std::move(windows), std::move(whole), collect_digests(benchmarks),
          collect_ids(benchmarks)};
}

}  // namespace tracemill::decontam
