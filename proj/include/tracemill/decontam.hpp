#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracemill/corpus.hpp"

namespace tracemill::decontam {

using corpus::Question;

inline constexpr std::size_t kDefaultN = 16;
inline constexpr const char* kNormalizationId = "lower-asciipunct-ws-v1";

/// ASCII-lowercase, every ASCII punctuation byte becomes a space, split on
/// whitespace. Non-ASCII bytes are kept inside tokens unchanged.
std::vector<std::string> normalize(std::string_view text);

std::uint64_t token_hash(std::string_view token);

/// Fingerprint of every contiguous n-token window, in window order
/// (tokens.size() - n + 1 values, or none when the text is shorter than n).
std::vector<std::uint64_t> window_fingerprints(std::span<const std::string> tokens, std::size_t n);

/// Fingerprint of a whole token sequence; used for texts shorter than n.
std::uint64_t whole_text_fingerprint(std::span<const std::string> tokens);

/// Immutable after construction; safe to share across scanning threads.
class DecontamIndex {
 public:
  DecontamIndex() = default;
  DecontamIndex(std::size_t n, std::string normalization_id, std::vector<std::uint64_t> ngram_fingerprints,
                std::vector<std::uint64_t> short_fingerprints, std::vector<std::string> image_digests,
                std::vector<std::string> benchmark_ids);

  std::size_t n() const { return n_; }
  const std::string& normalization_id() const { return normalization_id_; }
  const std::vector<std::uint64_t>& ngram_fingerprints() const { return ngram_; }
  const std::vector<std::uint64_t>& short_fingerprints() const { return short_; }
  const std::vector<std::string>& image_digests() const { return digests_; }
  const std::vector<std::string>& benchmark_ids() const { return benchmark_ids_; }

  bool has_ngram(std::uint64_t fp) const;
  bool has_short(std::uint64_t fp) const;
  bool has_image(std::string_view digest) const;

  bool operator==(const DecontamIndex&) const = default;

 private:
  std::size_t n_ = kDefaultN;
  std::string normalization_id_ = kNormalizationId;
  std::vector<std::uint64_t> ngram_;   // sorted, unique
  std::vector<std::uint64_t> short_;   // sorted, unique
  std::vector<std::string> digests_;   // sorted, unique
  std::vector<std::string> benchmark_ids_;
};

struct BuildOptions {
  std::size_t n = kDefaultN;
  // Text windows are taken only from TextOnly benchmarks; image digests from all.
  bool text_only_benchmarks = true;
};

/// OpenMP kernel: per-question fingerprinting in parallel, then a sorted merge.
DecontamIndex build_index(std::span<const Question> benchmarks, const BuildOptions& opts = {});
/// Serial reference for build_index; must produce an identical index.
DecontamIndex build_index_serial(std::span<const Question> benchmarks, const BuildOptions& opts = {});

enum class Reason { NgramOverlap, ImageOverlap, ShortExactMatch, Clean };
std::string_view to_string(Reason r);
Reason parse_reason(std::string_view s);

struct Verdict {
  bool flag = false;
  Reason reason = Reason::Clean;
};

Verdict is_contaminated(const Question& q, const DecontamIndex& idx);

struct ContaminationEntry {
  std::string id;
  Reason reason = Reason::Clean;
  bool operator==(const ContaminationEntry&) const = default;
};

struct FilterResult {
  std::vector<Question> clean;
  std::vector<ContaminationEntry> report;
};

/// OpenMP kernel over questions. Input order is preserved in both outputs.
FilterResult filter_corpus(std::span<const Question> qs, const DecontamIndex& idx);
FilterResult filter_corpus_serial(std::span<const Question> qs, const DecontamIndex& idx);

void write_report(const std::filesystem::path& path, std::span<const ContaminationEntry> report);
std::vector<ContaminationEntry> read_report(const std::filesystem::path& path);

/// Versioned little-endian binary: magic "TMDXIDX1", format version, n,
/// normalization id, sorted fingerprint arrays, digests, benchmark ids.
void save_index(const std::filesystem::path& path, const DecontamIndex& idx);
DecontamIndex load_index(const std::filesystem::path& path);

}  // namespace tracemill::decontam
