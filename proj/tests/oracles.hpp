// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tracemill/corpus.hpp"

namespace oracle {

/// std::regex based: ASCII punctuation to spaces, ASCII lowercase, whitespace split.
std::vector<std::string> normalize(const std::string& text);

enum class Flag { Clean, Ngram, Short, Image };

/// Exact token-sequence comparison, no hashing. Text windows only from
/// TextOnly benchmarks when text_only is set; image digests from all.
std::vector<Flag> decontam_flags(std::span<const tracemill::corpus::Question> train,
                                 std::span<const tracemill::corpus::Question> bench, std::size_t n,
                                 bool text_only = true);

/// smart_resize by scanning factor multiples instead of rounding arithmetic.
std::pair<std::int64_t, std::int64_t> smart_resize(std::int64_t h, std::int64_t w, std::int64_t max_pixels = 262144,
                                                   std::int64_t min_pixels = 3136, std::int64_t factor = 28);

/// Bootstrap with a histogram of resampled success counts; draws follow the
/// documented stream contract (mt19937_64 per resample, rejection-sampled index).
std::pair<double, double> bootstrap(std::span<const int> x, int resamples, double level, std::uint64_t seed);

/// Exact quantiles (percent) of the bootstrap distribution of the mean of
/// a 0/1 vector: Binomial(n, mean) / n.
std::pair<double, double> exact_bootstrap_quantiles(std::span<const int> x, double level);

}  // namespace oracle
