#include "tracemill/decontam.hpp"
#include "tracemill/util/hash.hpp"

namespace tracemill::decontam {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

bool is_ascii_space(unsigned char c) { return c == ' ' || (c >= 9 && c <= 13); }

// Odd multiplier for the polynomial rolling hash over token hashes (mod 2^64).
constexpr std::uint64_t kBase = 0x100000001b3ULL * 2 + 1;
constexpr std::uint64_t kShortSalt = 0x5348524eULL;  // "SHRN"

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_ascii_space(c) || is_ascii_punct(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
      continue;
    }
    cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::uint64_t token_hash(std::string_view token) { return util::splitmix64(util::fnv1a64(token)); }

std::vector<std::uint64_t> window_fingerprints(std::span<const std::string> tokens, std::size_t n) {
  std::vector<std::uint64_t> out;
  if (n == 0 || tokens.size() < n) return out;
  out.reserve(tokens.size() - n + 1);
  std::uint64_t base_pow = 1;  // kBase^(n-1)
  for (std::size_t i = 1; i < n; ++i) base_pow *= kBase;

  std::vector<std::uint64_t> th(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) th[i] = token_hash(tokens[i]);

  std::uint64_t poly = 0;
  for (std::size_t i = 0; i < n; ++i) poly = poly * kBase + th[i];
  out.push_back(util::splitmix64(poly ^ n));
  for (std::size_t i = n; i < tokens.size(); ++i) {
    poly -= th[i - n] * base_pow;
    poly = poly * kBase + th[i];
    out.push_back(util::splitmix64(poly ^ n));
  }
  return out;
}

std::uint64_t whole_text_fingerprint(std::span<const std::string> tokens) {
  std::uint64_t poly = 0;
  for (const auto& t : tokens) poly = poly * kBase + token_hash(t);
  return util::splitmix64(poly ^ util::splitmix64(tokens.size() ^ kShortSalt));
}

}  // namespace tracemill::decontam
