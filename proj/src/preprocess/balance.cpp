#include <map>
#include <unordered_set>

#include "tracemill/preprocess.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/hash.hpp"
#include "tracemill/util/rng.hpp"

namespace tracemill::preprocess {

std::vector<Question> stratified_balance(std::span<const Question> qs, std::uint64_t seed,
                                         std::optional<std::size_t> per_class_cap) {
  if (qs.empty()) return {};
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto& q = qs[i];
    if (!q.find_option(q.gold_answer))
      throw ValidationError("stratified_balance: question " + q.id + " has no option matching gold answer '" +
                            q.gold_answer + "'");
    classes[q.gold_answer].push_back(i);
  }
  std::size_t cap = SIZE_MAX;
  for (const auto& [_, members] : classes) cap = std::min(cap, members.size());
  if (per_class_cap) cap = *per_class_cap;

  std::vector<char> keep(qs.size(), 0);
  for (const auto& [label, members] : classes) {
    util::Rng rng(util::derive_seed(seed, label));
    for (std::size_t pick : rng.sample_indices(members.size(), std::min(cap, members.size()))) keep[members[pick]] = 1;
  }
  std::vector<Question> out;
  for (std::size_t i = 0; i < qs.size(); ++i)
    if (keep[i]) out.push_back(qs[i]);
  return out;
}

}  // namespace tracemill::preprocess
