#include <mutex>
#include <shared_mutex>

#include "tracemill/corpus.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/text.hpp"

namespace tracemill::corpus {

namespace {

std::int64_t count_ws(std::string_view s) {
  std::int64_t n = 0;
  bool in_token = false;
  for (char c : s) {
    bool space = util::is_space_ascii(c);
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::int64_t count_utf8(std::string_view s) {
  std::int64_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

struct Registry {
  std::shared_mutex mu;
  std::map<std::string, Tokenizer, std::less<>> fns{{"ws", count_ws}, {"utf8-chars", count_utf8}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

std::int64_t count_tokens(std::string_view text, std::string_view tokenizer_id) {
  if (tokenizer_id == "ws") return count_ws(text);
  auto& r = registry();
  std::shared_lock lock(r.mu);
  auto it = r.fns.find(tokenizer_id);
  if (it == r.fns.end()) throw ConfigError("unknown tokenizer '" + std::string(tokenizer_id) + "'");
  return it->second(text);
}

void register_tokenizer(std::string id, Tokenizer fn) {
  auto& r = registry();
  std::unique_lock lock(r.mu);
  r.fns[std::move(id)] = std::move(fn);
}

bool has_tokenizer(std::string_view id) {
  auto& r = registry();
  std::shared_lock lock(r.mu);
  return r.fns.find(id) != r.fns.end();
}

}  // namespace tracemill::corpus
