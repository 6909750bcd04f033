#include <regex>

#include "tracemill/distill.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/text.hpp"

namespace tracemill::distill {

ThinkSplit split_think(std::string_view raw) {
  ThinkSplit s;
  const auto open = raw.find(kThinkOpen);
  if (open == std::string_view::npos) {
    s.remainder = std::string(raw);
    return s;
  }
  s.opened = true;
  s.prefix = std::string(raw.substr(0, open));
  const auto body = open + kThinkOpen.size();
  const auto close = raw.find(kThinkClose, body);
  if (close == std::string_view::npos) {
    s.reasoning = std::string(raw.substr(body));
    return s;
  }
  s.closed = true;
  s.reasoning = std::string(raw.substr(body, close - body));
  s.remainder = std::string(raw.substr(close + kThinkClose.size()));
  return s;
}

bool has_unterminated_think(std::string_view raw) {
  auto s = split_think(raw);
  return s.opened && !s.closed;
}

namespace {

bool is_letter(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

// Strips one level of \text{...}-style wrappers, markdown emphasis and $...$.
std::string unwrap(std::string_view s) {
  std::string v(util::trim(s));
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::string_view cmd : {"\\text{", "\\textbf{", "\\mathrm{", "\\mathbf{"}) {
      if (v.rfind(cmd, 0) == 0 && !v.empty() && v.back() == '}') {
        v = std::string(util::trim(std::string_view(v).substr(cmd.size(), v.size() - cmd.size() - 1)));
        changed = true;
      }
    }
    for (std::string_view wrap : {"**", "*", "$", "`"}) {
      if (v.size() >= 2 * wrap.size() && v.rfind(wrap, 0) == 0 &&
          v.compare(v.size() - wrap.size(), wrap.size(), wrap) == 0) {
        v = std::string(util::trim(std::string_view(v).substr(wrap.size(), v.size() - 2 * wrap.size())));
        changed = true;
      }
    }
  }
  return v;
}

/// Returns the option letter if `s` (already unwrapped) reads as one:
/// "B", "b", "(B)", "B.", "B)", "B: text", "B. text", "(B) text".
std::optional<std::string> as_letter(std::string_view s) {
  s = util::trim(s);
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool paren = false;
  if (s[0] == '(') paren = true, ++i;
  if (i >= s.size() || !is_letter(s[i])) return std::nullopt;
  const char letter = s[i++];
  if (paren) {
    if (i >= s.size() || s[i] != ')') return std::nullopt;
    ++i;
  }
  std::string_view rest = s.substr(i);
  if (rest.empty()) return util::to_upper_ascii(std::string(1, letter));
  if (!paren && rest[0] != ':' && rest[0] != '.' && rest[0] != ')' && !util::is_space_ascii(rest[0])) return std::nullopt;
  // A lone trailing punctuation mark or an option-text tail, but not a word like "A cat".
  if (!paren && util::is_space_ascii(rest[0])) return std::nullopt;
  return util::to_upper_ascii(std::string(1, letter));
}

std::optional<std::string> last_boxed(std::string_view raw) {
  constexpr std::string_view kBoxed = "\\boxed{";
  for (auto pos = raw.rfind(kBoxed); pos != std::string_view::npos; pos = pos ? raw.rfind(kBoxed, pos - 1) : std::string_view::npos) {
    std::size_t i = pos + kBoxed.size();
    int depth = 1;
    std::size_t j = i;
    for (; j < raw.size() && depth > 0; ++j) {
      if (raw[j] == '{') ++depth;
      else if (raw[j] == '}') --depth;
    }
    if (depth == 0) return std::string(raw.substr(i, j - 1 - i));
    if (pos == 0) break;
  }
  return std::nullopt;
}

std::optional<std::string> last_answer_tag(std::string_view raw) {
  constexpr std::string_view kOpen = "<answer>";
  constexpr std::string_view kClose = "</answer>";
  const auto close = raw.rfind(kClose);
  if (close == std::string_view::npos) return std::nullopt;
  const auto open = raw.rfind(kOpen, close);
  if (open == std::string_view::npos) return std::nullopt;
  return std::string(raw.substr(open + kOpen.size(), close - open - kOpen.size()));
}

std::optional<std::string> last_answer_line(std::string_view raw) {
  static const std::regex kLine(R"(^[\s*_#>]*(?:final\s+)?answer[\s*_]*:[\s*_]*(.+)$)", std::regex::icase);
  std::optional<std::string> found;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    const std::string line(raw.substr(start, end - start));
    std::smatch m;
    if (std::regex_match(line, m, kLine)) {
      if (auto letter = as_letter(unwrap(m[1].str()))) found = letter;
    }
    start = end + 1;
  }
  return found;
}

std::optional<std::string> extract_from(std::string_view text, TemplateStyle style) {
  if (auto b = last_boxed(text)) return normalize_answer(*b);
  if (auto a = last_answer_tag(text)) return normalize_answer(*a);
  if (auto l = last_answer_line(text)) return l;
  if (style == TemplateStyle::Direct || style == TemplateStyle::LetterDirect) return as_letter(unwrap(text));
  return std::nullopt;
}

}  // namespace

std::optional<std::string> normalize_answer(std::string_view content) {
  std::string v = unwrap(content);
  if (v.empty()) return std::nullopt;
  if (auto letter = as_letter(v)) return letter;
  return v;
}

std::optional<std::string> extract_answer(std::string_view raw, TemplateStyle style) {
  auto split = split_think(raw);
  if (split.closed) {
    if (auto a = extract_from(split.remainder, style)) return a;
  }
  return extract_from(raw, style);
}

std::string_view to_string(ScoreReason r) {
  switch (r) {
    case ScoreReason::ExactMatch: return "ExactMatch";
    case ScoreReason::Mismatch: return "Mismatch";
    case ScoreReason::Unextractable: return "Unextractable";
  }
  return "Unextractable";
}

namespace {

std::string canonical_answer(std::string_view s) {
  auto n = normalize_answer(s);
  if (!n) return {};
  return util::to_lower_ascii(util::join(util::split_whitespace(*n), " "));
}

}  // namespace

ScoringResult score(const std::optional<std::string>& predicted, const std::string& gold, const std::string& question_id) {
  if (util::trim(gold).empty()) throw ValidationError("score: gold answer is empty");
  ScoringResult r{question_id, predicted, gold, 0, ScoreReason::Unextractable};
  if (!predicted || util::trim(*predicted).empty()) return r;
  if (canonical_answer(*predicted) == canonical_answer(gold)) {
    r.score = 1;
    r.reason = ScoreReason::ExactMatch;
  } else {
    r.reason = ScoreReason::Mismatch;
  }
  return r;
}

}  // namespace tracemill::distill
