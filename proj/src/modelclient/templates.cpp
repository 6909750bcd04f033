#include <algorithm>

#include "tracemill/modelclient.hpp"
#include "tracemill/util/error.hpp"

namespace tracemill::modelclient {

std::string_view to_string(TemplateStyle s) {
  switch (s) {
    case TemplateStyle::CoT: return "CoT";
    case TemplateStyle::Direct: return "Direct";
    case TemplateStyle::ThinkAnswerTags: return "ThinkAnswerTags";
    case TemplateStyle::BoxedCoT: return "BoxedCoT";
    case TemplateStyle::LetterDirect: return "LetterDirect";
  }
  return "CoT";
}

corpus::PromptStyle PromptTemplate::prompt_style() const {
  return style == TemplateStyle::Direct || style == TemplateStyle::LetterDirect ? corpus::PromptStyle::Direct
                                                                                : corpus::PromptStyle::CoT;
}

namespace {

// Multimodal teacher prompt; the worked example is part of the prompt.
constexpr const char* kDistillCotThink = R"tmpl(You should provide your detailed thoughts within <think> </think> tags, always making sure to reflect and think about your response, then answer with just one of the options below within <answer> </answer> tags. Your response should carefully consider the options and output a very long chain of thought. (For example, if the question is 
'Is the earth flat?
A: Yes 
B: No', you should answer with <think>Okay, let's tackle this question about whether the Earth is flat or not. The idea that the Earth is flat may feel intuitive because our everyday experience seems flat, but overwhelming evidence shows it's a sphere. First, astronomical observations reveal that stars rotate differently in the northern and southern hemispheres: Polaris is visible up north but not down south, which only makes sense on a curved surface. Wait, could that be due to perspective? No, let me double check; this change in visible stars directly correlates with latitude, which wouldn’t happen on a flat plane. Ships also disappear bottom-first over the horizon; wait, maybe that’s just perspective? But even with a telescope, the hull stays hidden, confirming it’s curvature, not optics. Then there's air travel: planes follow great-circle routes, which look curved on flat maps but are the shortest path on a globe. Let me double check. Yes, for example, New York to Tokyo arcs over Alaska only because the Earth is round. During lunar eclipses, Earth always casts a round shadow on the Moon. Wait, could a flat disc do that? Only from one angle; a sphere is the only shape that does this consistently. And what about space photos? Are they fake? Let me double check. No, not just NASA, but independent agencies and private companies would all have to be complicit, and their satellite systems rely on spherical Earth physics to work, including GPS. Time zones also show curvature; when it’s day in Tokyo, it’s night in New York. Wait, could the Sun just be a spotlight above a flat Earth? That fails too; we’d see the Sun all the time just dimmer, not dipping below the horizon. Also, engineers designing long bridges or tunnels adjust for curvature, and GPS satellites wouldn’t function without spherical Earth modeling. Let me double check—yes, geodetic surveying and orbital mechanics prove it. So from ancient Greek reasoning to modern engineering and spaceflight, every independent line of evidence confirms the Earth is not flat, but round.</think> <answer>B: No</answer>). Here is the question: {{question}})tmpl";

constexpr const char* kDistillR1Answer = "{{question}}\n\n\nPut your final answer letter within <answer></answer> tags.\n";

constexpr const char* kEvalBoxed = "{{question}}\n\n\nPlease reason step-by-step, and put your final answer within \\boxed{}.";

constexpr const char* kEvalLetterDirect = "{{question}}\n\n\nAnswer with the option's letter from the given choices directly.";

constexpr const char* kEvalLingshuBoxed =
    "Question: {{question}}\n\nAnswer with the option's letter from the given choices and put the letter in one \"\\boxed{}\"";

constexpr const char* kEvalThinkAnswer =
    "You will solve a problem/request. You should provide your thoughts within <think> </think> tags before providing "
    "the answer.\n\nWrite your final answer within <answer> </answer> tags.\n\n{{question}}";

std::size_t count_slots(std::string_view body) {
  std::size_t n = 0;
  for (auto pos = body.find(kQuestionSlot); pos != std::string_view::npos; pos = body.find(kQuestionSlot, pos + 1)) ++n;
  return n;
}

}  // namespace

TemplateRegistry TemplateRegistry::with_builtins() {
  TemplateRegistry r;
  r.add({"distill-cot-think", kDistillCotThink, TemplateStyle::ThinkAnswerTags});
  r.add({"distill-r1-answer", kDistillR1Answer, TemplateStyle::CoT});
  r.add({"eval-boxed", kEvalBoxed, TemplateStyle::BoxedCoT});
  r.add({"eval-letter-direct", kEvalLetterDirect, TemplateStyle::LetterDirect});
  r.add({"eval-lingshu-boxed", kEvalLingshuBoxed, TemplateStyle::BoxedCoT});
  r.add({"eval-think-answer", kEvalThinkAnswer, TemplateStyle::ThinkAnswerTags});
  return r;
}

const TemplateRegistry& TemplateRegistry::builtins() {
  static const TemplateRegistry r = with_builtins();
  return r;
}

void TemplateRegistry::add(PromptTemplate t) {
  if (t.template_id.empty()) throw ConfigError("template id is empty");
  if (count_slots(t.body) != 1)
    throw ConfigError("template " + t.template_id + " must contain " + kQuestionSlot + " exactly once");
  if (templates_.count(t.template_id)) throw ConfigError("duplicate template id " + t.template_id);
  auto id = t.template_id;
  templates_.emplace(std::move(id), std::move(t));
}

const PromptTemplate& TemplateRegistry::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ConfigError("unknown template '" + std::string(id) + "'");
  return it->second;
}

bool TemplateRegistry::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

std::string render_question_block(const corpus::Question& q) {
  std::string out;
  for (std::size_t i = 0; i < q.images.size(); ++i) out += "<image " + std::to_string(i + 1) + ">\n";
  out += q.text;
  for (const auto& o : q.options) out += "\n" + o.letter + ": " + o.text;
  return out;
}

std::string render(const PromptTemplate& t, const corpus::Question& q) {
  const auto pos = t.body.find(kQuestionSlot);
  if (pos == std::string::npos) throw ConfigError("template " + t.template_id + " has no question slot");
  std::string out = t.body.substr(0, pos);
  out += render_question_block(q);
  out += t.body.substr(pos + std::char_traits<char>::length(kQuestionSlot));
  return out;
}

}  // namespace tracemill::modelclient
