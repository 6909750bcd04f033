#include <algorithm>
#include <map>

#include "tracemill/preprocess.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/text.hpp"

namespace tracemill::preprocess {

namespace {

using SynonymMap = std::map<std::string, std::string, std::less<>>;

const SynonymMap& modality_synonyms() {
  static const SynonymMap m = {
      {"xray", "x-ray"}, {"x ray", "x-ray"}, {"radiograph", "x-ray"}, {"radiography", "x-ray"}, {"cxr", "x-ray"},
      {"chest x-ray", "x-ray"}, {"computed tomography", "ct"}, {"ct scan", "ct"}, {"magnetic resonance", "mri"},
      {"magnetic resonance imaging", "mri"}, {"mr", "mri"}, {"sonography", "ultrasound"}, {"ultrasonography", "ultrasound"},
      {"us", "ultrasound"}, {"fundus photography", "fundus"}, {"retinal photography", "fundus"},
      {"histopathology", "pathology"}, {"histology", "pathology"}, {"whole slide image", "pathology"},
      {"dermoscopy", "dermatology"}, {"dermatoscopy", "dermatology"}, {"colonoscopy", "endoscopy"},
      {"optical coherence tomography", "oct"},
  };
  return m;
}

const SynonymMap& region_synonyms() {
  static const SynonymMap m = {
      {"retina", "eye"}, {"ocular", "eye"}, {"ophthalmic", "eye"}, {"thorax", "chest"}, {"lung", "chest"},
      {"lungs", "chest"}, {"heart", "chest"}, {"cardiac", "chest"}, {"head", "brain"}, {"skull", "brain"},
      {"neuro", "brain"}, {"abdominal", "abdomen"}, {"liver", "abdomen"}, {"kidney", "abdomen"}, {"pelvic", "pelvis"},
      {"dermal", "skin"}, {"bone", "musculoskeletal"}, {"spine", "musculoskeletal"}, {"knee", "musculoskeletal"},
      {"msk", "musculoskeletal"}, {"tissue", "cell"}, {"cellular", "cell"},
  };
  return m;
}

std::string lookup(std::string_view raw, const std::vector<std::string>& vocab, const SynonymMap& synonyms) {
  std::string v = util::to_lower_ascii(util::trim(raw));
  while (!v.empty() && (v.back() == '.' || v.back() == '*')) v.pop_back();
  while (!v.empty() && v.front() == '*') v.erase(v.begin());
  v = std::string(util::trim(v));
  if (std::find(vocab.begin(), vocab.end(), v) != vocab.end()) return v;
  if (auto it = synonyms.find(v); it != synonyms.end()) return it->second;
  return "other";
}

}  // namespace

const std::vector<std::string>& modality_vocabulary() {
  static const std::vector<std::string> v = {"x-ray", "ct", "mri", "ultrasound", "fundus", "pathology",
                                             "dermatology", "endoscopy", "microscopy", "oct", "other"};
  return v;
}

const std::vector<std::string>& region_vocabulary() {
  static const std::vector<std::string> v = {"brain", "head-neck", "chest", "abdomen", "pelvis", "eye",
                                             "skin", "breast", "musculoskeletal", "cell", "other"};
  return v;
}

std::string annotation_prompt(const Question& q) {
  std::string prompt =
      "Classify the imaging modality and the anatomical region this medical question is about.\nModality options: " +
      util::join(modality_vocabulary(), ", ") + "\nRegion options: " + util::join(region_vocabulary(), ", ") +
      "\nReply with exactly one line of the form: <modality> / <region>\n\nQuestion:\n" +
      modelclient::render_question_block(q);
  return prompt;
}

Annotation parse_annotation(std::string_view judge_output) {
  std::string_view line = util::trim(judge_output);
  if (auto nl = line.find('\n'); nl != std::string_view::npos) line = line.substr(0, nl);
  const auto sep = line.find('/');
  if (sep == std::string_view::npos) return {};
  return {lookup(line.substr(0, sep), modality_vocabulary(), modality_synonyms()),
          lookup(line.substr(sep + 1), region_vocabulary(), region_synonyms())};
}

Annotated annotate_metadata(const Question& q, modelclient::ModelClient& judge, const modelclient::SamplingParams& params) {
  Annotated out{q, std::nullopt};
  modelclient::ChatRequest req;
  req.prompt = annotation_prompt(q);
  req.images = q.images;
  req.params = params;
  req.params.n_samples = 1;
  req.key = q.id;
  try {
    auto responses = judge.complete(req);
    Annotation a = parse_annotation(responses.front().text);
    out.question.metadata["modality"] = a.modality;
    out.question.metadata["region"] = a.region;
  } catch (const TransportError& e) {
    out.error = e.what();
  } catch (const ProtocolError& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace tracemill::preprocess
