// Writes a self-contained offline pipeline fixture: a training corpus with
// planted benchmark overlaps, a benchmark, scripted mock backends and a recipe.
//
//   make_fixture <dir> [--questions 50] [--seed 7]
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "tracemill/util/jsonl.hpp"
#include "tracemill/util/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kWords = {
    "patient",  "presents", "with",     "acute",    "chronic",  "pain",     "fever",   "lesion",   "biopsy",
    "shows",    "marked",   "diffuse",  "focal",    "renal",    "hepatic",  "cardiac", "murmur",   "elevated",
    "serum",    "levels",   "after",    "therapy",  "history",  "of",       "smoking", "dyspnea",  "cough",
    "nodule",   "left",     "right",    "lower",    "upper",    "lobe",     "mass",    "contrast", "enhancing",
    "swelling", "tender",   "abdomen",  "vision",   "loss",     "retinal",  "plaque",  "infiltrate", "margin"};

const char* kLetters[] = {"A", "B", "C", "D"};

std::string words(tracemill::util::Rng& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += kWords[rng.below(kWords.size())];
  }
  return s;
}

void write_image(const fs::path& path, int h, int w, int shade) {
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at<cv::Vec3b>(y, x) = cv::Vec3b(shade, (x * 7) % 256, (y * 3) % 256);
  fs::create_directories(path.parent_path());
  cv::imwrite(path.string(), img);
}

json mcq(const std::string& id, const std::string& text, const json& options, const std::string& gold,
         const json& images = json::array()) {
  json j = {{"id", id}, {"question", text}, {"options", options}, {"answer", gold}};
  if (!images.empty()) j["images"] = images;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"write an offline pipeline fixture"};
  std::string dir;
  std::size_t n = 50;
  std::uint64_t seed = 7;
  app.add_option("dir", dir)->required();
  app.add_option("--questions", n);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  const fs::path root(dir);
  fs::create_directories(root);
  tracemill::util::Rng rng(seed);

  // Benchmark: 20 text items plus 4 with images.
  std::vector<json> bench;
  std::vector<std::string> bench_text;
  std::vector<std::string> bench_gold;
  for (std::size_t i = 0; i < 24; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "bench-%03zu", i);
    json opts = json::object();
    for (auto* l : kLetters) opts[l] = words(rng, 3);
    std::string gold = kLetters[rng.below(4)];
    bench_text.push_back(words(rng, 30));
    bench_gold.push_back(gold);
    json images = json::array();
    if (i >= 20) {
      const std::string rel = "images/bench_" + std::to_string(i) + ".png";
      write_image(root / rel, 224, 224, static_cast<int>(40 * (i - 19)));
      images.push_back({{"path_or_uri", rel}, {"width", 224}, {"height", 224}});
    }
    bench.push_back(mcq(id, bench_text.back(), opts, gold, images));
  }

  std::vector<json> train;
  std::vector<std::string> train_gold;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "train-%03zu", i);
    json opts = json::object();
    for (auto* l : kLetters) opts[l] = words(rng, 3);
    std::string gold = kLetters[rng.below(4)];
    std::string text = words(rng, 24);
    if (i % 10 == 3) {  // planted 20-token overlap with a benchmark item
      const auto& src = bench_text[(i / 10) % 20];
      std::size_t pos = 0;
      for (int k = 0; k < 5; ++k) pos = src.find(' ', pos) + 1;
      std::size_t end = pos;
      for (int k = 0; k < 20 && end != std::string::npos; ++k) end = src.find(' ', end + 1);
      text += " " + src.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    }
    json images = json::array();
    if (i % 5 == 4) {
      std::string rel;
      int h = 900, w = 1200;
      if (i == 9) {  // byte-identical copy of a benchmark image
        rel = "images/train_dup.png";
        fs::copy_file(root / "images/bench_20.png", root / rel, fs::copy_options::overwrite_existing);
        h = w = 224;
      } else {
        rel = "images/train_" + std::to_string(i) + ".png";
        write_image(root / rel, h, w, static_cast<int>(i * 5 % 256));
      }
      images.push_back({{"path_or_uri", rel}, {"width", w}, {"height", h}});
    }
    json j = mcq(id, text, opts, gold, images);
    j["metadata"] = {{"modality", images.empty() ? "other" : "x-ray"}};
    train.push_back(j);
    train_gold.push_back(gold);
  }
  tracemill::util::write_jsonl(root / "train.jsonl", train);
  tracemill::util::write_jsonl(root / "bench.jsonl", bench);

  auto wrong = [](const std::string& g) { return std::string(g == "A" ? "B" : "A"); };

  // Teacher: question i gets (i % 5) correct answers out of 4; every seventh
  // question has its first correct answer truncated.
  json teacher = {{"entries", json::array()}};
  for (std::size_t i = 0; i < n; ++i) {
    json responses = json::array();
    const std::size_t correct = i % 5;
    for (std::size_t k = 0; k < 4; ++k) {
      const bool ok = k < correct;
      const std::string ans = ok ? train_gold[i] : wrong(train_gold[i]);
      const std::string text = "<think>\nWeighing the findings of case " + std::to_string(i) + ", attempt " +
                               std::to_string(k) + ", the best fit is " + ans + ".\n</think>\n<answer>" + ans +
                               "</answer>";
      json r = {{"text", text}};
      if (ok && k == 0 && i % 7 == 0) r["finish_reason"] = "length";
      responses.push_back(r);
    }
    teacher["entries"].push_back({{"key", train[i]["id"]}, {"responses", responses}});
  }

  // Judge: ratings cycle through 1..8; one question only ever gets noise.
  json judge = {{"entries", json::array()}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string reply = i == 11 ? "hard to say" : "Rating: " + std::to_string(1 + (i % 8));
    judge["entries"].push_back({{"key", train[i]["id"]}, {"responses", json::array({reply})}});
  }

  // Student: correct unless (i + seed) % 3 == 0; item i % 6 == 5 truncates on seed 0.
  json student = {{"entries", json::array()}};
  const std::vector<int> seeds = {0, 1, 2};
  for (std::size_t i = 0; i < bench.size(); ++i) {
    const std::string id = bench[i]["id"];
    for (int s : seeds) {
      json r;
      if (i % 6 == 5 && s == 0) {
        r = {{"text", "<think>\nThe imaging pattern keeps suggesting several things and"}, {"finish_reason", "length"}};
      } else {
        const std::string ans = (i + s) % 3 == 0 ? wrong(bench_gold[i]) : bench_gold[i];
        r = {{"text", "<think>\nShort reasoning for " + id + ".\n</think>\n\\boxed{" + ans + "}"}};
      }
      student["entries"].push_back({{"key", id + "@" + std::to_string(s)}, {"responses", json::array({r})}});
    }
    student["entries"].push_back(
        {{"key", id + "/continue"}, {"responses", json::array({"\n\\boxed{" + bench_gold[i] + "}"})}});
    student["entries"].push_back({{"key", id + "/vote"},
                                  {"responses", json::array({"\\boxed{" + bench_gold[i] + "}",
                                                             "\\boxed{" + wrong(bench_gold[i]) + "}",
                                                             "\\boxed{" + bench_gold[i] + "}"})}});
  }
  tracemill::util::write_file(root / "teacher.json", teacher.dump(1) + "\n");
  tracemill::util::write_file(root / "judge.json", judge.dump(1) + "\n");
  tracemill::util::write_file(root / "student.json", student.dump(1) + "\n");

  json recipe = {
      {"version", "1"},
      {"seed", seed},
      {"tokenizer_id", "ws"},
      {"endpoints",
       {{"teacher", {{"kind", "mock"}, {"script_path", "teacher.json"}, {"model_id", "mock-teacher"}}},
        {"judge", {{"kind", "mock"}, {"script_path", "judge.json"}, {"model_id", "mock-judge"}}},
        {"student", {{"kind", "mock"}, {"script_path", "student.json"}, {"model_id", "mock-student"}}}}},
      {"stages",
       json::array({
           {{"stage", "ingest"},
            {"inputs", json::array({{{"name", "train"}, {"path", "train.jsonl"}, {"schema", "mcq"}},
                                    {{"name", "bench"}, {"path", "bench.jsonl"}, {"schema", "mcq"}}})}},
           {{"stage", "decontaminate"}, {"corpora", {"train"}}, {"benchmarks", {"bench"}}, {"n", 16}},
           {{"stage", "preprocess"}, {"corpora", {"train"}}, {"resize", true}},
           {{"stage", "filter"}, {"corpora", {"train"}}, {"strategy", "JudgeDifficulty"}, {"endpoint", "judge"}},
           {{"stage", "distill"}, {"corpora", {"train"}}, {"teacher", "teacher"}, {"template", "distill-cot-think"}, {"k", 4}},
           {{"stage", "mix"},
            {"sources", json::array({{{"corpus", "train"}}})},
            {"cap", 2},
            {"prompt_style", "CoT"}},
           {{"stage", "export"}, {"format", "ChatMessages"}, {"shard_size", 16}},
           {{"stage", "eval"},
            {"benchmarks", {"bench"}},
            {"endpoint", "student"},
            {"template", "eval-boxed"},
            {"seeds", seeds},
            {"vote_samples", 3}},
       })}};
  tracemill::util::write_file(root / "recipe.json", recipe.dump(2) + "\n");
  std::cout << "fixture written to " << root.string() << "\n";
  return 0;
}
