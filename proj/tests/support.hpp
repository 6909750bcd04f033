#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tracemill/corpus.hpp"
#include "tracemill/modelclient.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("tracemill-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline tracemill::corpus::Question mcq(const std::string& id, const std::string& text, const std::string& gold,
                                       int n_options = 4) {
  tracemill::corpus::Question q;
  q.id = id;
  q.source = "synthetic";
  q.text = text;
  for (int i = 0; i < n_options; ++i)
    q.options.push_back({std::string(1, static_cast<char>('A' + i)), "option " + std::to_string(i)});
  q.gold_answer = gold;
  return q;
}

inline std::string random_words(std::mt19937_64& rng, std::size_t n, std::size_t vocab = 500) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += "w" + std::to_string(rng() % vocab);
  }
  return s;
}

inline tracemill::modelclient::MockEntry keyed(const std::string& key, std::vector<std::string> texts) {
  tracemill::modelclient::MockEntry e;
  e.key = key;
  for (auto& t : texts) e.responses.push_back({std::move(t), tracemill::modelclient::FinishReason::Stop});
  return e;
}

}  // namespace testing
