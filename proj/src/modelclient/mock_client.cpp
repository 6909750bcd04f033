#include <chrono>
#include <thread>

#include "tracemill/modelclient.hpp"
#include "tracemill/util/error.hpp"

namespace tracemill::modelclient {

void to_json(json& j, const MockScript& s) {
  auto resp = [](const MockResponse& r) { return json{{"text", r.text}, {"finish_reason", to_string(r.finish)}}; };
  json entries = json::array();
  for (const auto& e : s.entries) {
    json rs = json::array();
    for (const auto& r : e.responses) rs.push_back(resp(r));
    json row = {{"responses", std::move(rs)}};
    if (!e.key.empty()) row["key"] = e.key;
    if (!e.pattern.empty()) row["pattern"] = e.pattern;
    entries.push_back(std::move(row));
  }
  j = json{{"entries", std::move(entries)}, {"latency_ms", s.latency_ms}};
  j["fallback"] = s.fallback ? resp(*s.fallback) : json(nullptr);
}

void from_json(const json& j, MockScript& s) {
  auto resp = [](const json& r) {
    if (r.is_string()) return MockResponse{r.get<std::string>(), FinishReason::Stop};
    return MockResponse{r.at("text").get<std::string>(),
                        parse_finish_reason(r.value("finish_reason", std::string("stop")))};
  };
  s.entries.clear();
  for (const auto& e : j.at("entries")) {
    MockEntry entry;
    entry.key = e.value("key", std::string{});
    entry.pattern = e.value("pattern", std::string{});
    for (const auto& r : e.at("responses")) entry.responses.push_back(resp(r));
    if (entry.responses.empty()) throw ConfigError("mock entry '" + entry.key + entry.pattern + "' has no responses");
    if (entry.key.empty() && entry.pattern.empty()) throw ConfigError("mock entry needs a key or a pattern");
    s.entries.push_back(std::move(entry));
  }
  auto fb = j.find("fallback");
  if (fb != j.end() && !fb->is_null())
    s.fallback = resp(*fb);
  else
    s.fallback.reset();
  s.latency_ms = j.value("latency_ms", 0);
}

MockModelClient::MockModelClient(MockScript script, std::string model_id, int max_concurrency)
    : ModelClient(std::move(model_id), max_concurrency), script_(std::move(script)) {
  if (script_.entries.empty() && !script_.fallback) throw ConfigError("mock script is empty");
}

std::vector<Completion> MockModelClient::do_complete(const ChatRequest& req) {
  const int now = in_flight_.fetch_add(1) + 1;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<int>& c;
    ~Leave() { c.fetch_sub(1); }
  } leave{in_flight_};

  const std::uint64_t start = tick_.fetch_add(1);
  if (script_.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(script_.latency_ms));

  std::optional<std::size_t> hit;
  bool seed_keyed = false;
  if (req.params.seed) {
    const std::string seeded = req.key + "@" + std::to_string(*req.params.seed);
    for (std::size_t i = 0; i < script_.entries.size() && !hit; ++i)
      if (script_.entries[i].key == seeded) hit = i, seed_keyed = true;
  }
  for (std::size_t i = 0; i < script_.entries.size() && !hit; ++i)
    if (!req.key.empty() && script_.entries[i].key == req.key) hit = i;
  for (std::size_t i = 0; i < script_.entries.size() && !hit; ++i)
    if (script_.entries[i].key.empty() && req.prompt.find(script_.entries[i].pattern) != std::string::npos) hit = i;
  if (!hit && !script_.fallback) throw ConfigError("mock: unscripted request (key '" + req.key + "')");

  const int n = req.params.n_samples;
  std::vector<Completion> out;
  out.reserve(static_cast<std::size_t>(n));
  std::lock_guard lock(mu_);
  const std::uint64_t end = tick_.fetch_add(1);
  for (int s = 0; s < n; ++s) {
    MockResponse r;
    std::string matched;
    if (hit) {
      const auto& e = script_.entries[*hit];
      // A seed-keyed entry already isolates its seed; other entries get one cursor per seed.
      auto& cur = cursors_[{*hit, seed_keyed ? std::nullopt : req.params.seed}];
      r = e.responses[cur % e.responses.size()];
      ++cur;
      matched = e.key.empty() ? e.pattern : e.key;
    } else {
      r = *script_.fallback;
      matched = "<fallback>";
    }
    out.push_back({r.text, r.finish});
    ledger_.push_back({next_ordinal_++, req.key, req.prompt, req.assistant_prefix, req.params, matched, start, end});
  }
  return out;
}

std::vector<LedgerEntry> MockModelClient::ledger() const {
  std::lock_guard lock(mu_);
  return ledger_;
}

std::size_t MockModelClient::request_count() const {
  std::lock_guard lock(mu_);
  return ledger_.size();
}

void MockModelClient::clear_ledger() {
  std::lock_guard lock(mu_);
  ledger_.clear();
}

std::unique_ptr<MockModelClient> mock_backend(MockScript script, std::string model_id, int max_concurrency) {
  return std::make_unique<MockModelClient>(std::move(script), std::move(model_id), max_concurrency);
}

}  // namespace tracemill::modelclient
