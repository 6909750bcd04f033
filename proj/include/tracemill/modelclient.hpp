#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracemill/corpus.hpp"

namespace tracemill::modelclient {

using json = nlohmann::json;
using corpus::ImageRef;

enum class FinishReason { Stop, Length };
std::string_view to_string(FinishReason f);
FinishReason parse_finish_reason(std::string_view s);

struct SamplingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 8192;
  int n_samples = 1;
  std::optional<std::int64_t> seed;

  /// Throws ConfigError when out of range.
  void validate() const;
  bool operator==(const SamplingParams&) const = default;
};

void to_json(json& j, const SamplingParams& p);
void from_json(const json& j, SamplingParams& p);

struct Completion {
  std::string text;
  FinishReason finish = FinishReason::Stop;
  bool operator==(const Completion&) const = default;
};

struct ChatRequest {
  std::string prompt;
  std::vector<ImageRef> images;
  // When set, the model continues this partial assistant turn instead of starting a new one.
  std::optional<std::string> assistant_prefix;
  SamplingParams params;
  // Routing key for scripted backends (normally the question id); not sent over the wire.
  std::string key;
};

/// Base client. complete() enforces the concurrency bound and the
/// exactly-n_samples postcondition; backends implement do_complete().
class ModelClient {
 public:
  ModelClient(std::string model_id, int max_concurrency);
  virtual ~ModelClient() = default;
  ModelClient(const ModelClient&) = delete;
  ModelClient& operator=(const ModelClient&) = delete;

  const std::string& model_id() const { return model_id_; }
  int max_concurrency() const { return max_concurrency_; }

  std::vector<Completion> complete(const ChatRequest& req);

 protected:
  virtual std::vector<Completion> do_complete(const ChatRequest& req) = 0;

 private:
  std::string model_id_;
  int max_concurrency_;
  std::counting_semaphore<1 << 16> slots_;
};

std::vector<Completion> complete(ModelClient& client, const std::string& prompt, std::span<const ImageRef> images,
                                 const SamplingParams& params, const std::string& key = {});

// ------------------------------------------------------------------ HTTP

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 500;
  int max_backoff_ms = 30000;
};

struct ClientConfig {
  std::string endpoint;      // full chat-completions URL, http:// or https://
  std::string model_id;
  std::string api_key_env;   // name of the environment variable; the value is read per request
  int max_concurrency = 8;
  RetryPolicy retry;
  int timeout_ms = 600000;
  std::filesystem::path debug_log;  // optional redacted request/response JSONL

  void validate() const;
};

void to_json(json& j, const ClientConfig& c);
void from_json(const json& j, ClientConfig& c);

/// OpenAI-style chat-completions client. Multi-sample requests use the `n`
/// field; when the server rejects n > 1 the client falls back to n single
/// requests (seed + i) and keeps doing so for its lifetime.
class HttpModelClient final : public ModelClient {
 public:
  explicit HttpModelClient(ClientConfig cfg);
  const ClientConfig& config() const { return cfg_; }

  /// Request body as sent on the wire (images inlined as base64 data URLs).
  json build_body(const ChatRequest& req, int n) const;
  static std::vector<Completion> parse_response(const json& body, int expected);

 protected:
  std::vector<Completion> do_complete(const ChatRequest& req) override;

 private:
  struct Reply {
    int status = 0;
    std::string body;
  };
  Reply post_with_retry(const json& body);
  void log_event(const json& row);

  ClientConfig cfg_;
  std::string host_;  // scheme://host[:port]
  std::string path_;
  std::atomic<bool> multi_sample_ok_{true};
  std::mutex log_mu_;
};

// ------------------------------------------------------------------ mock

struct MockResponse {
  std::string text;
  FinishReason finish = FinishReason::Stop;
};

struct MockEntry {
  std::string key;      // exact routing key, optionally "key@seed"
  std::string pattern;  // substring of the prompt; used when key is empty
  std::vector<MockResponse> responses;  // cycled with wrap-around
};

struct MockScript {
  std::vector<MockEntry> entries;
  std::optional<MockResponse> fallback;  // unscripted requests throw when absent
  int latency_ms = 0;
};

void to_json(json& j, const MockScript& s);
void from_json(const json& j, MockScript& s);

struct LedgerEntry {
  std::uint64_t ordinal = 0;  // one entry per returned sample, in issue order
  std::string key;
  std::string prompt;
  std::optional<std::string> assistant_prefix;
  SamplingParams params;
  std::string matched;  // entry key/pattern, or "<fallback>"
  std::uint64_t start_tick = 0;
  std::uint64_t end_tick = 0;
};

/// Deterministic offline backend. Lookup order for a request with seed s:
/// entry keyed "key@s", entry keyed "key", first entry whose pattern occurs
/// in the prompt, then the fallback. Each (entry, seed) pair keeps its own
/// cursor, so concurrent requests for different seeds cannot reorder each
/// other's responses.
class MockModelClient final : public ModelClient {
 public:
  explicit MockModelClient(MockScript script, std::string model_id = "mock", int max_concurrency = 1);

  std::vector<LedgerEntry> ledger() const;
  std::size_t request_count() const;
  void clear_ledger();
  /// Highest number of requests observed inside do_complete at once.
  int max_in_flight() const { return max_in_flight_.load(); }

 protected:
  std::vector<Completion> do_complete(const ChatRequest& req) override;

 private:
  MockScript script_;
  mutable std::mutex mu_;
  std::map<std::pair<std::size_t, std::optional<std::int64_t>>, std::size_t> cursors_;
  std::vector<LedgerEntry> ledger_;
  std::uint64_t next_ordinal_ = 0;
  std::atomic<std::uint64_t> tick_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

std::unique_ptr<MockModelClient> mock_backend(MockScript script, std::string model_id = "mock",
                                              int max_concurrency = 1);

/// Builds a client from endpoint config: {"kind": "mock", "script": {...} |
/// "script_path": "..."} or {"kind": "http", ...ClientConfig fields}.
/// Relative script paths resolve against base_dir.
std::unique_ptr<ModelClient> make_client(const json& cfg, const std::filesystem::path& base_dir = {});

// ------------------------------------------------------------- templates

enum class TemplateStyle { CoT, Direct, ThinkAnswerTags, BoxedCoT, LetterDirect };
std::string_view to_string(TemplateStyle s);

inline constexpr const char* kQuestionSlot = "{{question}}";

struct PromptTemplate {
  std::string template_id;
  std::string body;
  TemplateStyle style = TemplateStyle::CoT;

  /// Direct for LetterDirect/Direct, CoT otherwise.
  corpus::PromptStyle prompt_style() const;
};

class TemplateRegistry {
 public:
  /// The six shipped prompts: distill-cot-think, distill-r1-answer, eval-boxed,
  /// eval-letter-direct, eval-lingshu-boxed, eval-think-answer.
  static TemplateRegistry with_builtins();
  static const TemplateRegistry& builtins();

  /// Throws ConfigError on duplicate id or a body without exactly one slot.
  void add(PromptTemplate t);
  const PromptTemplate& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Question text followed by one "<letter>: <text>" line per option; images
/// are referenced positionally as "<image N>" lines ahead of the text.
std::string render_question_block(const corpus::Question& q);
std::string render(const PromptTemplate& t, const corpus::Question& q);

std::string base64_encode(std::string_view bytes);

}  // namespace tracemill::modelclient
