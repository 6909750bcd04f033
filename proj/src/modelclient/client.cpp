#include <openssl/evp.h>

#include <cmath>

#include "tracemill/modelclient.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::modelclient {

std::string_view to_string(FinishReason f) { return f == FinishReason::Stop ? "stop" : "length"; }

FinishReason parse_finish_reason(std::string_view s) {
  if (s == "length" || s == "max_tokens") return FinishReason::Length;
  return FinishReason::Stop;
}

void SamplingParams::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
}

void to_json(json& j, const SamplingParams& p) {
  j = json{{"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}, {"n_samples", p.n_samples}};
  j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
}

void from_json(const json& j, SamplingParams& p) {
  SamplingParams d;
  p.temperature = j.value("temperature", d.temperature);
  p.top_p = j.value("top_p", d.top_p);
  p.max_tokens = j.value("max_tokens", d.max_tokens);
  p.n_samples = j.value("n_samples", d.n_samples);
  if (auto it = j.find("seed"); it != j.end() && !it->is_null())
    p.seed = it->get<std::int64_t>();
  else
    p.seed.reset();
}

ModelClient::ModelClient(std::string model_id, int max_concurrency)
    : model_id_(std::move(model_id)), max_concurrency_(max_concurrency), slots_(std::max(1, max_concurrency)) {
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
}

std::vector<Completion> ModelClient::complete(const ChatRequest& req) {
  req.params.validate();
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1 << 16>& s;
    ~Release() { s.release(); }
  } release{slots_};
  auto out = do_complete(req);
  if (static_cast<int>(out.size()) != req.params.n_samples)
    throw ProtocolError("backend returned " + std::to_string(out.size()) + " completions, expected " +
                        std::to_string(req.params.n_samples));
  return out;
}

std::vector<Completion> complete(ModelClient& client, const std::string& prompt, std::span<const ImageRef> images,
                                 const SamplingParams& params, const std::string& key) {
  ChatRequest req;
  req.prompt = prompt;
  req.images.assign(images.begin(), images.end());
  req.params = params;
  req.key = key;
  return client.complete(req);
}

void ClientConfig::validate() const {
  if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0)
    throw ConfigError("endpoint must be an http(s) URL: '" + endpoint + "'");
  if (model_id.empty()) throw ConfigError("model_id is required");
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  if (retry.base_backoff_ms < 0 || retry.max_backoff_ms < 0) throw ConfigError("backoff must be >= 0");
  if (timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
}

void to_json(json& j, const ClientConfig& c) {
  j = json{{"kind", "http"},
           {"endpoint", c.endpoint},
           {"model_id", c.model_id},
           {"api_key_env", c.api_key_env},
           {"max_concurrency", c.max_concurrency},
           {"retry", {{"max_attempts", c.retry.max_attempts}, {"base_backoff_ms", c.retry.base_backoff_ms},
                      {"max_backoff_ms", c.retry.max_backoff_ms}}},
           {"timeout_ms", c.timeout_ms}};
  if (!c.debug_log.empty()) j["debug_log"] = c.debug_log.string();
}

void from_json(const json& j, ClientConfig& c) {
  ClientConfig d;
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.api_key_env = j.value("api_key_env", std::string{});
  c.max_concurrency = j.value("max_concurrency", d.max_concurrency);
  c.retry = d.retry;
  if (auto it = j.find("retry"); it != j.end()) {
    c.retry.max_attempts = it->value("max_attempts", d.retry.max_attempts);
    c.retry.base_backoff_ms = it->value("base_backoff_ms", d.retry.base_backoff_ms);
    c.retry.max_backoff_ms = it->value("max_backoff_ms", d.retry.max_backoff_ms);
  }
  c.timeout_ms = j.value("timeout_ms", d.timeout_ms);
  c.debug_log = j.value("debug_log", std::string{});
}

std::unique_ptr<ModelClient> make_client(const json& cfg, const std::filesystem::path& base_dir) {
  const std::string kind = cfg.value("kind", std::string("http"));
  try {
    if (kind == "mock") {
      MockScript script;
      if (auto it = cfg.find("script"); it != cfg.end()) {
        script = it->get<MockScript>();
      } else if (auto p = cfg.find("script_path"); p != cfg.end()) {
        std::filesystem::path path = p->get<std::string>();
        if (path.is_relative()) path = base_dir / path;
        script = util::read_json(path).get<MockScript>();
      } else {
        throw ConfigError("mock endpoint needs 'script' or 'script_path'");
      }
      return mock_backend(std::move(script), cfg.value("model_id", std::string("mock")),
                          cfg.value("max_concurrency", 1));
    }
    if (kind == "http") {
      ClientConfig c = cfg.get<ClientConfig>();
      if (!c.debug_log.empty() && c.debug_log.is_relative()) c.debug_log = base_dir / c.debug_log;
      return std::make_unique<HttpModelClient>(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("endpoint config: ") + e.what());
  }
  throw ConfigError("unknown endpoint kind '" + kind + "'");
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace tracemill::modelclient
