#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>

#include "tracemill/modelclient.hpp"
#include "tracemill/util/error.hpp"
#include "tracemill/util/jsonl.hpp"

namespace tracemill::modelclient {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/png";
}

bool retriable_status(int status) { return status == 408 || status == 429 || status >= 500; }

int backoff_ms(const RetryPolicy& p, int attempt) {
  thread_local std::mt19937 rng{std::random_device{}()};
  double base = static_cast<double>(p.base_backoff_ms) * std::pow(2.0, attempt - 1);
  base = std::min(base, static_cast<double>(p.max_backoff_ms));
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  return static_cast<int>(base * jitter(rng));
}

std::string content_text(const json& content) {
  if (content.is_string()) return content.get<std::string>();
  if (content.is_null()) return {};
  std::string out;
  if (content.is_array())
    for (const auto& part : content)
      if (part.value("type", std::string{}) == "text") out += part.value("text", std::string{});
  return out;
}

// Image payloads are elided from debug logs; they are large and not useful there.
json redact_body(json body) {
  if (!body.contains("messages")) return body;
  for (auto& m : body["messages"]) {
    if (!m.contains("content") || !m["content"].is_array()) continue;
    for (auto& part : m["content"])
      if (part.value("type", std::string{}) == "image_url") part["image_url"]["url"] = "<elided>";
  }
  return body;
}

}  // namespace

HttpModelClient::HttpModelClient(ClientConfig cfg) : ModelClient(cfg.model_id, cfg.max_concurrency), cfg_(std::move(cfg)) {
  cfg_.validate();
  std::tie(host_, path_) = split_url(cfg_.endpoint);
}

json HttpModelClient::build_body(const ChatRequest& req, int n) const {
  json user_content = json::array();
  for (const auto& img : req.images) {
    std::string bytes = util::read_file(img.path_or_uri);
    user_content.push_back({{"type", "image_url"},
                            {"image_url", {{"url", "data:" + mime_for(img.path_or_uri) + ";base64," + base64_encode(bytes)}}}});
  }
  user_content.push_back({{"type", "text"}, {"text", req.prompt}});

  json messages = json::array({{{"role", "user"}, {"content", std::move(user_content)}}});
  json body = {{"model", cfg_.model_id},
               {"messages", std::move(messages)},
               {"temperature", req.params.temperature},
               {"top_p", req.params.top_p},
               {"max_tokens", req.params.max_tokens},
               {"n", n}};
  if (req.params.seed) body["seed"] = *req.params.seed;
  if (req.assistant_prefix) {
    body["messages"].push_back({{"role", "assistant"}, {"content", *req.assistant_prefix}});
    body["continue_final_message"] = true;
    body["add_generation_prompt"] = false;
  }
  return body;
}

std::vector<Completion> HttpModelClient::parse_response(const json& body, int expected) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array())
    throw ProtocolError("response has no choices array");
  const auto& choices = body["choices"];
  if (static_cast<int>(choices.size()) != expected)
    throw ProtocolError("response has " + std::to_string(choices.size()) + " choices, expected " + std::to_string(expected));
  std::vector<Completion> out;
  for (const auto& c : choices) {
    if (!c.contains("message") || !c["message"].is_object()) throw ProtocolError("choice without message");
    const auto& msg = c["message"];
    Completion comp;
    comp.text = content_text(msg.value("content", json(nullptr)));
    // Reasoning endpoints return the chain of thought separately; fold it back into a think block.
    for (const char* key : {"reasoning_content", "reasoning"}) {
      if (auto it = msg.find(key); it != msg.end() && it->is_string() && !it->get<std::string>().empty()) {
        comp.text = "<think>" + it->get<std::string>() + "</think>" + comp.text;
        break;
      }
    }
    const auto fr = c.value("finish_reason", json(nullptr));
    comp.finish = fr.is_string() ? parse_finish_reason(fr.get<std::string>()) : FinishReason::Stop;
    out.push_back(std::move(comp));
  }
  return out;
}

void HttpModelClient::log_event(const json& row) {
  if (cfg_.debug_log.empty()) return;
  std::lock_guard lock(log_mu_);
  util::JsonlAppender(cfg_.debug_log).append(row);
}

HttpModelClient::Reply HttpModelClient::post_with_retry(const json& body) {
  const std::string payload = body.dump();
  std::vector<std::string> attempts;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    httplib::Client cli(host_);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    log_event({{"event", "request"}, {"model", cfg_.model_id}, {"attempt", attempt}, {"body", redact_body(body)}});
    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res) {
      attempts.push_back("attempt " + std::to_string(attempt) + ": " + httplib::to_string(res.error()));
    } else {
      log_event({{"event", "response"}, {"model", cfg_.model_id}, {"attempt", attempt}, {"status", res->status}});
      if (!retriable_status(res->status)) return {res->status, res->body};
      attempts.push_back("attempt " + std::to_string(attempt) + ": HTTP " + std::to_string(res->status));
    }
    if (attempt < cfg_.retry.max_attempts)
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms(cfg_.retry, attempt)));
  }
  throw TransportError(cfg_.endpoint + ": giving up after " + std::to_string(attempts.size()) + " attempts", attempts);
}

std::vector<Completion> HttpModelClient::do_complete(const ChatRequest& req) {
  const int n = req.params.n_samples;
  auto run_one = [&](const json& body, int expected) {
    Reply r = post_with_retry(body);
    if (r.status != 200) return std::pair<Reply, std::vector<Completion>>{r, {}};
    json parsed;
    try {
      parsed = json::parse(r.body);
    } catch (const json::parse_error& e) {
      throw ProtocolError(std::string("malformed response body: ") + e.what());
    }
    return std::pair<Reply, std::vector<Completion>>{r, parse_response(parsed, expected)};
  };

  if (n > 1 && multi_sample_ok_.load()) {
    auto [reply, out] = run_one(build_body(req, n), n);
    if (reply.status == 200) return out;
    if (reply.status != 400 && reply.status != 422)
      throw TransportError(cfg_.endpoint + ": HTTP " + std::to_string(reply.status), {reply.body});
    multi_sample_ok_.store(false);
  }

  std::vector<Completion> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ChatRequest single = req;
    single.params.n_samples = 1;
    if (req.params.seed) single.params.seed = *req.params.seed + i;
    auto [reply, got] = run_one(build_body(single, 1), 1);
    if (reply.status != 200)
      throw TransportError(cfg_.endpoint + ": HTTP " + std::to_string(reply.status), {reply.body});
    out.push_back(std::move(got.front()));
  }
  return out;
}

}  // namespace tracemill::modelclient
