#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include "curate/error.hpp"
#include "curate/http.hpp"

namespace curate {

// Text generation by the protected model. The gateway only ever asks for
// completions; it has no way to alter the model.
class UpstreamClient {
 public:
  virtual ~UpstreamClient() = default;
  // Throws Error(UpstreamTimeout) or Error(UpstreamFailure).
  virtual std::string generate(const std::string& prompt) = 0;
  virtual std::size_t calls() const = 0;
};

//   POST url {"prompt": str, "max_tokens": int} -> {"text": str}
class HttpUpstreamClient final : public UpstreamClient {
 public:
  HttpUpstreamClient(const std::string& url, std::chrono::milliseconds timeout, int max_tokens)
      : url_(http::parse_url(url)), timeout_(timeout), max_tokens_(max_tokens) {}

  std::string generate(const std::string& prompt) override {
    calls_.fetch_add(1);
    const auto res =
        http::post_json(url_, {{"prompt", prompt}, {"max_tokens", max_tokens_}}, timeout_);
    if (res.status == http::CallStatus::Timeout) {
      throw Error(ErrorCode::UpstreamTimeout, "upstream did not answer within " +
                                                  std::to_string(timeout_.count()) + " ms");
    }
    if (res.status != http::CallStatus::Ok) throw Error(ErrorCode::UpstreamFailure, res.detail);
    if (!res.body.contains("text") || !res.body["text"].is_string()) {
      throw Error(ErrorCode::UpstreamFailure, "upstream reply has no \"text\" field");
    }
    return res.body["text"].get<std::string>();
  }

  std::size_t calls() const override { return calls_.load(); }

 private:
  http::Url url_;
  std::chrono::milliseconds timeout_;
  int max_tokens_;
  std::atomic<std::size_t> calls_{0};
};

// Canned responses for tests and offline evaluation.
class MockUpstream final : public UpstreamClient {
 public:
  using Responder = std::function<std::string(const std::string& prompt)>;

  explicit MockUpstream(std::string canned = "OK") : responder_([canned](const std::string&) {
    return canned;
  }) {}
  explicit MockUpstream(Responder responder) : responder_(std::move(responder)) {}

  std::string generate(const std::string& prompt) override {
    calls_.fetch_add(1);
    return responder_(prompt);
  }

  std::size_t calls() const override { return calls_.load(); }

 private:
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace curate
