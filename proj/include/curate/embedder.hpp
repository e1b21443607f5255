#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curate/error.hpp"
#include "curate/http.hpp"
#include "curate/text.hpp"
#include "curate/vecmath.hpp"

namespace curate {

// Maps text to a unit vector of fixed dimension. Implementations are
// deterministic per instance and safe to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;

  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
};

// Signed feature hashing of unigrams and bigrams. Stateless, no external deps.
class StubEmbedder final : public Embedder {
 public:
  explicit StubEmbedder(std::size_t dim, std::uint64_t salt = 0) : dim_(dim), salt_(salt) {
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "stub embedder dim must be >= 1");
  }

  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view text) const override {
    std::vector<double> v(dim_, 0.0);
    const auto tokens = tokenize(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add_feature(v, "u\x1f" + tokens[i]);
      if (i + 1 < tokens.size()) add_feature(v, "b\x1f" + tokens[i] + "\x1f" + tokens[i + 1]);
    }
    if (l2_norm(std::span<const double>(v)) == 0.0) {
      // no tokens, or every feature cancelled out
      add_feature(v, "\x1f<empty>");
    }
    return EmbeddingVector(l2_normalized(std::span<const double>(v)));
  }

 private:
  void add_feature(std::vector<double>& v, const std::string& feature) const {
    const std::uint64_t h = fnv1a64(feature, 0xcbf29ce484222325ULL ^ salt_);
    const std::size_t bucket = static_cast<std::size_t>(h % dim_);
    v[bucket] += (h >> 63) ? -1.0 : 1.0;
  }

  std::size_t dim_;
  std::uint64_t salt_;
};

// Embedding provider over HTTP:
//   POST url {"texts": [str]} -> {"embeddings": [[real]]}
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string url, std::size_t dim,
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(5000))
      : url_(http::parse_url(url)), dim_(dim), timeout_(timeout) {}

  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view text) const override {
    std::vector<std::string> one{std::string(text)};
    return std::move(embed_batch(one).front());
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override {
    nlohmann::json body;
    body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    const auto res = http::post_json(url_, body, timeout_);
    if (res.status != http::CallStatus::Ok) {
      throw Error(ErrorCode::EmbedderFailure, "embedding provider: " + res.detail);
    }
    std::vector<EmbeddingVector> out;
    try {
      const auto& rows = res.body.at("embeddings");
      if (rows.size() != texts.size()) {
        throw Error(ErrorCode::EmbedderFailure, "embedding count does not match request");
      }
      for (const auto& row : rows) {
        auto values = row.get<std::vector<double>>();
        if (values.size() != dim_) {
          throw Error(ErrorCode::EmbedderFailure,
                      "provider returned dim " + std::to_string(values.size()) +
                          ", expected " + std::to_string(dim_));
        }
        out.push_back(l2_normalize(EmbeddingVector(std::move(values))));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::EmbedderFailure, std::string("malformed provider reply: ") + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmbedderFailure) throw;
      throw Error(ErrorCode::EmbedderFailure, e.what());
    }
    return out;
  }

 private:
  http::Url url_;
  std::size_t dim_;
  std::chrono::milliseconds timeout_;
};

}  // namespace curate
