#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "curate/config.hpp"
#include "curate/embedder.hpp"
#include "curate/error.hpp"
#include "curate/forgetstore.hpp"
#include "curate/gate.hpp"
#include "curate/store_io.hpp"
#include "curate/trainer.hpp"
#include "curate/upstream.hpp"

namespace curate {

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace detail

struct LatencySummary {
  std::size_t n = 0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

// Keeps the most recent samples in a ring; quantiles are nearest-rank.
class LatencyTracker {
 public:
  explicit LatencyTracker(std::size_t window = 1 << 16) : samples_(window) {}

  void record(double ms) {
    std::lock_guard lock(mutex_);
    samples_[next_ % samples_.size()] = ms;
    ++next_;
  }

  LatencySummary summary() const {
    std::vector<double> v;
    {
      std::lock_guard lock(mutex_);
      const std::size_t n = std::min(next_, samples_.size());
      v.assign(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(n));
    }
    LatencySummary s;
    s.n = v.size();
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    auto rank = [&](double q) {
      const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
      return v[std::clamp<std::size_t>(i, 1, v.size()) - 1];
    };
    s.p50 = rank(0.50);
    s.p95 = rank(0.95);
    s.p99 = rank(0.99);
    s.max = v.back();
    return s;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<double> samples_;
  std::size_t next_ = 0;
};

struct ForgetResult {
  std::string id;
  double latency_ms = 0.0;
  double embed_ms = 0.0;
  double store_ms = 0.0;
};

struct QueryResult {
  GateAction action = GateAction::Answer;
  std::string response;
  std::optional<double> s_max;
  std::optional<std::string> matched_id;
  double threshold = 0.0;  // value read when the query started
  double latency_ms = 0.0;
};

struct ThresholdChange {
  double previous = 0.0;
  double current = 0.0;
};

struct GatewayStats {
  std::size_t count = 0;
  StoreVariant store_mode = StoreVariant::Exact;
  std::size_t dim = 0;
  std::size_t scored_rows = 0;
  double delta = 0.0;
  double uptime_s = 0.0;
  std::uint64_t forgets = 0;
  std::uint64_t queries = 0;
  std::uint64_t refusals = 0;
  std::uint64_t answers = 0;
  std::size_t upstream_calls = 0;
  LatencySummary forget_latency;
  LatencySummary query_latency;
};

inline nlohmann::json to_json(const LatencySummary& s) {
  return {{"n", s.n}, {"p50", s.p50}, {"p95", s.p95}, {"p99", s.p99}, {"max", s.max}};
}

inline nlohmann::json to_json(const GatewayStats& s) {
  return {{"count", s.count},
          {"store_mode", to_string(s.store_mode)},
          {"dim", s.dim},
          {"scored_rows", s.scored_rows},
          {"delta", s.delta},
          {"uptime_s", s.uptime_s},
          {"forgets", s.forgets},
          {"queries", s.queries},
          {"refusals", s.refusals},
          {"answers", s.answers},
          {"upstream_calls", s.upstream_calls},
          {"latency_ms", {{"forget", to_json(s.forget_latency)}, {"query", to_json(s.query_latency)}}}};
}

// The embed -> store -> retrieve -> threshold -> refuse pipeline. Holds only
// a text-generation client for the protected model.
class Gateway {
 public:
  Gateway(std::shared_ptr<const Embedder> embedder, std::shared_ptr<UpstreamClient> upstream,
          RefusalSet refusals, GateConfig gate,
          std::shared_ptr<ForgetStore> store = std::make_shared<ForgetStore>())
      : embedder_(std::move(embedder)),
        upstream_(std::move(upstream)),
        refusals_(std::move(refusals)),
        store_(std::move(store)),
        rng_seed_(gate.rng_seed),
        threshold_(gate.threshold),
        started_(std::chrono::steady_clock::now()) {
    gate.validate();
    if (!embedder_ || !upstream_ || !store_) {
      throw Error(ErrorCode::InvalidArgument, "gateway needs an embedder, upstream and store");
    }
    if (store_->count() > 0 && store_->dim() != embedder_->dim()) {
      throw Error(ErrorCode::DimensionMismatch, "loaded store dim does not match the embedder");
    }
  }

  // Returns once the record is visible to every query that starts afterwards.
  ForgetResult forget(const std::string& text) {
    if (trim(text).empty()) throw Error(ErrorCode::InvalidArgument, "forget text is empty");
    const auto t0 = std::chrono::steady_clock::now();
    const auto embedding = embed(text);
    const auto t1 = std::chrono::steady_clock::now();
    auto record = store_->add(text, embedding);
    ForgetResult r;
    r.id = std::move(record.id);
    r.embed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    r.store_ms = detail::elapsed_ms(t1);
    r.latency_ms = detail::elapsed_ms(t0);
    forgets_.fetch_add(1);
    forget_latency_.record(r.latency_ms);
    if (on_change_) on_change_();
    return r;
  }

  QueryResult query(const std::string& prompt) {
    if (trim(prompt).empty()) throw Error(ErrorCode::InvalidArgument, "prompt is empty");
    const auto t0 = std::chrono::steady_clock::now();
    QueryResult r;
    r.threshold = threshold_.load();
    const auto embedding = embed(prompt);
    const auto match = store_->max_similarity(embedding);
    std::mt19937_64 rng(rng_seed_ ^ (0x9e3779b97f4a7c15ULL * (request_seq_.fetch_add(1) + 1)));
    const auto decision = decide(match, GateConfig{r.threshold, rng_seed_}, refusals_, rng);
    r.action = decision.action;
    r.s_max = decision.s_max;
    r.matched_id = decision.matched_id;
    queries_.fetch_add(1);
    if (decision.action == GateAction::Refuse) {
      r.response = *decision.refusal_text;
      refusals_count_.fetch_add(1);
    } else {
      r.response = upstream_->generate(prompt);
      answers_.fetch_add(1);
    }
    r.latency_ms = detail::elapsed_ms(t0);
    query_latency_.record(r.latency_ms);
    return r;
  }

  ThresholdChange set_threshold(double delta) {
    if (!(delta >= 0.0 && delta <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "delta must be in [0, 1]");
    }
    return {threshold_.exchange(delta), delta};
  }

  double threshold() const { return threshold_.load(); }

  GatewayStats stats() const {
    GatewayStats s;
    s.count = store_->count();
    s.store_mode = store_->variant();
    s.dim = store_->dim() ? store_->dim() : embedder_->dim();
    s.scored_rows = store_->scored_rows();
    s.delta = threshold_.load();
    s.uptime_s = detail::elapsed_ms(started_) / 1000.0;
    s.forgets = forgets_.load();
    s.queries = queries_.load();
    s.refusals = refusals_count_.load();
    s.answers = answers_.load();
    s.upstream_calls = upstream_->calls();
    s.forget_latency = forget_latency_.summary();
    s.query_latency = query_latency_.summary();
    return s;
  }

  CompressionReport compress(const StoreMode& mode) {
    auto report = store_->compress(mode);
    if (on_change_) on_change_();
    return report;
  }

  ForgetStore& store() noexcept { return *store_; }
  const Embedder& embedder() const noexcept { return *embedder_; }
  UpstreamClient& upstream() noexcept { return *upstream_; }
  const RefusalSet& refusals() const noexcept { return refusals_; }

  // Called after every state change (used to schedule persistence).
  void set_change_listener(std::function<void()> fn) { on_change_ = std::move(fn); }

 private:
  EmbeddingVector embed(const std::string& text) const {
    try {
      auto v = embedder_->embed(text);
      if (v.dim() != embedder_->dim()) {
        throw Error(ErrorCode::EmbedderFailure, "embedder returned the wrong dimension");
      }
      return v;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmbedderFailure) throw;
      throw Error(ErrorCode::EmbedderFailure, e.what());
    }
  }

  std::shared_ptr<const Embedder> embedder_;
  std::shared_ptr<UpstreamClient> upstream_;
  RefusalSet refusals_;
  std::shared_ptr<ForgetStore> store_;
  std::uint64_t rng_seed_;
  std::atomic<double> threshold_;
  std::chrono::steady_clock::time_point started_;
  std::atomic<std::uint64_t> request_seq_{0};
  std::atomic<std::uint64_t> forgets_{0};
  std::atomic<std::uint64_t> queries_{0};
  std::atomic<std::uint64_t> refusals_count_{0};
  std::atomic<std::uint64_t> answers_{0};
  LatencyTracker forget_latency_;
  LatencyTracker query_latency_;
  std::function<void()> on_change_;
};

// Writes store snapshots on a background thread. Requests coalesce; at most
// one write per interval, plus a final one on flush().
class StorePersister {
 public:
  StorePersister(const ForgetStore& store, std::filesystem::path path,
                 std::chrono::milliseconds interval)
      : store_(store), path_(std::move(path)), interval_(interval), thread_([this] { run(); }) {}

  ~StorePersister() { flush(); }

  void request() {
    {
      std::lock_guard lock(mutex_);
      dirty_ = true;
    }
    cv_.notify_one();
  }

  // Stops the writer after persisting any pending change.
  void flush() {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
      stopping_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
  }

  std::size_t writes() const { return writes_.load(); }
  std::optional<std::string> last_error() const {
    std::lock_guard lock(mutex_);
    return last_error_;
  }

 private:
  void run() {
    std::unique_lock lock(mutex_);
    for (;;) {
      cv_.wait(lock, [this] { return dirty_ || stopping_; });
      if (!stopping_) cv_.wait_for(lock, interval_, [this] { return stopping_; });
      const bool write = dirty_;
      dirty_ = false;
      const bool stop = stopping_;
      lock.unlock();
      if (write) write_snapshot();
      lock.lock();
      if (stop && !dirty_) return;
    }
  }

  void write_snapshot() {
    try {
      // export_state copies under the store's writer lock; the file write
      // happens without it.
      std::vector<io::Section> sections{{"STORE", io::encode_store(store_.export_state())}};
      io::save_container(path_, sections);
      writes_.fetch_add(1);
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      last_error_ = e.what();
    }
  }

  const ForgetStore& store_;
  std::filesystem::path path_;
  std::chrono::milliseconds interval_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool dirty_ = false;
  bool stopping_ = false;
  std::atomic<std::size_t> writes_{0};
  std::optional<std::string> last_error_;
  std::thread thread_;
};

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
      return 400;
    case ErrorCode::EmbedderFailure:
    case ErrorCode::UpstreamFailure:
      return 502;
    case ErrorCode::UpstreamTimeout:
      return 504;
    case ErrorCode::StoreFull:
      return 507;
    case ErrorCode::InsufficientData:
      return 409;
    default:
      return 500;
  }
}

// HTTP/1.1 JSON front end for a Gateway.
class GatewayServer {
 public:
  GatewayServer(std::shared_ptr<Gateway> gateway, int worker_threads = 8, int max_in_flight = 64)
      : gateway_(std::move(gateway)), max_in_flight_(max_in_flight) {
    const auto threads = static_cast<std::size_t>(std::max(1, worker_threads));
    // Connections queue without a cap; the in-flight counter sheds load with 503.
    server_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    routes();
  }

  ~GatewayServer() { stop(); }

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    port_ = bound;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Blocks until stop() is called from another thread or a signal handler.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  Gateway& gateway() noexcept { return *gateway_; }

 private:
  using Handler = std::function<nlohmann::json(const nlohmann::json&)>;

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, const std::string& code,
                          const std::string& message) {
    reply(res, status, {{"error", code}, {"message", message}});
  }

  httplib::Server::Handler wrap(Handler handler, bool needs_body) {
    return [this, handler = std::move(handler), needs_body](const httplib::Request& req,
                                                            httplib::Response& res) {
      struct InFlight {
        std::atomic<int>& n;
        ~InFlight() { n.fetch_sub(1); }
      } guard{in_flight_};
      if (in_flight_.fetch_add(1) >= max_in_flight_) {
        reply_error(res, 503, "Overloaded", "too many requests in flight");
        return;
      }
      nlohmann::json body = nlohmann::json::object();
      if (needs_body) {
        try {
          body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
          reply_error(res, 400, "ParseError", "request body is not valid JSON");
          return;
        }
        if (!body.is_object()) {
          reply_error(res, 400, "ParseError", "request body must be a JSON object");
          return;
        }
      }
      try {
        reply(res, 200, handler(body));
      } catch (const Error& e) {
        reply_error(res, http_status_for(e.code()), std::string(to_string(e.code())), e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, "Internal", e.what());
      }
    };
  }

  static std::string required_string(const nlohmann::json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_string()) {
      throw Error(ErrorCode::InvalidArgument, std::string("\"") + key + "\" must be a string");
    }
    return body[key].get<std::string>();
  }

  void routes() {
    server_.Post("/v1/forget", wrap([this](const nlohmann::json& body) {
      const auto r = gateway_->forget(required_string(body, "text"));
      return nlohmann::json{{"id", r.id}, {"latency_ms", r.latency_ms},
                            {"embed_ms", r.embed_ms}, {"store_ms", r.store_ms}};
    }, true));

    server_.Post("/v1/query", wrap([this](const nlohmann::json& body) {
      const auto r = gateway_->query(required_string(body, "prompt"));
      nlohmann::json out{{"action", to_string(r.action)}, {"response", r.response},
                         {"s_max", nullptr}, {"matched_id", nullptr},
                         {"delta", r.threshold}, {"latency_ms", r.latency_ms}};
      if (r.s_max) out["s_max"] = *r.s_max;
      if (r.matched_id) out["matched_id"] = *r.matched_id;
      return out;
    }, true));

    server_.Get("/v1/stats", wrap([this](const nlohmann::json&) {
      return to_json(gateway_->stats());
    }, false));

    server_.Post("/v1/threshold", wrap([this](const nlohmann::json& body) {
      if (!body.contains("delta") || !body["delta"].is_number()) {
        throw Error(ErrorCode::InvalidArgument, "\"delta\" must be a number");
      }
      const auto change = gateway_->set_threshold(body["delta"].get<double>());
      return nlohmann::json{{"previous", change.previous}, {"current", change.current}};
    }, true));

    server_.Post("/v1/compress", wrap([this](const nlohmann::json& body) {
      StoreMode mode;
      mode.variant = parse_store_variant(body.value("mode", std::string("compressed")));
      mode.pca_dim = body.value("pca_dim", std::size_t{32});
      mode.keep_ratio = body.value("keep_ratio", 0.1);
      mode.rng_seed = body.value("rng_seed", std::uint64_t{0});
      const auto r = gateway_->compress(mode);
      return nlohmann::json{{"mode", to_string(r.variant)}, {"records", r.records},
                            {"stored_rows", r.stored_rows}, {"dim", r.dim}, {"k", r.k},
                            {"exact_bytes", r.exact_bytes},
                            {"compressed_bytes", r.compressed_bytes}, {"ratio", r.ratio}};
    }, true));
  }

  std::shared_ptr<Gateway> gateway_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  int max_in_flight_;
  std::atomic<int> in_flight_{0};
};

// Wires components from a validated configuration.
struct Service {
  std::shared_ptr<Gateway> gateway;
  std::unique_ptr<StorePersister> persister;
};

inline std::shared_ptr<const Embedder> make_embedder(const ServiceConfig& c) {
  std::shared_ptr<const Embedder> base;
  if (c.embedder_url.empty()) {
    base = std::make_shared<StubEmbedder>(static_cast<std::size_t>(c.embedder_dim));
  } else {
    base = std::make_shared<RemoteEmbedder>(c.embedder_url, static_cast<std::size_t>(c.embedder_dim),
                                            std::chrono::milliseconds(c.embedder_timeout_ms));
  }
  if (c.head_path.empty()) return base;
  return std::make_shared<ComposedEmbedder>(base, io::load_head(c.head_path));
}

inline std::shared_ptr<UpstreamClient> make_upstream(const ServiceConfig& c) {
  if (c.upstream_url.empty()) return std::make_shared<MockUpstream>(c.mock_response);
  return std::make_shared<HttpUpstreamClient>(
      c.upstream_url, std::chrono::milliseconds(c.upstream_timeout_ms), c.max_tokens);
}

inline Service make_service(const ServiceConfig& c) {
  if (const auto v = c.violations(); !v.empty()) {
    throw Error(ErrorCode::ValidationError, v.front());
  }
  auto embedder = make_embedder(c);
  auto refusals = c.refusal_file.empty() ? RefusalSet::defaults() : io::load_refusals(c.refusal_file);
  std::shared_ptr<ForgetStore> store;
  if (!c.store_path.empty() && std::filesystem::exists(c.store_path)) {
    store = io::load_store(c.store_path, c.store_capacity);
  } else {
    store = std::make_shared<ForgetStore>(c.store_capacity);
  }
  Service s;
  s.gateway = std::make_shared<Gateway>(embedder, make_upstream(c), std::move(refusals),
                                        GateConfig{c.delta, c.rng_seed}, std::move(store));
  if (c.store_mode != "exact" && s.gateway->store().variant() == StoreVariant::Exact &&
      s.gateway->store().count() >= 2) {
    StoreMode mode;
    mode.variant = parse_store_variant(c.store_mode);
    mode.pca_dim = static_cast<std::size_t>(c.pca_dim);
    mode.keep_ratio = c.keep_ratio;
    mode.rng_seed = c.rng_seed;
    s.gateway->compress(mode);
  }
  if (!c.store_path.empty()) {
    s.persister = std::make_unique<StorePersister>(
        s.gateway->store(), c.store_path, std::chrono::milliseconds(c.persist_interval_ms));
    s.gateway->set_change_listener([p = s.persister.get()] { p->request(); });
  }
  return s;
}

}  // namespace curate
