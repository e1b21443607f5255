#pragma once

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curate/error.hpp"
#include "curate/forgetstore.hpp"
#include "curate/text.hpp"

namespace curate {

// Service settings. The config file is a single JSON object whose keys are
// the field names below; environment variables CURATE_<KEY> (upper case)
// and command-line flags override it, in that order.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  double delta = 0.8;
  std::uint64_t rng_seed = 0;

  std::string embedder_url;  // empty: in-process stub embedder
  int embedder_dim = 256;
  int embedder_timeout_ms = 10000;
  std::string head_path;     // optional trained projection head

  std::string upstream_url;  // empty: canned mock upstream
  int upstream_timeout_ms = 30000;
  int max_tokens = 256;
  std::string mock_response = "OK";

  std::string refusal_file;  // empty: built-in refusal phrases
  std::string store_path;    // empty: in-memory only
  std::string store_mode = "exact";
  int pca_dim = 32;
  double keep_ratio = 0.1;
  std::uint64_t store_capacity = ForgetStore::kDefaultCapacity;

  int worker_threads = 8;
  int max_in_flight = 64;
  int persist_interval_ms = 1000;

  nlohmann::json to_json() const {
    return {{"host", host},
            {"port", port},
            {"delta", delta},
            {"rng_seed", rng_seed},
            {"embedder_url", embedder_url},
            {"embedder_dim", embedder_dim},
            {"embedder_timeout_ms", embedder_timeout_ms},
            {"head_path", head_path},
            {"upstream_url", upstream_url},
            {"upstream_timeout_ms", upstream_timeout_ms},
            {"max_tokens", max_tokens},
            {"mock_response", mock_response},
            {"refusal_file", refusal_file},
            {"store_path", store_path},
            {"store_mode", store_mode},
            {"pca_dim", pca_dim},
            {"keep_ratio", keep_ratio},
            {"store_capacity", store_capacity},
            {"worker_threads", worker_threads},
            {"max_in_flight", max_in_flight},
            {"persist_interval_ms", persist_interval_ms}};
  }

  // Every violation, not just the first.
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (!(delta >= 0.0 && delta <= 1.0)) v.push_back("delta must be in [0, 1]");
    if (port < 0 || port > 65535) v.push_back("port must be in [0, 65535]");
    if (host.empty()) v.push_back("host must not be empty");
    if (embedder_dim < 1) v.push_back("embedder_dim must be >= 1");
    if (embedder_timeout_ms < 1) v.push_back("embedder_timeout_ms must be >= 1");
    if (upstream_timeout_ms < 1) v.push_back("upstream_timeout_ms must be >= 1");
    if (max_tokens < 1) v.push_back("max_tokens must be >= 1");
    if (store_mode != "exact" && store_mode != "compressed" && store_mode != "clustered") {
      v.push_back("store_mode must be exact, compressed or clustered");
    }
    if (pca_dim < 1) v.push_back("pca_dim must be >= 1");
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) v.push_back("keep_ratio must be in (0, 1]");
    if (store_capacity < 1) v.push_back("store_capacity must be >= 1");
    if (worker_threads < 1) v.push_back("worker_threads must be >= 1");
    if (max_in_flight < 1) v.push_back("max_in_flight must be >= 1");
    if (persist_interval_ms < 0) v.push_back("persist_interval_ms must be >= 0");
    return v;
  }
};

namespace detail {

inline bool assign_field(ServiceConfig& c, const std::string& key, const nlohmann::json& value,
                         std::vector<std::string>& errors) {
  // Strings (from env or flags) are converted according to the field type.
  auto as_string = [&](std::string& out) {
    if (value.is_string()) {
      out = value.get<std::string>();
    } else {
      errors.push_back(key + " must be a string");
    }
  };
  auto as_int = [&](auto& out) {
    using T = std::remove_reference_t<decltype(out)>;
    if (value.is_number_integer() || value.is_number_unsigned()) {
      if (value.is_number_unsigned()) {
        out = static_cast<T>(value.get<std::uint64_t>());
      } else {
        const auto v = value.get<std::int64_t>();
        if (std::is_unsigned_v<T> && v < 0) {
          errors.push_back(key + " must not be negative");
          return;
        }
        out = static_cast<T>(v);
      }
      return;
    }
    if (value.is_string()) {
      const auto s = trim(value.get<std::string>());
      T parsed{};
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), parsed);
      if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) {
        out = parsed;
        return;
      }
    }
    errors.push_back(key + " must be an integer (got " + value.dump() + ")");
  };
  auto as_real = [&](double& out) {
    if (value.is_number()) {
      out = value.get<double>();
      return;
    }
    if (value.is_string()) {
      const auto s = trim(value.get<std::string>());
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(s.c_str(), &end);
      if (!s.empty() && end == s.c_str() + s.size() && errno == 0) {
        out = v;
        return;
      }
    }
    errors.push_back(key + " must be a number (got " + value.dump() + ")");
  };

  if (key == "host") as_string(c.host);
  else if (key == "port") as_int(c.port);
  else if (key == "delta") as_real(c.delta);
  else if (key == "rng_seed") as_int(c.rng_seed);
  else if (key == "embedder_url") as_string(c.embedder_url);
  else if (key == "embedder_dim") as_int(c.embedder_dim);
  else if (key == "embedder_timeout_ms") as_int(c.embedder_timeout_ms);
  else if (key == "head_path") as_string(c.head_path);
  else if (key == "upstream_url") as_string(c.upstream_url);
  else if (key == "upstream_timeout_ms") as_int(c.upstream_timeout_ms);
  else if (key == "max_tokens") as_int(c.max_tokens);
  else if (key == "mock_response") as_string(c.mock_response);
  else if (key == "refusal_file") as_string(c.refusal_file);
  else if (key == "store_path") as_string(c.store_path);
  else if (key == "store_mode") as_string(c.store_mode);
  else if (key == "pca_dim") as_int(c.pca_dim);
  else if (key == "keep_ratio") as_real(c.keep_ratio);
  else if (key == "store_capacity") as_int(c.store_capacity);
  else if (key == "worker_threads") as_int(c.worker_threads);
  else if (key == "max_in_flight") as_int(c.max_in_flight);
  else if (key == "persist_interval_ms") as_int(c.persist_interval_ms);
  else return false;
  return true;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const auto defaults = ServiceConfig{}.to_json();
  for (const auto& [k, v] : defaults.items()) keys.push_back(k);
  return keys;
}

// CURATE_<KEY> variables from the process environment.
inline std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> env;
  for (const auto& key : config_keys()) {
    std::string name = "CURATE_" + key;
    for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* v = std::getenv(name.c_str())) env[key] = v;
  }
  return env;
}

// Precedence: flags > env > file > defaults. `file` may be empty (no file).
inline ServiceConfig load_config(const std::optional<std::filesystem::path>& file,
                                 const std::map<std::string, std::string>& env,
                                 const std::map<std::string, std::string>& flags) {
  ServiceConfig c;
  std::vector<std::string> errors;
  if (file && !file->empty()) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + file->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, file->string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::ParseError, file->string() + ": expected an object");
    for (const auto& [key, value] : j.items()) {
      if (!detail::assign_field(c, key, value, errors)) errors.push_back("unknown key '" + key + "'");
    }
  }
  for (const auto* layer : {&env, &flags}) {
    for (const auto& [key, value] : *layer) {
      if (!detail::assign_field(c, key, nlohmann::json(value), errors)) {
        errors.push_back("unknown key '" + key + "'");
      }
    }
  }
  for (auto& v : c.violations()) errors.push_back(std::move(v));
  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " invalid setting(s): ";
    for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "; " : "") + errors[i];
    throw Error(ErrorCode::ValidationError, msg);
  }
  return c;
}

}  // namespace curate
