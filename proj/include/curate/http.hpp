#pragma once

#include <chrono>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "curate/error.hpp"

namespace curate::http {

struct Url {
  std::string scheme = "http";
  std::string host;
  int port = 80;
  std::string path = "/";

  std::string origin() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

// Accepts http://host[:port][/path]. No TLS.
inline Url parse_url(const std::string& text) {
  Url url;
  std::string rest = text;
  if (const auto p = rest.find("://"); p != std::string::npos) {
    url.scheme = rest.substr(0, p);
    rest = rest.substr(p + 3);
  }
  if (url.scheme != "http") {
    throw Error(ErrorCode::InvalidArgument, "unsupported URL scheme in '" + text + "'");
  }
  std::string authority = rest;
  if (const auto slash = rest.find('/'); slash != std::string::npos) {
    authority = rest.substr(0, slash);
    url.path = rest.substr(slash);
  }
  if (const auto colon = authority.rfind(':'); colon != std::string::npos) {
    url.host = authority.substr(0, colon);
    try {
      url.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad port in URL '" + text + "'");
    }
  } else {
    url.host = authority;
  }
  if (url.host.empty()) throw Error(ErrorCode::InvalidArgument, "empty host in URL '" + text + "'");
  return url;
}

enum class CallStatus { Ok, Timeout, ConnectionFailed, HttpError, BadBody };

struct CallResult {
  CallStatus status = CallStatus::Ok;
  int http_status = 0;
  nlohmann::json body;
  std::string detail;
};

// POST a JSON body and parse a JSON reply. Never throws on transport failure.
inline CallResult post_json(const Url& url, const nlohmann::json& body,
                            std::chrono::milliseconds timeout) {
  httplib::Client client(url.host, url.port);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  CallResult out;
  auto res = client.Post(url.path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    out.status = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                     ? CallStatus::Timeout
                     : CallStatus::ConnectionFailed;
    out.detail = httplib::to_string(err);
    return out;
  }
  out.http_status = res->status;
  try {
    out.body = res->body.empty() ? nlohmann::json::object() : nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    out.status = CallStatus::BadBody;
    out.detail = e.what();
    return out;
  }
  if (res->status / 100 != 2) {
    out.status = CallStatus::HttpError;
    out.detail = "HTTP " + std::to_string(res->status);
  }
  return out;
}

inline CallResult get_json(const Url& url, std::chrono::milliseconds timeout) {
  httplib::Client client(url.host, url.port);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);

  CallResult out;
  auto res = client.Get(url.path);
  if (!res) {
    out.status = CallStatus::ConnectionFailed;
    out.detail = httplib::to_string(res.error());
    return out;
  }
  out.http_status = res->status;
  try {
    out.body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    out.status = CallStatus::BadBody;
    out.detail = e.what();
    return out;
  }
  if (res->status / 100 != 2) {
    out.status = CallStatus::HttpError;
    out.detail = "HTTP " + std::to_string(res->status);
  }
  return out;
}

}  // namespace curate::http
