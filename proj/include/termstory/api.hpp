#pragma once

// JSON-over-HTTP surface of the session service. `Api::handle` is a pure
// dispatcher over (method, path, query, body) so it can be tested without
// sockets; `serve` binds it to an HTTP listener.

#include <functional>
#include <map>
#include <string>

#include "termstory/error.hpp"

namespace termstory {

class SessionService;

inline constexpr int kApiVersion = 1;

struct ApiRequest {
  std::string method;
  /// Decoded path, e.g. "/sessions/abc/terms".
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

int http_status(ErrorCode code);

class Api {
 public:
  explicit Api(SessionService& service) : service_(service) {}

  /// Never throws: failures become {"v":1,"error":{"code","message"}}.
  ApiResponse handle(const ApiRequest& req) const;

 private:
  ApiResponse route(const ApiRequest& req) const;

  SessionService& service_;
};

/// Filled in by `serve` before it binds. While `serve` runs, calling `stop`
/// from another thread makes it return.
struct ServeHandle {
  std::function<void()> stop;
};

/// Blocks serving `api` on host:port. `on_listen` runs once the socket is
/// bound with the actual port (useful with port 0).
void serve(const Api& api, const std::string& host, int port, const std::function<void(int)>& on_listen = {},
           ServeHandle* handle = nullptr);

}  // namespace termstory
