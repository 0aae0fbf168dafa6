#include <httplib.h>

#include "termstory/api.hpp"

namespace termstory {

void serve(const Api& api, const std::string& host, int port, const std::function<void(int)>& on_listen,
           ServeHandle* handle) {
  httplib::Server server;
  if (handle) handle->stop = [&server] { server.stop(); };
  auto dispatch = [&api](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    const ApiResponse out = api.handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Put(".*", dispatch);
  server.Delete(".*", dispatch);
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  if (on_listen) on_listen(bound);
  server.listen_after_bind();
}

}  // namespace termstory
