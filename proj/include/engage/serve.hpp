#pragma once

// `engage serve`: the coding service behind cpp-httplib. Prints one JSON line
// {"listening": url} once the socket is bound, then blocks until SIGINT or
// SIGTERM.

#include <atomic>
#include <csignal>
#include <ostream>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "engage/coding_service.hpp"
#include "engage/error.hpp"
#include "engage/http_api.hpp"

namespace engage {

namespace detail {
inline std::atomic<httplib::Server*>& running_server() {
  static std::atomic<httplib::Server*> s{nullptr};
  return s;
}
extern "C" inline void stop_on_signal(int) {
  if (auto* s = running_server().load()) s->stop();
}
}  // namespace detail

inline int serve(const nlohmann::json& opts, std::ostream& out) {
  ServiceOptions so;
  so.data_dir = opts.at("store").get<std::string>();
  so.lease_ms = opts.value("lease_ms", kDefaultLeaseMs);
  so.snapshot_every = opts.value("snapshot_every", std::size_t{256});
  CodingService service(std::move(so));

  HttpOptions ho;
  ho.token = opts.value("token", std::string());
  ho.static_dir = opts.value("static_dir", std::string());
  httplib::Server server;
  install_routes(server, service, ho);

  const std::string host = opts.value("host", std::string("127.0.0.1"));
  int port = opts.value("port", 8080);
  if (port == 0) {
    port = server.bind_to_any_port(host);
  } else if (!server.bind_to_port(host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(ErrorCode::IoFailure, "cannot bind", {{"host", host}, {"port", opts.value("port", 8080)}});

  detail::running_server() = &server;
  std::signal(SIGINT, detail::stop_on_signal);
  std::signal(SIGTERM, detail::stop_on_signal);
  out << nlohmann::json{{"listening", "http://" + host + ":" + std::to_string(port)}}.dump() << std::endl;
  server.listen_after_bind();
  detail::running_server() = nullptr;
  return 0;
}

}  // namespace engage
