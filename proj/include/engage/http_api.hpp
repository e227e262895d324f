#pragma once

// HTTP JSON binding of the coding service.
//
//   GET  /health
//   GET  /corpora                         POST /corpora
//   POST /corpora/{id}/filtered
//   POST /sessions                        GET  /sessions/{id}
//   GET  /sessions/{id}/next?coder=
//   GET  /sessions/{id}/items/{item}?context=
//   POST /sessions/{id}/annotations
//   GET  /sessions/{id}/progress
//   GET  /sessions/{id}/agreement?threshold=
//   GET  /sessions/{id}/export?format=json|tsv&set=all|adjudicated
//   POST /sessions/{id}/close
//   POST /sessions/{id}/adjudicate
//
// Failures answer {code, message, details} with a 4xx/5xx status. When a
// token is configured every API route requires a matching X-Auth-Token
// header; the static UI mount under /ui is public.

#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "engage/coding_service.hpp"
#include "engage/error.hpp"

namespace engage {

struct HttpOptions {
  std::string token;                    // empty: no authentication
  std::filesystem::path static_dir;     // empty or missing: no UI mount
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCorpus:
    case ErrorCode::UnknownFilteredSet:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownCoder:
    case ErrorCode::UnknownItem: return 404;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::ValidationFailed: return 422;
    case ErrorCode::SessionClosed:
    case ErrorCode::LeaseLost:
    case ErrorCode::DuplicateSubmission:
    case ErrorCode::NotDoubleCoded:
    case ErrorCode::NoUnits: return 409;
    case ErrorCode::IoFailure: return 500;
    default: return 400;
  }
}

namespace detail {

inline void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, const Error& e) { send_json(res, e.to_json(), http_status(e.code())); }

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, "request body is not valid JSON", {{"parse_error", e.what()}});
  }
}

template <class Fn>
httplib::Server::Handler guarded(const HttpOptions& opts, Fn fn) {
  return [token = opts.token, fn](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!token.empty() && req.get_header_value("X-Auth-Token") != token)
        throw Error(ErrorCode::Unauthorized, "missing or wrong X-Auth-Token header");
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::BadRequest, e.what()));
    } catch (const std::exception& e) {
      send_json(res, Error(ErrorCode::IoFailure, e.what()).to_json(), 500);
    }
  };
}

inline std::optional<std::size_t> size_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoul(req.get_param_value(name)));
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadRequest, std::string("query parameter '") + name + "' must be a nonnegative integer");
  }
}

}  // namespace detail

/// Registers every route on `server`. The service must outlive the server.
inline void install_routes(httplib::Server& server, CodingService& service, const HttpOptions& opts = {}) {
  using detail::guarded;
  using detail::send_json;
  using Req = httplib::Request;
  using Res = httplib::Response;

  server.Get("/health", [](const Req&, Res& res) { send_json(res, {{"status", "ok"}}); });

  server.Get("/corpora", guarded(opts, [&](const Req&, Res& res) { send_json(res, service.list_corpora()); }));
  server.Post("/corpora", guarded(opts, [&](const Req& req, Res& res) {
                send_json(res, service.add_corpus(detail::parse_body(req)), 201);
              }));
  server.Post(R"(/corpora/([^/]+)/filtered)", guarded(opts, [&](const Req& req, Res& res) {
                send_json(res, service.add_filtered(req.matches[1], detail::parse_body(req)), 201);
              }));

  server.Post("/sessions", guarded(opts, [&](const Req& req, Res& res) {
                send_json(res, service.create_session(detail::parse_body(req)), 201);
              }));
  server.Get(R"(/sessions/([^/]+))", guarded(opts, [&](const Req& req, Res& res) {
               send_json(res, service.get_session(req.matches[1]));
             }));
  server.Get(R"(/sessions/([^/]+)/next)", guarded(opts, [&](const Req& req, Res& res) {
               send_json(res, service.next_item(req.matches[1], req.get_param_value("coder")));
             }));
  server.Get(R"(/sessions/([^/]+)/items/([^/]+))", guarded(opts, [&](const Req& req, Res& res) {
               send_json(res, service.get_item(req.matches[1], req.matches[2], detail::size_param(req, "context")));
             }));
  server.Post(R"(/sessions/([^/]+)/annotations)", guarded(opts, [&](const Req& req, Res& res) {
                const auto ack = service.submit_annotation(req.matches[1], detail::parse_body(req));
                send_json(res, ack, ack.value("replayed", false) ? 200 : 201);
              }));
  server.Get(R"(/sessions/([^/]+)/progress)", guarded(opts, [&](const Req& req, Res& res) {
               send_json(res, service.progress(req.matches[1]));
             }));
  server.Get(R"(/sessions/([^/]+)/agreement)", guarded(opts, [&](const Req& req, Res& res) {
               double threshold = kDefaultOverlapThreshold;
               if (req.has_param("threshold")) {
                 try {
                   threshold = std::stod(req.get_param_value("threshold"));
                 } catch (const std::exception&) {
                   throw Error(ErrorCode::BadRequest, "threshold must be a number");
                 }
               }
               send_json(res, service.live_agreement(req.matches[1], threshold));
             }));
  server.Get(R"(/sessions/([^/]+)/export)", guarded(opts, [&](const Req& req, Res& res) {
               const std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
               const std::string set = req.has_param("set") ? req.get_param_value("set") : "all";
               if (set != "all" && set != "adjudicated")
                 throw Error(ErrorCode::BadRequest, "set must be 'all' or 'adjudicated'");
               const auto anns = service.annotations(req.matches[1], set == "adjudicated");
               if (format == "tsv") {
                 std::ostringstream out;
                 write_annotations_tsv(anns, out);
                 res.set_content(out.str(), "text/tab-separated-values");
               } else if (format == "json") {
                 nlohmann::json arr = nlohmann::json::array();
                 for (const auto& a : anns) arr.push_back(annotation_to_json(a));
                 send_json(res, {{"session_id", std::string(req.matches[1])}, {"set", set}, {"annotations", arr}});
               } else {
                 throw Error(ErrorCode::BadRequest, "format must be 'json' or 'tsv'");
               }
             }));
  server.Post(R"(/sessions/([^/]+)/close)", guarded(opts, [&](const Req& req, Res& res) {
                send_json(res, service.close_session(req.matches[1]));
              }));
  server.Post(R"(/sessions/([^/]+)/adjudicate)", guarded(opts, [&](const Req& req, Res& res) {
                send_json(res, service.adjudicate(req.matches[1], detail::parse_body(req)));
              }));

  if (!opts.static_dir.empty() && std::filesystem::is_directory(opts.static_dir)) {
    server.set_mount_point("/ui", opts.static_dir.string());
    server.Get("/", [](const Req&, Res& res) { res.set_redirect("/ui/"); });
  }
  server.set_error_handler([](const Req&, Res& res) {
    if (res.status == 404 && res.body.empty())
      send_json(res, Error(ErrorCode::BadRequest, "no such route").to_json(), 404);
  });
}

}  // namespace engage
