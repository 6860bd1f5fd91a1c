#include <httplib.h>
#include <json.hpp>

#include "lnl/errors.hpp"
#include "lnl/review.hpp"

namespace lnl::review {

namespace {

void send_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
}

// Maps library exceptions onto HTTP status codes.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const RangeError& e) {
    send_error(res, 404, e.what());
  } catch (const DomainError& e) {
    send_error(res, 400, e.what());
  } catch (const ParseError& e) {
    send_error(res, 400, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument&) {
    send_error(res, 400, "malformed numeric parameter");
  } catch (const std::out_of_range&) {
    send_error(res, 400, "numeric parameter out of range");
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

std::string param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) throw DomainError(std::string("missing query parameter '") + name + "'");
  return req.get_param_value(name);
}

}  // namespace

struct ReviewServer::Impl {
  explicit Impl(ReviewService& s) : service(s) {}
  ReviewService& service;
  httplib::Server server;
};

ReviewServer::ReviewServer(ReviewService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& s = impl_->server;
  s.set_tcp_nodelay(true);

  s.Get("/session/:key/next", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(svc.next_assignment_json(req.path_params.at("key")), "application/json"); });
  });

  s.Get("/progress/:key", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(svc.progress_json(req.path_params.at("key")), "application/json"); });
  });

  s.Get("/palette", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { res.set_content(svc.palette_json(), "application/json"); });
  });

  s.Get("/render", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      RenderRequest r;
      r.token = param(req, "token");
      r.plane = plane_from_string(req.has_param("plane") ? req.get_param_value("plane") : "axial");
      r.index = std::stoll(param(req, "index"));
      if (req.has_param("wc")) r.window_center = std::stod(req.get_param_value("wc"));
      if (req.has_param("ww")) r.window_width = std::stod(req.get_param_value("ww"));
      const auto png = svc.render_png(r);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
  });

  s.Post("/rating", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto j = nlohmann::json::parse(req.body);
      const auto rec = svc.submit_rating(j.at("rater").get<std::string>(), j.at("token").get<std::string>(),
                                         j.at("level").get<int>(), j.at("score").get<double>(),
                                         j.value("time_on_case_s", 0.0));
      res.set_content(nlohmann::json{{"ok", true},
                                     {"token", rec.token},
                                     {"level", rec.level},
                                     {"score", rec.score},
                                     {"submitted_at", rec.submitted_at}}
                          .dump(),
                      "application/json");
    });
  });

  s.Get("/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (req.get_header_value("Authorization") != "Bearer " + svc.plan().admin_key) {
        send_error(res, 401, "export requires the admin key");
        return;
      }
      const auto u = req.has_param("unblind") ? req.get_param_value("unblind") : "0";
      const bool unblind = u == "1" || u == "true";
      res.set_content(svc.export_csv(unblind), "text/csv");
    });
  });
}

ReviewServer::~ReviewServer() = default;

int ReviewServer::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  // The library default enables SO_REUSEPORT, which lets a second server share the port.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  if (port == 0) {
    const int p = s.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!s.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void ReviewServer::listen_after_bind() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() { impl_->server.stop(); }

}  // namespace lnl::review
