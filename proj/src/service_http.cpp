#include <atomic>
#include <string>
#include <thread>

#include <httplib.h>

#include "bagscan/error.hpp"
#include "bagscan/graph_io.hpp"
#include "bagscan/service.hpp"

namespace bagscan {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  send_json(res, http_status(kind), {{"error", std::string(to_string(kind))}, {"message", message}});
}

QueryOptions query_options(const httplib::Request& req) {
  QueryOptions options;
  if (req.has_param("method")) {
    const std::string m = req.get_param_value("method");
    if (!m.empty() && m != "auto") options.method = parse_method(m);
  }
  if (req.has_param("cold")) {
    const std::string c = req.get_param_value("cold");
    options.cold = c == "true" || c == "1";
  }
  return options;
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed JSON body: ") + e.what());
  }
}

// Runs `body`, mapping library errors onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, e.kind(), e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorKind::Internal, e.what());
  }
}

}  // namespace

struct HttpService::Impl {
  explicit Impl(ServiceConfig config) : sessions(std::move(config)) { routes(); }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        AttackGraph graph = graph_from_json(parse_body(req));
        auto session = sessions.create(std::move(graph));
        send_json(res, 201, {{"id", session->id()}, {"nodes", session->current_graph().size()}});
      });
    });
    server.Get(R"(/sessions/([^/]+)/beliefs)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions.find(req.matches[1])->beliefs(query_options(req))); });
    });
    server.Put(R"(/sessions/([^/]+)/evidence)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto session = sessions.find(req.matches[1]);
        send_json(res, 200, session->set_evidence(parse_body(req), query_options(req)));
      });
    });
    server.Post(R"(/sessions/([^/]+)/patches)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto session = sessions.find(req.matches[1]);
        send_json(res, 200, session->add_patch(parse_body(req), query_options(req)));
      });
    });
    server.Delete(R"(/sessions/([^/]+)/patches)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions.find(req.matches[1])->clear_patches(query_options(req))); });
    });
    server.Get(R"(/sessions/([^/]+)/graph)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions.find(req.matches[1])->graph_json()); });
    });
    server.Get(R"(/sessions/([^/]+)/feasibility)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, sessions.find(req.matches[1])->feasibility()); });
    });
    server.Get(R"(/sessions/([^/]+)/iterations)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto session = sessions.find(req.matches[1]);
        QueryOptions options = query_options(req);
        const Method method = options.method.value_or(Method::PLbp);
        if (method != Method::PLbp && method != Method::SLbp) {
          throw Error(ErrorKind::InvalidArgument, "iteration streams need method=plbp or slbp");
        }
        const bool cold = options.cold;
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [session, method, cold](std::size_t, httplib::DataSink& sink) {
              auto write = [&sink](const std::string& event, const nlohmann::json& data) {
                const std::string chunk = "event: " + event + "\ndata: " + data.dump() + "\n\n";
                return sink.write(chunk.data(), chunk.size());
              };
              try {
                const nlohmann::json final =
                    session->stream_iterations(method, cold, [&](const nlohmann::json& it) {
                      return write("iteration", it);
                    });
                if (!final.is_null()) write("done", final);
              } catch (const Error& e) {
                write("error", {{"error", std::string(to_string(e.kind()))},
                                {"status", http_status(e.kind())},
                                {"message", e.what()}});
              }
              sink.done();
              return true;
            });
      });
    });
  }

  SessionManager sessions;
  httplib::Server server;
  std::thread worker;
};

HttpService::HttpService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorKind::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpService::run(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

SessionManager& HttpService::sessions() noexcept { return impl_->sessions; }

}  // namespace bagscan
