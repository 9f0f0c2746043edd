#include "klafate/backend/http.hpp"

#include "httplib.h"

namespace klafate::backend {

void Broadcaster::push(std::string event, std::string data) {
  {
    std::lock_guard lock(mutex_);
    buffer_.push_back({next_seq_++, std::move(event), std::move(data)});
    while (buffer_.size() > capacity_) buffer_.pop_front();
  }
  cv_.notify_all();
}

std::uint64_t Broadcaster::head() const {
  std::lock_guard lock(mutex_);
  return next_seq_;
}

std::vector<Broadcaster::Message> Broadcaster::wait_from(std::uint64_t from,
                                                         std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || next_seq_ > from; });
  std::vector<Message> out;
  if (closed_) return out;
  for (const auto& m : buffer_) {
    if (m.seq >= from) out.push_back(m);
  }
  return out;
}

void Broadcaster::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Broadcaster::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::string sse_frame(std::string_view event, std::string_view data) {
  std::string out = "event: ";
  out += event;
  out += "\ndata: ";
  out += data;
  out += "\n\n";
  return out;
}

namespace {

void cors(httplib::Response& res) {
  res.set_header("Access-Control-Allow-Origin", "*");
  res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  res.set_header("Access-Control-Allow-Headers", "Content-Type");
}

void send_json(httplib::Response& res, int status, const Json& body) {
  cors(res);
  res.status = status;
  res.set_content(dump(body), "application/json");
}

std::string event_name(std::string_view topic) {
  return topic == kTopicAssessment ? "assessment" : "status";
}

struct Stream {
  std::uint64_t cursor = 0;
  bool primed = false;
};

} // namespace

HttpGateway::HttpGateway(ServiceRunner& runner, Bus& bus, GatewayOptions options)
    : runner_(runner), bus_(bus), options_(options), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const std::string& topic, const std::string& payload) {
    broadcaster_.push(event_name(topic), payload);
  };
  sub_assessment_ = bus_.subscribe(std::string(kTopicAssessment), forward);
  sub_status_ = bus_.subscribe(std::string(kTopicStatus), forward);
  routes();
}

HttpGateway::~HttpGateway() {
  stop();
  bus_.unsubscribe(sub_assessment_);
  bus_.unsubscribe(sub_status_);
}

Json HttpGateway::ask(std::function<Json(const Engine&)> fn) {
  auto fut = runner_.query(std::move(fn));
  if (fut.wait_for(options_.reply_timeout) != std::future_status::ready) {
    throw Error("backend did not answer in time");
  }
  return fut.get();
}

void HttpGateway::routes() {
  auto& s = *server_;

  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    cors(res);
    res.status = 204;
  });

  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    try {
      Json j = ask([](const Engine& e) {
        Json h;
        h["status"] = "ok";
        h["phase"] = phase_name(e.session().phase);
        return h;
      });
      j["source_errors"] = runner_.source_errors();
      send_json(res, 200, j);
    } catch (const std::exception& ex) {
      send_json(res, 503, Json{{"status", "unavailable"}, {"error", ex.what()}});
    }
  });

  s.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
    try {
      send_json(res, 200, ask([](const Engine& e) { return e.status_json(wall_clock_now()); }));
    } catch (const std::exception& ex) {
      send_json(res, 503, Json{{"error", ex.what()}});
    }
  });

  s.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    try {
      Json j = ask([](const Engine& e) { return e.metrics_json(); });
      j["source_errors"] = runner_.source_errors();
      send_json(res, 200, j);
    } catch (const std::exception& ex) {
      send_json(res, 503, Json{{"error", ex.what()}});
    }
  });

  s.Post("/event", [this](const httplib::Request& req, httplib::Response& res) {
    UserEvent e;
    try {
      e = parse_user_event(req.body);
    } catch (const ProtocolError& ex) {
      send_json(res, 400, Json{{"ok", false}, {"error", ex.what()}});
      return;
    }
    auto fut = runner_.submit(e);
    if (fut.wait_for(options_.reply_timeout) != std::future_status::ready) {
      send_json(res, 503, Json{{"ok", false}, {"error", "backend did not answer in time"}});
      return;
    }
    const Reply r = fut.get();
    send_json(res, r.ok ? 200 : 409, to_json(r));
  });

  s.Get("/assessment", [this](const httplib::Request&, httplib::Response& res) {
    cors(res);
    res.set_header("Cache-Control", "no-cache");
    auto stream = std::make_shared<Stream>();
    stream->cursor = broadcaster_.head();
    res.set_chunked_content_provider(
        "text/event-stream", [this, stream](std::size_t, httplib::DataSink& sink) {
          if (!stream->primed) {
            stream->primed = true;
            Json initial;
            try {
              initial = ask([](const Engine& e) {
                Json j;
                j["assessment"] = e.assessment_json().value_or(Json(nullptr));
                j["status"] = e.status_json(wall_clock_now());
                return j;
              });
            } catch (const std::exception&) {
              return false;
            }
            std::string out;
            if (!initial["assessment"].is_null()) {
              out += sse_frame("assessment", dump(initial["assessment"]));
            }
            out += sse_frame("status", dump(initial["status"]));
            return sink.write(out.data(), out.size());
          }
          auto msgs = broadcaster_.wait_from(stream->cursor, options_.keepalive);
          if (broadcaster_.closed()) {
            sink.done();
            return true;
          }
          if (msgs.empty()) {
            static constexpr std::string_view ping = ": keepalive\n\n";
            return sink.write(ping.data(), ping.size());
          }
          std::string out;
          for (const auto& m : msgs) out += sse_frame(m.event, m.data);
          stream->cursor = msgs.back().seq + 1;
          return sink.write(out.data(), out.size());
        });
  });
}

int HttpGateway::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw ConfigurationError("cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw ConfigurationError("cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpGateway::listen(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) {
    throw ConfigurationError("cannot bind " + host + ":" + std::to_string(port));
  }
  server_->listen_after_bind();
}

void HttpGateway::stop() {
  broadcaster_.close();
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

} // namespace klafate::backend
