#pragma once

// HTTP surface for the web console: SSE stream of assessments and status,
// POST /event, GET /metrics, /status and /health.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <string>
#include <thread>

#include "klafate/backend/bus.hpp"
#include "klafate/backend/engine.hpp"

namespace httplib {
class Server;
}

namespace klafate::backend {

// Bounded fan-out buffer of bus messages for SSE connections.
class Broadcaster {
public:
  struct Message {
    std::uint64_t seq = 0;
    std::string event;
    std::string data;
  };

  explicit Broadcaster(std::size_t capacity = 256) : capacity_(capacity) {}

  void push(std::string event, std::string data);
  std::uint64_t head() const;
  // Messages with seq >= `from`; waits up to `timeout` when there are none.
  // Empty on timeout or close.
  std::vector<Message> wait_from(std::uint64_t from, std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Message> buffer_;
  std::size_t capacity_;
  std::uint64_t next_seq_ = 1;
  bool closed_ = false;
};

std::string sse_frame(std::string_view event, std::string_view data);

struct GatewayOptions {
  std::chrono::milliseconds reply_timeout{5000};
  std::chrono::milliseconds keepalive{15000};
};

class HttpGateway {
public:
  HttpGateway(ServiceRunner& runner, Bus& bus, GatewayOptions options = {});
  ~HttpGateway();
  HttpGateway(const HttpGateway&) = delete;
  HttpGateway& operator=(const HttpGateway&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);

private:
  void routes();
  Json ask(std::function<Json(const Engine&)> fn);

  ServiceRunner& runner_;
  Bus& bus_;
  GatewayOptions options_;
  std::unique_ptr<httplib::Server> server_;
  Broadcaster broadcaster_;
  std::uint64_t sub_assessment_ = 0;
  std::uint64_t sub_status_ = 0;
  std::thread thread_;
};

} // namespace klafate::backend
