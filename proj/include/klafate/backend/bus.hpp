#pragma once

// In-process topic bus with MQTT-style filters: `+` matches one level,
// a trailing `#` matches the rest. Handlers run on the publishing thread.

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace klafate::backend {

bool topic_matches(std::string_view filter, std::string_view topic);

class Bus {
public:
  using Handler = std::function<void(const std::string& topic, const std::string& payload)>;

  std::uint64_t subscribe(std::string filter, Handler handler);
  void unsubscribe(std::uint64_t id);
  // Returns the number of handlers that received the message.
  std::size_t publish(const std::string& topic, const std::string& payload);

private:
  struct Subscription {
    std::uint64_t id;
    std::string filter;
    std::shared_ptr<Handler> handler;
  };
  std::mutex mutex_;
  std::vector<Subscription> subs_;
  std::uint64_t next_id_ = 1;
};

} // namespace klafate::backend
