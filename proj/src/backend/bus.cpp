#include "klafate/backend/bus.hpp"

#include <algorithm>
#include <memory>

namespace klafate::backend {

namespace {

std::vector<std::string_view> levels(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto slash = s.find('/', pos);
    out.push_back(s.substr(pos, slash == std::string_view::npos ? s.npos : slash - pos));
    if (slash == std::string_view::npos) break;
    pos = slash + 1;
  }
  return out;
}

} // namespace

bool topic_matches(std::string_view filter, std::string_view topic) {
  const auto f = levels(filter);
  const auto t = levels(topic);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == "#") return i + 1 == f.size();
    if (i >= t.size()) return false;
    if (f[i] != "+" && f[i] != t[i]) return false;
  }
  return f.size() == t.size();
}

std::uint64_t Bus::subscribe(std::string filter, Handler handler) {
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  subs_.push_back({id, std::move(filter), std::make_shared<Handler>(std::move(handler))});
  return id;
}

void Bus::unsubscribe(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  std::erase_if(subs_, [id](const Subscription& s) { return s.id == id; });
}

std::size_t Bus::publish(const std::string& topic, const std::string& payload) {
  std::vector<std::shared_ptr<Handler>> targets;
  {
    std::lock_guard lock(mutex_);
    for (const auto& s : subs_) {
      if (topic_matches(s.filter, topic)) targets.push_back(s.handler);
    }
  }
  for (const auto& h : targets) (*h)(topic, payload);
  return targets.size();
}

} // namespace klafate::backend
