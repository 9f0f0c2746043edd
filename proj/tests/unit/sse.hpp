#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace testsupport {

struct Frame {
  std::string event;
  nlohmann::ordered_json data;
};

// Splits an SSE byte stream into frames; comments are skipped.
class SseParser {
public:
  std::vector<Frame> feed(std::string_view chunk) {
    buf_ += chunk;
    std::vector<Frame> out;
    std::size_t end;
    while ((end = buf_.find("\n\n")) != std::string::npos) {
      const auto block = buf_.substr(0, end);
      buf_.erase(0, end + 2);
      Frame f;
      std::size_t pos = 0;
      bool any = false;
      while (pos < block.size()) {
        auto nl = block.find('\n', pos);
        if (nl == std::string::npos) nl = block.size();
        const auto line = block.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.starts_with("event: ")) f.event = line.substr(7);
        if (line.starts_with("data: ")) {
          f.data = nlohmann::ordered_json::parse(line.substr(6));
          any = true;
        }
      }
      if (any) out.push_back(std::move(f));
    }
    return out;
  }

private:
  std::string buf_;
};

} // namespace testsupport
