#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(KLAFATE_FIXTURES) / name;
}

class Gen {
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return rng_; }

private:
  std::mt19937_64 rng_;
};

inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("klafate-test-" + tag + "-" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace testsupport
