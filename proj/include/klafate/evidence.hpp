#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "klafate/error.hpp"

namespace klafate::evidence {

// Ordered set of hypothesis labels. Mass indices refer to label positions.
class Frame {
public:
  Frame() = default;
  explicit Frame(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& operator[](std::size_t i) const { return labels_[i]; }

  bool contains(std::string_view label) const noexcept;
  // Throws NotFound for labels outside the frame.
  std::size_t index_of(std::string_view label) const;

  bool operator==(const Frame&) const = default;

private:
  std::vector<std::string> labels_;
};

// Weighted masses over a frame plus the explicit overall uncertainty U.
// sum(masses) + uncertainty == 1 (within 1e-9).
struct MassVector {
  Frame frame;
  std::vector<double> masses;
  double uncertainty = 1.0;

  double total() const noexcept;
  // Masses followed by U, the array form published to operators.
  std::vector<double> as_array() const;

  bool operator==(const MassVector&) const = default;
};

inline constexpr int kDefaultApproximationExponent = 2;
inline constexpr int kMaxApproximationExponent = 15;
inline constexpr double kConservationTolerance = 1e-9;

/// Sensitivity-to-zero factor k = 1 - 10^-F for F in [1, 15].
double approximation_factor(int exponent);

/// Active label gets k, every other label (1-k)/(n-1). A one-label frame
/// gets mass 1 since there is nothing to spread to.
std::vector<double> spread_masses(const Frame& frame, std::string_view active_label, double k);

/// U = 1 - sum(m_j * w_j).
double weighted_uncertainty(std::span<const double> masses, std::span<const double> weights);

MassVector build_evidence(const Frame& frame, std::string_view active_label,
                          std::span<const double> weights,
                          int exponent = kDefaultApproximationExponent);

} // namespace klafate::evidence
