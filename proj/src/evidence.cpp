#include "klafate/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "klafate/error.hpp"

namespace klafate::evidence {

Frame::Frame(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) {
    throw InvalidParameter("frame needs at least one label");
  }
  std::set<std::string_view> seen;
  for (const auto& label : labels_) {
    if (label.empty()) {
      throw InvalidParameter("frame labels must be non-empty");
    }
    if (!seen.insert(label).second) {
      throw InvalidParameter("duplicate frame label '" + label + "'");
    }
  }
}

bool Frame::contains(std::string_view label) const noexcept {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t Frame::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw NotFound("label '" + std::string(label) + "' is not in the frame");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

double MassVector::total() const noexcept {
  return std::accumulate(masses.begin(), masses.end(), 0.0) + uncertainty;
}

std::vector<double> MassVector::as_array() const {
  std::vector<double> out(masses);
  out.push_back(uncertainty);
  return out;
}

double approximation_factor(int exponent) {
  if (exponent < 1 || exponent > kMaxApproximationExponent) {
    throw InvalidParameter("approximation exponent F must be in [1, " +
                           std::to_string(kMaxApproximationExponent) + "], got " +
                           std::to_string(exponent));
  }
  return 1.0 - std::pow(10.0, -exponent);
}

std::vector<double> spread_masses(const Frame& frame, std::string_view active_label, double k) {
  if (!(k > 0.0 && k < 1.0)) {
    throw InvalidParameter("approximation factor k must lie in (0,1)");
  }
  const std::size_t active = frame.index_of(active_label);
  const std::size_t n = frame.size();
  if (n == 1) {
    return {1.0};
  }
  std::vector<double> out(n, (1.0 - k) / static_cast<double>(n - 1));
  out[active] = k;
  return out;
}

double weighted_uncertainty(std::span<const double> masses, std::span<const double> weights) {
  if (masses.size() != weights.size()) {
    throw InvalidParameter("masses and weights differ in length");
  }
  double mass_sum = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    if (!(weights[j] >= 0.0 && weights[j] <= 1.0)) {
      throw InvalidParameter("weight " + std::to_string(j) + " outside [0,1]");
    }
    if (!(masses[j] >= 0.0 && masses[j] <= 1.0)) {
      throw InvalidParameter("mass " + std::to_string(j) + " outside [0,1]");
    }
    mass_sum += masses[j];
    weighted += masses[j] * weights[j];
  }
  if (std::abs(mass_sum - 1.0) > kConservationTolerance) {
    throw InvalidParameter("masses must sum to 1");
  }
  // Rounding can push 1 - sum a few ulps below zero when every weight is 1.
  return std::clamp(1.0 - weighted, 0.0, 1.0);
}

MassVector build_evidence(const Frame& frame, std::string_view active_label,
                          std::span<const double> weights, int exponent) {
  if (weights.size() != frame.size()) {
    throw InvalidParameter("expected one weight per frame label");
  }
  const double k = approximation_factor(exponent);
  const auto spread = spread_masses(frame, active_label, k);

  MassVector out;
  out.frame = frame;
  out.uncertainty = weighted_uncertainty(spread, weights);
  out.masses.resize(spread.size());
  for (std::size_t j = 0; j < spread.size(); ++j) {
    out.masses[j] = spread[j] * weights[j];
  }
  return out;
}

} // namespace klafate::evidence
