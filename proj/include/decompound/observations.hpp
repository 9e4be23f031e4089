#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace decompound {

/// Discretely observed increments: durations Delta_i, increments z_i, and
/// the index set I of segments whose increment is treated as nonzero. For
/// simulated data the zero test is exact floating equality (threshold 0);
/// ingested data may use a small |z| threshold instead.
struct ObservationSet {
  std::vector<double> durations;
  std::vector<double> increments;
  std::vector<std::size_t> nonzero;  // indices i with |z_i| > zero_threshold
  double zero_threshold = 0.0;

  std::size_t size() const { return durations.size(); }
  std::size_t nonzero_count() const { return nonzero.size(); }

  double total_time() const {
    double t = 0.0;
    for (const double d : durations) {
      t += d;
    }
    return t;
  }

  static ObservationSet from_increments(std::vector<double> durations,
                                        std::vector<double> increments,
                                        double zero_threshold = 0.0) {
    if (durations.size() != increments.size()) {
      throw std::invalid_argument(
          "ObservationSet: durations and increments must match");
    }
    if (durations.empty()) {
      throw std::invalid_argument("ObservationSet: empty observation set");
    }
    if (!(zero_threshold >= 0.0)) {
      throw std::invalid_argument(
          "ObservationSet: zero threshold must be nonnegative");
    }
    for (const double d : durations) {
      if (!(d > 0.0)) {
        throw std::invalid_argument(
            "ObservationSet: durations must be positive");
      }
    }
    ObservationSet obs;
    obs.durations = std::move(durations);
    obs.increments = std::move(increments);
    obs.zero_threshold = zero_threshold;
    for (std::size_t i = 0; i < obs.increments.size(); ++i) {
      if (std::fabs(obs.increments[i]) > zero_threshold) {
        obs.nonzero.push_back(i);
      }
    }
    return obs;
  }
};

/// Latent per-segment jump-type counts a_i = (n_i1, ..., n_iJ), stored for
/// the segments in ObservationSet::nonzero (in the same order). Every stored
/// row must have a positive total: a nonzero increment needs at least one
/// jump.
class AuxiliaryState {
 public:
  AuxiliaryState() = default;
  AuxiliaryState(std::size_t segment_count, std::size_t component_count)
      : component_count_(component_count),
        counts_(segment_count * component_count, 0) {}

  std::size_t segment_count() const {
    return component_count_ == 0 ? 0 : counts_.size() / component_count_;
  }
  std::size_t component_count() const { return component_count_; }

  std::span<std::uint32_t> row(std::size_t i) {
    return {counts_.data() + i * component_count_, component_count_};
  }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {counts_.data() + i * component_count_, component_count_};
  }

  std::uint32_t count(std::size_t i, std::size_t j) const {
    return counts_[i * component_count_ + j];
  }
  std::uint32_t& count(std::size_t i, std::size_t j) {
    return counts_[i * component_count_ + j];
  }

  /// n_i: jumps of all types on stored segment i.
  std::uint64_t segment_total(std::size_t i) const {
    std::uint64_t n = 0;
    for (const auto c : row(i)) {
      n += c;
    }
    return n;
  }

  /// s_j: jumps of type j summed over all segments.
  std::vector<std::uint64_t> type_totals() const {
    std::vector<std::uint64_t> s(component_count_, 0);
    for (std::size_t i = 0; i < segment_count(); ++i) {
      for (std::size_t j = 0; j < component_count_; ++j) {
        s[j] += count(i, j);
      }
    }
    return s;
  }

  /// s: total number of jumps across all types and segments.
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto c : counts_) {
      s += c;
    }
    return s;
  }

  void validate() const {
    for (std::size_t i = 0; i < segment_count(); ++i) {
      if (segment_total(i) == 0) {
        throw std::invalid_argument(
            "AuxiliaryState: stored segment with zero jump count");
      }
    }
  }

 private:
  std::size_t component_count_ = 0;
  std::vector<std::uint32_t> counts_;
};

}  // namespace decompound
