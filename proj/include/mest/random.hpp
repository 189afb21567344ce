#pragma once

#include <cstdint>
#include <initializer_list>

#include <Eigen/Dense>

namespace mest {

/// Stream purposes. Mixed into the key so that, e.g., the design stream and
/// the outcome stream for the same (seed, n) never overlap.
enum class Stream : std::uint64_t {
  kDesign = 0x11,
  kOutcomes = 0x12,
  kField = 0x13,
  kStarts = 0x14,
  kFloor = 0x15,
  kSlices = 0x16,
  kPoints = 0x17,
  kReference = 0x18,
  kSynthetic = 0x19,
};

std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based generator: output i is mix64(key + (i + 1) * golden), i.e. a
/// SplitMix64 stream whose start is a hash of the key tuple. Any (seed, n,
/// replication, ...) tuple addresses an independent stream, so results do not
/// depend on which thread draws what, or in which order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static CounterRng keyed(std::initializer_list<std::uint64_t> parts) noexcept;
  static CounterRng keyed(Stream stream, std::initializer_list<std::uint64_t> parts) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1), 53 bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal by inversion.
  double normal() noexcept;
  Eigen::VectorXd normal_vector(Eigen::Index n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mest
