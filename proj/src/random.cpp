#include "mest/random.hpp"

#include "mest/normal.hpp"

namespace mest {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng CounterRng::keyed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t k = 0x6A09E667F3BCC908ULL;
  std::uint64_t i = 0;
  for (std::uint64_t p : parts) {
    ++i;
    k = mix64(k ^ mix64(p + i * kGolden));
  }
  return CounterRng(k);
}

CounterRng CounterRng::keyed(Stream stream, std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t k = mix64(static_cast<std::uint64_t>(stream) * kGolden);
  std::uint64_t i = 0;
  for (std::uint64_t p : parts) {
    ++i;
    k = mix64(k ^ mix64(p + i * kGolden));
  }
  return CounterRng(k);
}

std::uint64_t CounterRng::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
}

double CounterRng::normal() noexcept { return normal_quantile(uniform()); }

Eigen::VectorXd CounterRng::normal_vector(Eigen::Index n) noexcept {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
  return z;
}

}  // namespace mest
