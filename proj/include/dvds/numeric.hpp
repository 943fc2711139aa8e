#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

namespace dvds {

/// Pairwise summation in index order. The recursion splits at fixed points,
/// so the result depends only on the input sequence.
double pairwise_sum(std::span<const double> values) noexcept;
double mean(std::span<const double> values) noexcept;

/// Standard normal quantile z_p and density.
double normal_quantile(double p);
double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;

/// 64-bit generator with platform-independent draws. std distributions are
/// implementation-defined, so variates are produced here from raw mt19937_64
/// output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0,1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Marsaglia polar method).
  double normal() noexcept;
  /// Uniform integer in [0, bound), unbiased via rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Counter-based seed derivation (splitmix64 finalizer of seed ⊕ stream).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// processed exactly once; callers write results into per-index slots.
/// After all workers join, the exception from the lowest failing index is
/// rethrown, so error reporting does not depend on scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace dvds
