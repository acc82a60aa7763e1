#include "dynamoe/routing.hpp"

#include <doctest.h>

#include <cstdint>

using namespace dynamoe;

namespace {

// enumeration oracle: count bitmask subsets of {1..n} by popcount
std::uint64_t enumerate_subsets(int n, int k_min, int k_max) {
  std::uint64_t count = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const int bits = __builtin_popcount(mask);
    if (bits >= k_min && bits <= k_max) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("binomial against subset enumeration, n <= 16") {
  for (int n = 0; n <= 16; ++n) {
    for (int k = 0; k <= n; ++k) {
      CHECK(count_patterns_fixed(n, k) == enumerate_subsets(n, k, k));
    }
  }
  CHECK(count_patterns_fixed(8, 2) == 28);
  CHECK(count_patterns_fixed(12, 0) == 1);
  CHECK(count_patterns_fixed(12, 12) == 1);
  CHECK_THROWS_AS(count_patterns_fixed(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(count_patterns_fixed(65, 1), std::invalid_argument);
}

TEST_CASE("dynamic pattern counts against enumeration") {
  for (int n = 1; n <= 16; ++n) {
    for (int k_max = 1; k_max <= n; ++k_max) {
      CHECK(count_patterns_dynamic(n, k_max) == enumerate_subsets(n, 1, k_max));
    }
  }
  CHECK(count_patterns_dynamic(8, 3) == 92);
  CHECK(count_patterns_dynamic(13, 1) == 13);
}

TEST_CASE("dynamic dominates fixed and meets the diversity ratio bound") {
  for (int n = 2; n <= 16; ++n) {
    for (int k = 1; k <= n; ++k) {
      CHECK(count_patterns_dynamic(n, k) >= count_patterns_fixed(n, k));
    }
  }
  // N = 8, tau = 0.7: K_max = 3 vs fixed K = 2
  const double ratio = static_cast<double>(count_patterns_dynamic(8, 3)) /
                       static_cast<double>(count_patterns_fixed(8, 2));
  const double bound = static_cast<double>(count_patterns_fixed(8, 3)) /
                       static_cast<double>(count_patterns_fixed(8, 2));
  CHECK(ratio == doctest::Approx(92.0 / 28.0));
  CHECK(bound == doctest::Approx(2.0));
  CHECK(ratio >= bound);
}

TEST_CASE("large-n counts stay exact in 64 bits") {
  CHECK(count_patterns_fixed(64, 1) == 64);
  CHECK(count_patterns_fixed(64, 32) == 1832624140942590534ULL);
  // sum over all non-empty subsets of a 64-expert layer
  CHECK(count_patterns_dynamic(64, 64) == 0xFFFFFFFFFFFFFFFFULL);
}
