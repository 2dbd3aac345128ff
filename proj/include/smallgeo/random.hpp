#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <random>
#include <utility>

namespace smallgeo {

// Seeded generator passed explicitly to every stochastic routine.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions below are implemented here rather than taken
// from <random> because the standard distributions are implementation
// defined, and model files must not depend on which library built them.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal deviate (Box-Muller, second value cached).
    double normal();

    bool bernoulli(double p) { return uniform01() < p; }

    template <class RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        auto n = static_cast<std::size_t>(std::distance(first, last));
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = uniform_index(i);
            using std::swap;
            swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent child seed from a master seed and a stream tag
// (splitmix64 finalizer over the combination).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace smallgeo
