#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "scoreopt/tensor.hpp"

namespace scoreopt {

/// Seeded, stream-addressable random source. mt19937_64 output is fixed by
/// the standard, and the uniform/normal mappings below are explicit, so a
/// given (seed, stream) always yields the same draw sequence. Distribution
/// adapters from <random> are deliberately not used (their output is
/// implementation-defined).
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), eng_(mix(mix(seed) ^ stream)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; one spare is cached per stream.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Child stream id'd by `id`, independent of draws made on the child.
    RngStream substream(std::uint64_t id) const {
        return RngStream(seed_, mix(stream_ ^ mix(id + 1)));
    }

    /// Child stream keyed off the parent's state; advances the parent.
    RngStream spawn() { return RngStream(seed_, mix(stream_ ^ eng_())); }

  private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Tensor of i.i.d. standard normals.
inline Tensor gaussian(RngStream& rng, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

}  // namespace scoreopt
