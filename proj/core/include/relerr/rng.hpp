#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace relerr {

// Philox4x32-10 block function (Salmon et al., Random123). Pure function of
// (counter, key); every generated value is addressable without state.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Sequential view over the Philox stream identified by (seed, stream).
///
/// Draw i of a stream is a fixed function of (seed, stream, i), so a port in
/// another language reproduces the same numbers by implementing Philox4x32-10
/// and the conversions below:
///  - u64: block counter = (i/2 low, i/2 high, stream low, stream high),
///    key = (seed low, seed high); word pair (2*(i%2), 2*(i%2)+1) as lo|hi<<32.
///  - uniform(): (u64 >> 11) * 2^-53, in [0, 1).
///  - normal(): Box-Muller cosine branch from two open-interval uniforms.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() noexcept;
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    // Uniform integer in [0, bound) by rejection; bound must be positive.
    std::uint64_t index(std::uint64_t bound) noexcept;

    std::uint64_t position() const noexcept { return position_; }

private:
    double open_uniform() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
};

// Mixes a base seed with a task index so parallel tasks get disjoint keys.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t task) noexcept;

}  // namespace relerr
