#pragma once

#include <cstdint>
#include <random>

namespace gwe {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of the j-th child of a node; lazy and eager expansion see the same value.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t j) {
    return mix64(parent + 0x9e3779b97f4a7c15ULL * (j + 1));
}

// Small counter-based engine used for per-node draws.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

// Uniform on the open interval (0,1) from one 64-bit draw.
template <class Urbg>
inline double uniform_open(Urbg& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

using Engine = std::mt19937_64;

struct SeedStream {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    Engine engine() const;
    // Root seed for lazily grown trees; independent of engine().
    std::uint64_t tree_seed() const;
    SeedStream substream(std::uint64_t k) const;
};

}  // namespace gwe
