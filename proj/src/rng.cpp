#include "gwe/rng.hpp"

namespace gwe {

Engine SeedStream::engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32),
                      0x5eed5eedU};
    return Engine(seq);
}

std::uint64_t SeedStream::tree_seed() const {
    return mix64(mix64(master_seed ^ 0x7ee5eed000000001ULL) + stream_id);
}

SeedStream SeedStream::substream(std::uint64_t k) const {
    return {mix64(master_seed + 0x632be59bd9b4e019ULL * (stream_id + 1)), k};
}

}  // namespace gwe
