#pragma once

#include <cstdint>
#include <random>

namespace tailbound {

// Deterministic stream of uniforms addressed by (seed, stream_id).
//
// Streams with distinct ids are statistically independent for practical
// purposes (mt19937_64 seeded through seed_seq over both words), and every
// consumer in the library draws from its own stream id, so results are
// reproducible bit-for-bit regardless of thread count or call interleaving.
//
// The uniform mapping is spelled out explicitly instead of going through
// std::uniform_real_distribution, whose output is implementation-defined and
// would silently break cross-toolchain reproducibility of stored runs.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id) {
        std::seed_seq seq{
            static_cast<std::uint32_t>(seed & 0xffffffffu),
            static_cast<std::uint32_t>(seed >> 32),
            static_cast<std::uint32_t>(stream_id & 0xffffffffu),
            static_cast<std::uint32_t>(stream_id >> 32),
        };
        gen_.seed(seq);
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on the open interval (0, 1): top 53 bits, then centered on the
    // grid so 0.0 and 1.0 are unreachable.  Safe to pass to log() or to
    // inverse-tail transforms without edge-case guards.
    double uniform01() {
        const std::uint64_t x = gen_();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 gen_;
};

// Stream-id layout: each subsystem owns a disjoint block of ids, and chunked
// parallel work adds the chunk index within the block.  Keeping these in one
// place guarantees no two consumers ever share a stream.
namespace stream_domain {
inline constexpr std::uint64_t cycles  = 1ull << 32;
inline constexpr std::uint64_t lindley = 2ull << 32;
inline constexpr std::uint64_t paths   = 3ull << 32;
inline constexpr std::uint64_t drift   = 4ull << 32;
inline constexpr std::uint64_t scratch = 5ull << 32;
}  // namespace stream_domain

}  // namespace tailbound
