#pragma once

#include <cstdint>

namespace dualstudent {

/// Counter-based generator (Philox4x32-10). A draw is a pure function of
/// (seed, stream, counter), so child streams created with `derive` never
/// interfere with each other regardless of consumption order.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    /// Independent child stream keyed by `id`. Does not advance this stream.
    [[nodiscard]] Rng derive(std::uint64_t id) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box–Muller; consumes two draws.
    double normal() noexcept;
    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t counter() const noexcept { return counter_; }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

/// Stable 64-bit tag for a short ASCII label, used to name derived streams.
constexpr std::uint64_t stream_tag(const char* label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (; *label; ++label) {
        h ^= static_cast<unsigned char>(*label);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace dualstudent
