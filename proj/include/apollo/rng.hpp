#pragma once

#include <cstdint>

namespace apollo {

// Counter-based generator ("splitmix64-ctr"): draw i of stream (seed, stream)
// is splitmix64's finaliser applied to a key derived from the seed and stream
// plus i times the golden-ratio increment. The full state is (key, counter),
// so a checkpoint can resume the exact sequence.
class CounterRng {
public:
    static constexpr const char* kName = "splitmix64-ctr";

    CounterRng() = default;
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    // Standard normal via Box-Muller; consumes two draws.
    double normal();
    // Uniform integer in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }
    static CounterRng from_state(std::uint64_t key, std::uint64_t counter);

    bool operator==(const CounterRng&) const = default;

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

} // namespace apollo
