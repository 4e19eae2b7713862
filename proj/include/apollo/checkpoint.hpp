#pragma once

#include "apollo/model.hpp"
#include "apollo/rng.hpp"
#include "apollo/scheduler.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace apollo {

// Binary layout, all integers little-endian:
//
//   "APLO"                      4-byte magic
//   u32 version                 kCheckpointVersion
//   u32 x 7                     depth, d_model, n_heads, ffn_ratio, vocab_size, seq_len, norm (0 pre, 1 post)
//   u64 step, u32 stage, u64 cum_flops
//   u64 x 4                     data rng (key, counter), depth rng (key, counter)
//   u32 n_slots, u32 n_tensors
//   per tensor, in WeightBank::parameters() order:
//     u32 name length, name bytes
//     u32 rank, u32 x rank dims
//     u64 optimizer step count
//     f64 x size values, f64 x size first moments, f64 x size second moments
//
// f64 is the IEEE-754 binary64 bit pattern, so a round trip is bit-exact.
inline constexpr char kCheckpointMagic[4] = {'A', 'P', 'L', 'O'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    WeightBank bank;
    std::int64_t step = 0;
    int stage = 0;
    std::uint64_t cum_flops = 0;
    CounterRng data_rng;
    CounterRng depth_rng;

    static Checkpoint from_state(const TrainState& state);
    TrainState to_state() const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
// Throws FormatError on bad magic, unsupported version, truncation or
// inconsistent contents; nothing is returned unless the whole file parsed.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace apollo
