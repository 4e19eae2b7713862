#pragma once

#include "apollo/scheduler.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apollo {

// Byte-level tokenisation: token id = byte value.
std::vector<int> tokenize(std::string_view text);
std::string detokenize(std::span<const int> ids);

// Reads the file and splits it contiguously: the first `split` fraction of
// tokens for training, the rest for validation.
TokenCorpus tokenize_corpus(const std::filesystem::path& path, double split);

std::string read_file(const std::filesystem::path& path);

// Deterministic English-like prose from a small probabilistic grammar, used as
// a learnable character-level corpus when no real text is at hand.
std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed);

} // namespace apollo
