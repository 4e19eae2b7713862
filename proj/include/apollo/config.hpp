#pragma once

#include "apollo/model.hpp"
#include "apollo/optimizer.hpp"
#include "apollo/samplers.hpp"
#include "apollo/scheduler.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apollo {

// Run configuration read from a flat `section.key = value` file. '#' starts a
// comment; unknown keys and malformed values raise ConfigError naming the key.
struct RunConfig {
    ModelConfig model;
    SamplerSpec sampler;
    std::vector<int> schedule_slots;        // schedule.slots
    std::vector<double> boundary_epochs;    // schedule.boundary_epochs, one per stage after the first
    AdamWConfig optimizer;
    std::filesystem::path corpus;           // data.corpus, relative to the config file
    double split = 0.9;                     // data.split
    std::size_t batch_size = 16;            // data.batch_size
    std::size_t val_samples = 500;          // data.val_samples
    std::uint64_t seed = 0;                 // run.seed
    double epochs = 1.0;                    // run.epochs
    std::optional<std::int64_t> total_steps;  // run.total_steps, overrides epochs
    std::int64_t eval_interval = 100;       // run.eval_interval
    std::filesystem::path out_dir = "out";  // run.out_dir
    TrainMode mode = TrainMode::apollo;     // run.mode
    std::optional<int> half_depth;          // expand.half_depth
    int histogram_bins = 40;                // expand.histogram_bins
};

// Every accepted key, in documentation order.
const std::vector<std::string>& config_keys();

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Static checks that need no data: value ranges, schedule shape, file existence.
void validate_run_config(const RunConfig& config);

// floor(train_tokens / (batch_size * seq_len)); ConfigError when zero.
std::int64_t steps_per_epoch(const RunConfig& config, std::size_t train_tokens);

std::int64_t total_steps(const RunConfig& config, std::int64_t steps_per_epoch);

// Stage boundaries land on the first step after `epoch` full epochs:
// start = floor(epoch * steps_per_epoch) + 1.
StageSchedule build_schedule(const RunConfig& config, std::int64_t steps_per_epoch);

RunSpec make_run_spec(const RunConfig& config, const TokenCorpus& corpus);

} // namespace apollo
