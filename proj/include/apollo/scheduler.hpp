#pragma once

#include "apollo/depth_maps.hpp"
#include "apollo/flops.hpp"
#include "apollo/model.hpp"
#include "apollo/optimizer.hpp"
#include "apollo/rng.hpp"
#include "apollo/samplers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace apollo {

// apollo:            bank grows by interpolation at stage boundaries; each step
//                    samples a depth in [N, L] and shares the bank over it.
// scratch:           full L-slot bank at depth L from the first step.
// stack_progressive: depth equals the bank size, no sharing or sampling;
//                    expansion by stacking.
enum class TrainMode { apollo, scratch, stack_progressive };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);

struct Stage {
    std::int64_t start_step;  // 1-based, inclusive
    int n_slots;
    bool operator==(const Stage&) const = default;
};

struct StageSchedule {
    std::vector<Stage> stages;
    std::int64_t total_steps = 0;
    int target_depth = 1;

    // First start_step is 1, start steps and slot counts strictly increase,
    // the last stage has target_depth slots.
    void validate() const;
    static StageSchedule single(std::int64_t total_steps, int depth);
};

struct StageInfo {
    int stage;  // 1-based
    int n_slots;
    bool operator==(const StageInfo&) const = default;
};

StageInfo stage_of(const StageSchedule& schedule, std::int64_t step);

struct StepRecord {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    int stage = 0;
    int n_slots = 0;
    int sampled_depth = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
    double grad_mean = 0.0;
    double grad_std = 0.0;
    std::uint64_t cum_flops = 0;
    double wall_ms = 0.0;
    bool halted = false;
};

class MetricSink {
public:
    virtual ~MetricSink() = default;
    virtual void record(const StepRecord& record) = 0;
};

class NullSink final : public MetricSink {
public:
    void record(const StepRecord&) override {}
};

class VectorSink final : public MetricSink {
public:
    void record(const StepRecord& r) override { records.push_back(r); }
    std::vector<StepRecord> records;
};

struct TrainOptions {
    TrainMode mode = TrainMode::apollo;
    SamplerSpec sampler;
    // Expansion at stage boundaries; stack_progressive callers normally use stack.
    MapKind expansion = MapKind::interpolation;
    AdamWConfig optimizer;
};

TrainOptions default_options(TrainMode mode);

struct TrainState {
    std::int64_t step = 0;  // last completed step
    int stage = 0;          // 0 before the first step
    WeightBank bank;
    CounterRng data_rng;
    CounterRng depth_rng;
    std::uint64_t cum_flops = 0;
};

// RNG stream ids derived from the run seed.
inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kDepthStream = 2;

TrainState make_train_state(const ModelConfig& config, const StageSchedule& schedule, TrainMode mode,
                            std::uint64_t seed);

// Virtual depth and layer map for the current step; draws from depth_rng in
// apollo mode only (one uniform per step).
struct StepPlan {
    int depth;
    LayerMap map;
};
StepPlan plan_step(TrainState& state, const TrainOptions& options);

// Map used for held-out evaluation of the current bank: full depth through
// interpolation in apollo mode, the bank itself otherwise.
LayerMap evaluation_map(const WeightBank& bank, TrainMode mode);

// One step of the progressive procedure: expand on stage change, sample a
// depth, forward/backward, AdamW on all slots and embeddings. A non-finite
// loss returns a record with halted = true and leaves the weights untouched.
StepRecord train_step(TrainState& state, const StageSchedule& schedule, const Batch& batch,
                      const TrainOptions& options);

struct TokenCorpus {
    std::vector<int> train;
    std::vector<int> val;
};

// `batch` windows of seq+1 tokens at random offsets (inputs and shifted targets).
Batch sample_batch(std::span<const int> ids, std::size_t batch, std::size_t seq, CounterRng& rng);

// Fixed evaluation slice: `samples` windows at evenly spaced offsets, grouped
// into batches of at most `chunk` rows.
std::vector<Batch> validation_batches(std::span<const int> ids, std::size_t samples, std::size_t seq,
                                      std::size_t chunk);

double evaluate(const WeightBank& bank, const LayerMap& map, std::span<const Batch> batches);

struct RunSpec {
    ModelConfig model;
    StageSchedule schedule;
    TrainOptions options;
    std::size_t batch_size = 16;
    std::int64_t eval_interval = 100;
    std::size_t val_samples = 500;
    std::int64_t steps_per_epoch = 1;
    std::uint64_t seed = 0;
};

struct TrainingResult {
    TrainState state;
    LossCurve curve;
    bool halted = false;
};

// Runs schedule.total_steps steps; evaluates before the first step, every
// eval_interval steps and after the last step. Stops early on a halted step.
TrainingResult run_training(const RunSpec& spec, const TokenCorpus& corpus, MetricSink& sink);

} // namespace apollo
