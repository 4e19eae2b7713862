#include "apollo/scheduler.hpp"

#include "apollo/error.hpp"
#include "apollo/expansion.hpp"

#include <chrono>
#include <cmath>

namespace apollo {

std::string to_string(TrainMode mode) {
    switch (mode) {
    case TrainMode::apollo: return "apollo";
    case TrainMode::scratch: return "scratch";
    case TrainMode::stack_progressive: return "stack_progressive";
    }
    return "?";
}

TrainMode parse_train_mode(const std::string& text) {
    if (text == "apollo") return TrainMode::apollo;
    if (text == "scratch") return TrainMode::scratch;
    if (text == "stack_progressive" || text == "stack-progressive") return TrainMode::stack_progressive;
    throw InvalidArgument("unknown mode '" + text + "' (expected apollo, scratch or stack_progressive)");
}

void StageSchedule::validate() const {
    if (stages.empty()) throw InvalidArgument("schedule has no stages");
    if (total_steps < 1) throw InvalidArgument("schedule needs at least one step");
    if (stages.front().start_step != 1) throw InvalidArgument("first stage must start at step 1");
    for (std::size_t i = 1; i < stages.size(); ++i) {
        if (stages[i].start_step <= stages[i - 1].start_step)
            throw InvalidArgument("stage start steps must strictly increase (stage " + std::to_string(i + 1) + ")");
        if (stages[i].n_slots <= stages[i - 1].n_slots)
            throw InvalidArgument("stage slot counts must strictly increase (stage " + std::to_string(i + 1) + ")");
    }
    if (stages.front().n_slots < 1) throw InvalidArgument("stage slot counts must be >= 1");
    if (stages.back().n_slots != target_depth)
        throw InvalidArgument("last stage has " + std::to_string(stages.back().n_slots) + " slots, target depth is " +
                              std::to_string(target_depth));
}

StageSchedule StageSchedule::single(std::int64_t total_steps, int depth) {
    return {{{1, depth}}, total_steps, depth};
}

StageInfo stage_of(const StageSchedule& schedule, std::int64_t step) {
    if (step < 1 || step > schedule.total_steps)
        throw InvalidArgument("step " + std::to_string(step) + " outside [1, " + std::to_string(schedule.total_steps) + "]");
    int index = 0;
    for (std::size_t i = 0; i < schedule.stages.size(); ++i)
        if (schedule.stages[i].start_step <= step) index = static_cast<int>(i);
    return {index + 1, schedule.stages[static_cast<std::size_t>(index)].n_slots};
}

TrainOptions default_options(TrainMode mode) {
    TrainOptions o;
    o.mode = mode;
    o.expansion = mode == TrainMode::stack_progressive ? MapKind::stack : MapKind::interpolation;
    return o;
}

TrainState make_train_state(const ModelConfig& config, const StageSchedule& schedule, TrainMode mode,
                            std::uint64_t seed) {
    schedule.validate();
    if (schedule.target_depth != config.depth)
        throw InvalidArgument("schedule target depth " + std::to_string(schedule.target_depth) +
                              " differs from model depth " + std::to_string(config.depth));
    const int slots = mode == TrainMode::scratch ? config.depth : schedule.stages.front().n_slots;
    TrainState state;
    state.bank = init_bank(config, slots, seed);
    state.data_rng = CounterRng(seed, kDataStream);
    state.depth_rng = CounterRng(seed, kDepthStream);
    return state;
}

StepPlan plan_step(TrainState& state, const TrainOptions& options) {
    const int n = state.bank.n_slots();
    const int target = state.bank.config.depth;
    switch (options.mode) {
    case TrainMode::apollo: {
        const int depth = sample_depth(options.sampler.pmf(n, target), state.depth_rng);
        return {depth, map_interpolation(n, depth)};
    }
    case TrainMode::scratch:
    case TrainMode::stack_progressive: return {n, map_identity(n)};
    }
    throw InvalidArgument("unknown train mode");
}

LayerMap evaluation_map(const WeightBank& bank, TrainMode mode) {
    if (mode == TrainMode::apollo) return map_interpolation(bank.n_slots(), bank.config.depth);
    return map_identity(bank.n_slots());
}

StepRecord train_step(TrainState& state, const StageSchedule& schedule, const Batch& batch,
                      const TrainOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    const std::int64_t t = state.step + 1;
    StageInfo info{1, state.bank.n_slots()};
    if (options.mode != TrainMode::scratch) {
        info = stage_of(schedule, t);
        if (state.stage != 0 && info.stage != state.stage)
            state.bank = expand_bank(std::move(state.bank), info.n_slots, options.expansion);
        if (state.bank.n_slots() != info.n_slots)
            throw InvalidArgument("bank has " + std::to_string(state.bank.n_slots()) + " slots, stage " +
                                  std::to_string(info.stage) + " expects " + std::to_string(info.n_slots));
    }
    state.stage = info.stage;

    const StepPlan plan = plan_step(state, options);
    const double loss = compute_gradients(state.bank, plan.map, batch);

    StepRecord rec;
    rec.step = t;
    rec.stage = info.stage;
    rec.n_slots = state.bank.n_slots();
    rec.sampled_depth = plan.depth;
    rec.train_loss = loss;
    state.cum_flops += step_flops(state.bank.config, plan.depth, batch.tokens.size());
    rec.cum_flops = state.cum_flops;
    state.step = t;
    if (!std::isfinite(loss)) {
        rec.halted = true;
    } else {
        const GradStats gs = grad_stats(state.bank);
        rec.grad_mean = gs.mean;
        rec.grad_std = gs.std;
        adamw_step(state.bank, options.optimizer);
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

Batch sample_batch(std::span<const int> ids, std::size_t batch, std::size_t seq, CounterRng& rng) {
    if (ids.size() < seq + 1)
        throw InvalidArgument("token stream of " + std::to_string(ids.size()) + " is shorter than one window of " +
                              std::to_string(seq + 1));
    Batch b{batch, seq, std::vector<int>(batch * seq), std::vector<int>(batch * seq)};
    const std::uint64_t span = ids.size() - seq;
    for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t offset = rng.below(span);
        for (std::size_t i = 0; i < seq; ++i) {
            b.tokens[r * seq + i] = ids[offset + i];
            b.targets[r * seq + i] = ids[offset + i + 1];
        }
    }
    return b;
}

std::vector<Batch> validation_batches(std::span<const int> ids, std::size_t samples, std::size_t seq,
                                      std::size_t chunk) {
    if (samples == 0 || chunk == 0) throw InvalidArgument("validation needs at least one sample");
    if (ids.size() < seq + 1)
        throw InvalidArgument("validation split of " + std::to_string(ids.size()) + " tokens is shorter than one window of " +
                              std::to_string(seq + 1));
    const std::size_t span = ids.size() - seq - 1;
    std::vector<Batch> out;
    for (std::size_t start = 0; start < samples; start += chunk) {
        const std::size_t rows = std::min(chunk, samples - start);
        Batch b{rows, seq, std::vector<int>(rows * seq), std::vector<int>(rows * seq)};
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t k = start + r;
            const std::size_t offset = samples == 1 ? 0 : span * k / (samples - 1);
            for (std::size_t i = 0; i < seq; ++i) {
                b.tokens[r * seq + i] = ids[offset + i];
                b.targets[r * seq + i] = ids[offset + i + 1];
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

double evaluate(const WeightBank& bank, const LayerMap& map, std::span<const Batch> batches) {
    double total = 0.0;
    std::size_t tokens = 0;
    for (const Batch& b : batches) {
        total += evaluate_loss(bank, map, b) * static_cast<double>(b.tokens.size());
        tokens += b.tokens.size();
    }
    if (tokens == 0) throw InvalidArgument("evaluation over no tokens");
    return total / static_cast<double>(tokens);
}

TrainingResult run_training(const RunSpec& spec, const TokenCorpus& corpus, MetricSink& sink) {
    spec.model.validate();
    spec.options.optimizer.validate();
    if (spec.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    if (spec.eval_interval < 1) throw InvalidArgument("eval interval must be >= 1");
    if (spec.steps_per_epoch < 1) throw InvalidArgument("steps per epoch must be >= 1");
    const auto seq = static_cast<std::size_t>(spec.model.seq_len);
    const std::vector<Batch> val = validation_batches(corpus.val, spec.val_samples, seq, 32);

    TrainingResult result;
    result.state = make_train_state(spec.model, spec.schedule, spec.options.mode, spec.seed);
    TrainState& state = result.state;
    result.curve.append(0.0, evaluate(state.bank, evaluation_map(state.bank, spec.options.mode), val));

    for (std::int64_t t = 1; t <= spec.schedule.total_steps; ++t) {
        const Batch batch = sample_batch(corpus.train, spec.batch_size, seq, state.data_rng);
        StepRecord rec = train_step(state, spec.schedule, batch, spec.options);
        rec.epoch = (t - 1) / spec.steps_per_epoch;
        if (rec.halted) {
            sink.record(rec);
            result.halted = true;
            return result;
        }
        if (t % spec.eval_interval == 0 || t == spec.schedule.total_steps) {
            const auto started = std::chrono::steady_clock::now();
            rec.val_loss = evaluate(state.bank, evaluation_map(state.bank, spec.options.mode), val);
            rec.wall_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
            result.curve.append(static_cast<double>(state.cum_flops), *rec.val_loss);
        }
        sink.record(rec);
    }
    return result;
}

} // namespace apollo
