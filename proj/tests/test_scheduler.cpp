#include "apollo/corpus.hpp"
#include "apollo/error.hpp"
#include "apollo/expansion.hpp"
#include "apollo/scheduler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace apollo;

namespace {

ModelConfig tiny(int depth = 4) {
    ModelConfig c;
    c.depth = depth;
    c.d_model = 16;
    c.n_heads = 2;
    c.ffn_ratio = 2;
    c.seq_len = 16;
    return c;
}

const TokenCorpus& small_corpus() {
    static const TokenCorpus corpus = [] {
        const auto ids = tokenize(synthetic_corpus(40000, 3));
        TokenCorpus c;
        c.train.assign(ids.begin(), ids.begin() + 36000);
        c.val.assign(ids.begin() + 36000, ids.end());
        return c;
    }();
    return corpus;
}

RunSpec tiny_spec(TrainMode mode, std::int64_t steps) {
    RunSpec s;
    s.model = tiny();
    s.options = default_options(mode);
    s.options.optimizer.lr = 3e-3;
    s.batch_size = 4;
    s.eval_interval = 10;
    s.val_samples = 16;
    s.seed = 5;
    s.schedule = mode == TrainMode::scratch ? StageSchedule::single(steps, 4)
                                            : StageSchedule{{{1, 1}, {steps / 4 + 1, 2}, {steps / 2 + 1, 4}}, steps, 4};
    return s;
}

} // namespace

TEST(StageOf, BoundaryExamples) {
    const StageSchedule s{{{1, 1}, {100, 3}}, 200, 3};
    EXPECT_EQ(stage_of(s, 1), (StageInfo{1, 1}));
    EXPECT_EQ(stage_of(s, 99), (StageInfo{1, 1}));
    EXPECT_EQ(stage_of(s, 100), (StageInfo{2, 3}));
    EXPECT_EQ(stage_of(s, 200), (StageInfo{2, 3}));
    EXPECT_THROW(stage_of(s, 0), InvalidArgument);
    EXPECT_THROW(stage_of(s, 201), InvalidArgument);
}

TEST(StageSchedule, ValidationRules) {
    EXPECT_NO_THROW((StageSchedule{{{1, 1}, {5, 2}, {9, 4}}, 20, 4}.validate()));
    EXPECT_THROW((StageSchedule{{{2, 1}, {5, 4}}, 20, 4}.validate()), InvalidArgument);
    EXPECT_THROW((StageSchedule{{{1, 1}, {5, 1}, {9, 4}}, 20, 4}.validate()), InvalidArgument);
    EXPECT_THROW((StageSchedule{{{1, 1}, {5, 2}, {5, 4}}, 20, 4}.validate()), InvalidArgument);
    EXPECT_THROW((StageSchedule{{{1, 1}, {5, 2}}, 20, 4}.validate()), InvalidArgument);
    EXPECT_THROW((StageSchedule{{}, 20, 4}.validate()), InvalidArgument);
}

TEST(TrainStep, FinalStageAlwaysRunsFullDepth) {
    const auto schedule = StageSchedule::single(20, 4);
    auto state = make_train_state(tiny(), schedule, TrainMode::apollo, 1);
    const auto opts = default_options(TrainMode::apollo);
    for (int i = 0; i < 20; ++i) {
        const auto b = sample_batch(small_corpus().train, 2, 16, state.data_rng);
        EXPECT_EQ(train_step(state, schedule, b, opts).sampled_depth, 4);
    }
}

TEST(TrainStep, SingleSlotStageSharesAndUpdatesSlot) {
    const StageSchedule schedule{{{1, 1}, {10, 4}}, 20, 4};
    auto state = make_train_state(tiny(), schedule, TrainMode::apollo, 2);
    const auto before = state.bank.slots[0].wq.value;
    const auto b = sample_batch(small_corpus().train, 2, 16, state.data_rng);
    const auto rec = train_step(state, schedule, b, default_options(TrainMode::apollo));
    EXPECT_GE(rec.sampled_depth, 1);
    EXPECT_EQ(rec.n_slots, 1);
    bool nonzero = false;
    for (double g : state.bank.slots[0].wq.grad) nonzero |= g != 0.0;
    EXPECT_TRUE(nonzero);
    EXPECT_NE(state.bank.slots[0].wq.value, before);
}

TEST(TrainStep, NonFiniteLossHaltsWithoutUpdating) {
    const auto schedule = StageSchedule::single(5, 4);
    auto state = make_train_state(tiny(), schedule, TrainMode::scratch, 3);
    state.bank.slots[1].w_in.value[0] = std::numeric_limits<double>::quiet_NaN();
    const auto snapshot = state.bank.slots[0].wq.value;
    const auto b = sample_batch(small_corpus().train, 2, 16, state.data_rng);
    const auto rec = train_step(state, schedule, b, default_options(TrainMode::scratch));
    EXPECT_TRUE(rec.halted);
    EXPECT_TRUE(std::isnan(rec.train_loss));
    EXPECT_EQ(state.bank.slots[0].wq.value, snapshot);
}

TEST(TrainStep, StackProgressiveRunsAtBankDepth) {
    const StageSchedule schedule{{{1, 1}, {4, 2}, {7, 4}}, 9, 4};
    auto state = make_train_state(tiny(), schedule, TrainMode::stack_progressive, 4);
    const auto opts = default_options(TrainMode::stack_progressive);
    EXPECT_EQ(opts.expansion, MapKind::stack);
    const std::vector<int> depths{1, 1, 1, 2, 2, 2, 4, 4, 4};
    for (int d : depths) {
        const auto b = sample_batch(small_corpus().train, 2, 16, state.data_rng);
        EXPECT_EQ(train_step(state, schedule, b, opts).sampled_depth, d);
    }
}

TEST(TrainStep, StageChangeExpandsByInterpolation) {
    const StageSchedule schedule{{{1, 2}, {2, 4}}, 2, 4};
    auto state = make_train_state(tiny(), schedule, TrainMode::apollo, 5);
    const auto opts = default_options(TrainMode::apollo);
    train_step(state, schedule, sample_batch(small_corpus().train, 2, 16, state.data_rng), opts);
    const auto after_first = state.bank;
    train_step(state, schedule, sample_batch(small_corpus().train, 2, 16, state.data_rng), opts);
    ASSERT_EQ(state.bank.n_slots(), 4);
    // Copies of [1,1,2,2] carry the step count of their source slot.
    for (const auto& slot : state.bank.slots) EXPECT_EQ(slot.wq.steps, 2u);
    EXPECT_NE(state.bank.slots[0].wq.value, after_first.slots[0].wq.value);
}

TEST(Property, BankSizeIsAStepFunctionOfTheSchedule) {
    auto spec = tiny_spec(TrainMode::apollo, 40);
    spec.schedule = {{{1, 1}, {7, 2}, {19, 3}, {30, 4}}, 40, 4};
    VectorSink sink;
    const auto result = run_training(spec, small_corpus(), sink);
    ASSERT_EQ(sink.records.size(), 40u);
    int expansions = 0;
    for (std::size_t i = 0; i < sink.records.size(); ++i) {
        const auto& r = sink.records[i];
        const auto info = stage_of(spec.schedule, r.step);
        EXPECT_EQ(r.n_slots, info.n_slots);
        EXPECT_EQ(r.stage, info.stage);
        EXPECT_GE(r.sampled_depth, info.n_slots);
        EXPECT_LE(r.sampled_depth, 4);
        if (i > 0 && r.n_slots != sink.records[i - 1].n_slots) ++expansions;
    }
    EXPECT_EQ(expansions, 3);
    EXPECT_EQ(result.state.bank.n_slots(), 4);
}

TEST(Property, ApolloDepthFrequenciesMatchThePmf) {
    const StageSchedule schedule{{{1, 3}, {100000, 12}}, 100000, 12};
    auto c = tiny(12);
    auto state = make_train_state(c, schedule, TrainMode::apollo, 6);
    const auto opts = default_options(TrainMode::apollo);
    const auto pmf = opts.sampler.pmf(3, 12);
    std::vector<double> freq(pmf.probs.size(), 0.0);
    const int steps = 20000;
    for (int i = 0; i < steps; ++i) {
        const auto plan = plan_step(state, opts);
        ASSERT_EQ(plan.map, map_interpolation(3, plan.depth));
        freq[static_cast<std::size_t>(plan.depth - 3)] += 1.0 / steps;
    }
    for (std::size_t i = 0; i < freq.size(); ++i) EXPECT_NEAR(freq[i], pmf.probs[i], 0.02);
}

TEST(Property, ExpansionDoesNotExplodeGradients) {
    auto spec = tiny_spec(TrainMode::apollo, 30);
    spec.schedule = {{{1, 2}, {31, 4}}, 31, 4};
    spec.schedule.total_steps = 30;
    NullSink sink;
    auto bank = run_training(spec, small_corpus(), sink).state.bank;
    const auto held_out = validation_batches(small_corpus().val, 8, 16, 8).front();
    compute_gradients(bank, evaluation_map(bank, TrainMode::apollo), held_out);
    const double before = grad_stats(bank).mean;
    auto grown = expand_bank(bank, 4);
    compute_gradients(grown, evaluation_map(grown, TrainMode::apollo), held_out);
    const double after = grad_stats(grown).mean;
    EXPECT_GT(before, 0.0);
    EXPECT_LE(after, 2.0 * before);
}

TEST(RunTraining, ScratchLearns) {
    auto spec = tiny_spec(TrainMode::scratch, 60);
    NullSink sink;
    const auto result = run_training(spec, small_corpus(), sink);
    ASSERT_GE(result.curve.points.size(), 2u);
    EXPECT_LT(result.curve.points.back().loss, result.curve.points.front().loss - 0.5);
    EXPECT_EQ(result.state.bank.n_slots(), 4);
}

TEST(RunTraining, IdenticalSeedsGiveIdenticalRecords) {
    auto spec = tiny_spec(TrainMode::apollo, 24);
    VectorSink a, b;
    const auto ra = run_training(spec, small_corpus(), a);
    const auto rb = run_training(spec, small_corpus(), b);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].train_loss, b.records[i].train_loss);
        EXPECT_EQ(a.records[i].sampled_depth, b.records[i].sampled_depth);
        EXPECT_EQ(a.records[i].val_loss, b.records[i].val_loss);
    }
    EXPECT_EQ(ra.state.bank, rb.state.bank);
    EXPECT_EQ(ra.curve, rb.curve);
}

TEST(RunTraining, FlopsAccumulateStepByStep) {
    auto spec = tiny_spec(TrainMode::apollo, 20);
    VectorSink sink;
    run_training(spec, small_corpus(), sink);
    std::uint64_t total = 0;
    for (const auto& r : sink.records) {
        total += step_flops(spec.model, r.sampled_depth, spec.batch_size * 16);
        EXPECT_EQ(r.cum_flops, total);
    }
}

TEST(RunTraining, EvaluatesOnScheduleAndAtTheEnd) {
    auto spec = tiny_spec(TrainMode::scratch, 25);
    VectorSink sink;
    const auto result = run_training(spec, small_corpus(), sink);
    EXPECT_EQ(result.curve.points.size(), 4u);  // step 0, 10, 20, 25
    for (const auto& r : sink.records) EXPECT_EQ(r.val_loss.has_value(), r.step % 10 == 0 || r.step == 25);
}

TEST(Batches, TargetsAreShiftedTokens) {
    CounterRng rng(1, kDataStream);
    const std::vector<int> ids{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const auto b = sample_batch(ids, 3, 4, rng);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(b.targets[r * 4 + i], b.tokens[r * 4 + i] + 1);
            if (i > 0) EXPECT_EQ(b.tokens[r * 4 + i], b.tokens[r * 4 + i - 1] + 1);
        }
    EXPECT_THROW(sample_batch(ids, 1, 10, rng), InvalidArgument);
}

TEST(Batches, ValidationSliceIsFixedAndChunked) {
    std::vector<int> ids(200);
    for (int i = 0; i < 200; ++i) ids[static_cast<std::size_t>(i)] = i;
    const auto v = validation_batches(ids, 70, 8, 32);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0].batch, 32u);
    EXPECT_EQ(v[2].batch, 6u);
    EXPECT_EQ(v[0].tokens[0], 0);
    EXPECT_EQ(v[2].tokens[5 * 8], 191);  // last window ends at the final target
    EXPECT_EQ(v[2].targets.back(), 199);
}
