#include "apollo/experiments.hpp"

#include "apollo/checkpoint.hpp"
#include "apollo/error.hpp"
#include "apollo/expansion.hpp"
#include "apollo/metrics.hpp"

#include <cmath>

namespace apollo {

using nlohmann::json;

TrainingResult run_train_command(const RunConfig& config, const TokenCorpus& corpus, const std::filesystem::path& out_dir) {
    const RunSpec spec = make_run_spec(config, corpus);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    TrainingResult result;
    {
        JsonlSink sink(out_dir / "metrics.jsonl");
        result = run_training(spec, corpus, sink);
    }
    write_curve(out_dir / "curve.json", result.curve);
    save_checkpoint(Checkpoint::from_state(result.state), out_dir / "final.aplo");
    if (result.halted)
        throw NumericalError("non-finite training loss at step " + std::to_string(result.state.step) + "; see " +
                             (out_dir / "metrics.jsonl").string());
    return result;
}

// ---- expansion analysis ---------------------------------------------------

const ExpandCondition& ExpandReport::at(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.name == name) return c;
    throw InvalidArgument("no condition named " + name);
}

json ExpandReport::to_json() const {
    json j{{"half_depth", half_depth}, {"depth", depth}, {"conditions", json::array()}};
    for (const auto& c : conditions)
        j["conditions"].push_back({{"name", c.name},
                                   {"depth", c.depth},
                                   {"loss", c.loss},
                                   {"grad_mean", c.grads.mean},
                                   {"grad_std", c.grads.std},
                                   {"histogram", apollo::to_json(c.histogram)}});
    return j;
}

ExpandReport expand_analyze(const RunConfig& config, const TokenCorpus& corpus) {
    const int depth = config.model.depth;
    int half = depth / 2;
    if (config.half_depth) {
        half = *config.half_depth;
    } else if (depth % 2 != 0) {
        throw ConfigError("model.depth: odd depth " + std::to_string(depth) + " needs expand.half_depth");
    }
    if (half < 1) throw ConfigError("model.depth: too shallow to halve");

    RunConfig half_config = config;
    half_config.model.depth = half;
    half_config.mode = TrainMode::scratch;
    half_config.schedule_slots = {half};
    half_config.boundary_epochs.clear();
    const RunSpec spec = make_run_spec(half_config, corpus);
    NullSink sink;
    TrainingResult trained = run_training(spec, corpus, sink);
    if (trained.halted) throw NumericalError("non-finite loss while training the half-depth model");

    const auto seq = static_cast<std::size_t>(config.model.seq_len);
    const std::vector<Batch> val = validation_batches(corpus.val, config.val_samples, seq, 32);
    const Batch& probe = val.front();

    WeightBank base = std::move(trained.state.bank);
    base.config.depth = depth;
    base.zero_grad();

    auto measure = [&](std::string name, WeightBank bank) {
        const LayerMap map = map_identity(bank.n_slots());
        ExpandCondition c;
        c.name = std::move(name);
        c.depth = bank.n_slots();
        c.loss = evaluate(bank, map, val);
        compute_gradients(bank, map, probe);
        c.grads = grad_stats(bank);
        c.histogram = activation_histogram(bank, map, probe, config.histogram_bins);
        return c;
    };

    ExpandReport report;
    report.half_depth = half;
    report.depth = depth;
    report.conditions.push_back(measure("pre_expansion", base));
    report.conditions.push_back(measure("stack", expand_bank(base, depth, MapKind::stack)));
    report.conditions.push_back(measure("interpolation", expand_bank(base, depth, MapKind::interpolation)));
    report.conditions.push_back(measure("random", init_bank(config.model, depth, config.seed + 1)));
    return report;
}

// ---- sampler bench --------------------------------------------------------

const BenchEntry& BenchReport::at(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw InvalidArgument("no bench entry named " + name);
}

json BenchReport::to_json() const {
    json j{{"scratch", {{"total_flops", scratch_flops}, {"final_val_loss", scratch_final_loss}, {"curve", apollo::to_json(scratch_curve)}}},
           {"samplers", json::array()}};
    for (const auto& e : entries) {
        json s{{"name", e.name},
               {"k", e.k},
               {"reached", e.saving.reached},
               {"saving", e.saving.reached ? json(e.saving.ratio) : json("not-reached")},
               {"total_flops", e.total_flops},
               {"final_val_loss", e.final_val_loss},
               {"expected_step_flops", e.expected_step_flops},
               {"curve", apollo::to_json(e.curve)}};
        j["samplers"].push_back(std::move(s));
    }
    return j;
}

std::vector<double> expected_stage_flops(const RunConfig& config, SamplerKind kind, double k) {
    const auto tokens = static_cast<std::uint64_t>(config.batch_size) * static_cast<std::uint64_t>(config.model.seq_len);
    std::vector<double> out;
    for (int n : config.schedule_slots)
        out.push_back(expected_step_flops(config.model, build_pmf(kind, n, config.model.depth, k), tokens));
    return out;
}

BenchReport sampler_bench(const RunConfig& config, const TokenCorpus& corpus) {
    NullSink sink;
    BenchReport report;

    RunConfig scratch = config;
    scratch.mode = TrainMode::scratch;
    const TrainingResult base = run_training(make_run_spec(scratch, corpus), corpus, sink);
    if (base.halted) throw NumericalError("non-finite loss in the scratch baseline");
    report.scratch_flops = base.state.cum_flops;
    report.scratch_final_loss = base.curve.points.back().loss;
    report.scratch_curve = base.curve;

    auto run = [&](const std::string& name, RunSpec spec, double k, std::vector<double> expected) {
        const TrainingResult r = run_training(spec, corpus, sink);
        if (r.halted) throw NumericalError("non-finite loss in sampler run " + name);
        BenchEntry e;
        e.name = name;
        e.k = k;
        e.saving = saving_ratio(r.curve, base.curve);
        e.total_flops = r.state.cum_flops;
        e.final_val_loss = r.curve.points.back().loss;
        e.expected_step_flops = std::move(expected);
        e.curve = r.curve;
        report.entries.push_back(std::move(e));
    };

    RunConfig apollo = config;
    apollo.mode = TrainMode::apollo;
    for (SamplerKind kind : {SamplerKind::lvps, SamplerKind::es, SamplerKind::us, SamplerKind::fs}) {
        const double k = kind == config.sampler.kind ? config.sampler.k : default_k(kind);
        RunSpec spec = make_run_spec(apollo, corpus);
        spec.options.sampler = {kind, k};
        run(to_string(kind), spec, k, expected_stage_flops(config, kind, k));
    }

    RunConfig fixed = config;
    fixed.mode = TrainMode::stack_progressive;
    RunSpec spec = make_run_spec(fixed, corpus);
    spec.options.expansion = MapKind::interpolation;
    std::vector<double> expected;
    const auto tokens = static_cast<std::uint64_t>(config.batch_size) * static_cast<std::uint64_t>(config.model.seq_len);
    for (int n : config.schedule_slots) expected.push_back(static_cast<double>(step_flops(config.model, n, tokens)));
    run("none", spec, 0.0, std::move(expected));
    return report;
}

} // namespace apollo
