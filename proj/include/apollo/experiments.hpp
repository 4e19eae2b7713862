#pragma once

#include "apollo/config.hpp"
#include "apollo/flops.hpp"
#include "apollo/model.hpp"
#include "apollo/scheduler.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace apollo {

// Trains per `config`, writing metrics.jsonl, curve.json and final.aplo into
// out_dir. A halted run still writes its files, then throws NumericalError.
TrainingResult run_train_command(const RunConfig& config, const TokenCorpus& corpus,
                                 const std::filesystem::path& out_dir);

struct ExpandCondition {
    std::string name;
    int depth = 0;
    double loss = 0.0;
    GradStats grads;
    ActivationHistogram histogram;
};

struct ExpandReport {
    int half_depth = 0;
    int depth = 0;
    std::vector<ExpandCondition> conditions;  // pre_expansion, stack, interpolation, random

    const ExpandCondition& at(const std::string& name) const;
    nlohmann::json to_json() const;
};

// Trains a half-depth model from scratch, expands it to full depth by stacking
// and by interpolation, and compares held-out loss, gradient statistics and
// last-block activation histograms against a freshly initialised full-depth
// model. Odd depths need expand.half_depth.
ExpandReport expand_analyze(const RunConfig& config, const TokenCorpus& corpus);

struct BenchEntry {
    std::string name;   // lvps, es, us, fs, none
    double k = 0.0;
    Saving saving;
    std::uint64_t total_flops = 0;
    double final_val_loss = 0.0;
    std::vector<double> expected_step_flops;  // per stage, analytic
    LossCurve curve;
};

struct BenchReport {
    std::uint64_t scratch_flops = 0;
    double scratch_final_loss = 0.0;
    LossCurve scratch_curve;
    std::vector<BenchEntry> entries;

    const BenchEntry& at(const std::string& name) const;
    nlohmann::json to_json() const;
};

// Analytic expected per-step FLOPs of each stage of `config` under `kind`.
std::vector<double> expected_stage_flops(const RunConfig& config, SamplerKind kind, double k);

// Scratch baseline plus one apollo run per sampler kind and a no-sampling run
// (depth fixed at the bank size, interpolation expansion), identical seeds.
BenchReport sampler_bench(const RunConfig& config, const TokenCorpus& corpus);

} // namespace apollo
