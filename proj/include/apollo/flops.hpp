#pragma once

#include "apollo/model.hpp"
#include "apollo/samplers.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace apollo {

// Analytic FLOPs per token, counting a multiply-add as 2:
//   block forward:  2 * (4 d^2 + 2 alpha d^2) + 4 * seq * d
//   embedding+head: 2 * d * V
// Training costs 3x forward (backward = 2x forward).
struct FlopsModel {
    std::uint64_t block_forward_per_token = 0;
    std::uint64_t embed_head_forward_per_token = 0;
    static constexpr std::uint64_t kTrainMultiplier = 3;

    static FlopsModel from_config(const ModelConfig& config);
};

std::uint64_t step_flops(const ModelConfig& config, int depth, std::uint64_t batch_tokens);

// Sum over d of pmf(d) * step_flops(d).
double expected_step_flops(const ModelConfig& config, const DepthPmf& pmf, std::uint64_t batch_tokens);

struct CurvePoint {
    double flops;
    double loss;
    bool operator==(const CurvePoint&) const = default;
};

// Validation loss against cumulative training FLOPs; flops strictly increasing.
struct LossCurve {
    std::vector<CurvePoint> points;

    void append(double flops, double loss);
    bool empty() const { return points.empty(); }
    void validate() const;
    bool operator==(const LossCurve&) const = default;
};

struct Saving {
    bool reached = false;
    double ratio = 0.0;  // meaningful only when reached
    double flops_to_target = 0.0;
};

// Let l* be the baseline's final loss. The candidate's cost is the first FLOPs
// at which it attains loss <= l* (linear interpolation between straddling
// points); saving = 1 - cost / baseline total FLOPs.
Saving saving_ratio(const LossCurve& candidate, const LossCurve& baseline);

} // namespace apollo
