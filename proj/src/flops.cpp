#include "apollo/flops.hpp"

#include "apollo/error.hpp"

namespace apollo {

FlopsModel FlopsModel::from_config(const ModelConfig& c) {
    const std::uint64_t d = static_cast<std::uint64_t>(c.d_model);
    const std::uint64_t alpha = static_cast<std::uint64_t>(c.ffn_ratio);
    const std::uint64_t seq = static_cast<std::uint64_t>(c.seq_len);
    const std::uint64_t v = static_cast<std::uint64_t>(c.vocab_size);
    return {2 * (4 * d * d + 2 * alpha * d * d) + 4 * seq * d, 2 * d * v};
}

std::uint64_t step_flops(const ModelConfig& config, int depth, std::uint64_t batch_tokens) {
    if (depth < 1) throw InvalidArgument("step_flops depth must be >= 1");
    const FlopsModel m = FlopsModel::from_config(config);
    const std::uint64_t forward = static_cast<std::uint64_t>(depth) * m.block_forward_per_token + m.embed_head_forward_per_token;
    return FlopsModel::kTrainMultiplier * forward * batch_tokens;
}

double expected_step_flops(const ModelConfig& config, const DepthPmf& pmf, std::uint64_t batch_tokens) {
    double e = 0.0;
    for (std::size_t i = 0; i < pmf.probs.size(); ++i) {
        if (pmf.probs[i] == 0.0) continue;
        e += pmf.probs[i] * static_cast<double>(step_flops(config, pmf.floor_depth + static_cast<int>(i), batch_tokens));
    }
    return e;
}

void LossCurve::append(double flops, double loss) {
    if (!points.empty() && !(flops > points.back().flops))
        throw InvalidArgument("loss curve FLOPs must strictly increase");
    points.push_back({flops, loss});
}

void LossCurve::validate() const {
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i].flops > points[i - 1].flops)) throw InvalidArgument("loss curve FLOPs must strictly increase");
}

Saving saving_ratio(const LossCurve& candidate, const LossCurve& baseline) {
    if (candidate.empty() || baseline.empty()) throw InvalidArgument("saving_ratio needs non-empty curves");
    const double target = baseline.points.back().loss;
    const double baseline_flops = baseline.points.back().flops;
    if (!(baseline_flops > 0.0)) throw InvalidArgument("baseline curve has no training FLOPs");
    const auto& pts = candidate.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!(pts[i].loss <= target)) continue;
        double cost = pts[i].flops;
        if (i > 0 && pts[i].loss < target) {
            const CurvePoint& a = pts[i - 1];
            const CurvePoint& b = pts[i];
            cost = a.flops + (a.loss - target) / (a.loss - b.loss) * (b.flops - a.flops);
        }
        return {true, 1.0 - cost / baseline_flops, cost};
    }
    return {};
}

} // namespace apollo
