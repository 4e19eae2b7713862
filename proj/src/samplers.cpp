#include "apollo/samplers.hpp"

#include "apollo/error.hpp"

#include <cmath>

namespace apollo {

namespace {

void check_stage(int floor_depth, int max_depth) {
    if (floor_depth < 1 || floor_depth > max_depth)
        throw InvalidArgument("sampler needs 1 <= N <= L, got N=" + std::to_string(floor_depth) +
                              " L=" + std::to_string(max_depth));
}

void check_nondegenerate(int floor_depth, int max_depth) {
    check_stage(floor_depth, max_depth);
    if (floor_depth == max_depth)
        throw InvalidArgument("degenerate stage N == L == " + std::to_string(max_depth) +
                              ": the density is undefined, use a point mass");
}

} // namespace

std::string to_string(SamplerKind kind) {
    switch (kind) {
    case SamplerKind::lvps: return "lvps";
    case SamplerKind::es: return "es";
    case SamplerKind::us: return "us";
    case SamplerKind::fs: return "fs";
    }
    return "?";
}

SamplerKind parse_sampler_kind(const std::string& text) {
    std::string lower;
    for (char ch : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (lower == "lvps") return SamplerKind::lvps;
    if (lower == "es") return SamplerKind::es;
    if (lower == "us") return SamplerKind::us;
    if (lower == "fs") return SamplerKind::fs;
    throw InvalidArgument("unknown sampler kind '" + text + "' (expected lvps, es, us or fs)");
}

double default_k(SamplerKind kind) { return kind == SamplerKind::es ? kDefaultEsK : kDefaultLvpsK; }

LvpsConstants lvps_constants(int floor_depth, int max_depth, double k) {
    check_nondegenerate(floor_depth, max_depth);
    if (!(k >= 0.0)) throw InvalidArgument("lvps k must be >= 0");
    const double n = floor_depth, l = max_depth;
    return {(n + k) * (l + k) / (l - n), (l + k) / (l - n)};
}

double es_offset(int floor_depth, int max_depth, double k) {
    check_nondegenerate(floor_depth, max_depth);
    if (!(k > 0.0)) throw InvalidArgument("es k must be > 0");
    return static_cast<double>(max_depth - floor_depth) / std::expm1(k / 2.0);
}

double sampler_density(SamplerKind kind, int floor_depth, int max_depth, double k, double x) {
    check_nondegenerate(floor_depth, max_depth);
    const double n = floor_depth, l = max_depth;
    if (x < n || x > l) return 0.0;
    switch (kind) {
    case SamplerKind::lvps: {
        const auto [b, c] = lvps_constants(floor_depth, max_depth, k);
        (void)c;
        return b / ((x + k) * (x + k));
    }
    case SamplerKind::es: {
        const double b = es_offset(floor_depth, max_depth, k);
        return (1.0 / (x - n + b) + 1.0 / (l + b - x)) / k;
    }
    case SamplerKind::us: return 1.0 / (l - n);
    case SamplerKind::fs: return x == l ? 1.0 : 0.0;
    }
    throw InvalidArgument("unknown sampler kind");
}

double DepthPmf::at(int depth) const {
    if (depth < floor_depth || depth > max_depth()) return 0.0;
    return probs[static_cast<std::size_t>(depth - floor_depth)];
}

DepthPmf build_pmf(SamplerKind kind, int floor_depth, int max_depth, double k) {
    check_stage(floor_depth, max_depth);
    DepthPmf pmf{floor_depth, std::vector<double>(static_cast<std::size_t>(max_depth - floor_depth + 1), 0.0)};
    if (floor_depth == max_depth || kind == SamplerKind::fs) {
        pmf.probs.back() = 1.0;
        return pmf;
    }
    double total = 0.0;
    for (int d = floor_depth; d <= max_depth; ++d) {
        const double w = sampler_density(kind, floor_depth, max_depth, k, d);
        pmf.probs[static_cast<std::size_t>(d - floor_depth)] = w;
        total += w;
    }
    for (double& p : pmf.probs) p /= total;
    return pmf;
}

int sample_depth(const DepthPmf& pmf, CounterRng& rng) {
    const double u = rng.uniform();
    double cdf = 0.0;
    int last_supported = pmf.floor_depth;
    for (std::size_t i = 0; i < pmf.probs.size(); ++i) {
        if (pmf.probs[i] <= 0.0) continue;
        last_supported = pmf.floor_depth + static_cast<int>(i);
        cdf += pmf.probs[i];
        if (u < cdf) return last_supported;
    }
    // rounding left cdf slightly below 1
    return last_supported;
}

double expected_depth(const DepthPmf& pmf) {
    double e = 0.0;
    for (std::size_t i = 0; i < pmf.probs.size(); ++i) e += (pmf.floor_depth + static_cast<double>(i)) * pmf.probs[i];
    return e;
}

} // namespace apollo
