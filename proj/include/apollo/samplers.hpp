#pragma once

#include "apollo/rng.hpp"

#include <string>
#include <vector>

namespace apollo {

// Depth-sampling distributions over the integer depths [N, L] of one stage.
//   lvps: low-value-prioritised, density b / (x + k)^2
//   es:   edge sampling, U-shaped
//   us:   uniform
//   fs:   full, always L
enum class SamplerKind { lvps, es, us, fs };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string& text);

inline constexpr double kDefaultLvpsK = 0.0;
inline constexpr double kDefaultEsK = 10.0;
double default_k(SamplerKind kind);

struct LvpsConstants {
    double b;
    double c;
};

// Normalising constants of F(x) = c - b / (x + k) with F(N) = 0, F(L) = 1.
// Requires N < L and k >= 0.
LvpsConstants lvps_constants(int floor_depth, int max_depth, double k);

// Offset b of the edge-sampling density
//   (1/k) * (1/(x - N + b) + 1/(L + b - x)),
// chosen so the density integrates to 1 over [N, L]: b = (L - N) / (e^{k/2} - 1).
// Requires N < L and k > 0.
double es_offset(int floor_depth, int max_depth, double k);

// Continuous density at x (before discretisation). N < L required.
double sampler_density(SamplerKind kind, int floor_depth, int max_depth, double k, double x);

// Probability vector over the integer depths floor_depth..max_depth.
struct DepthPmf {
    int floor_depth = 1;
    std::vector<double> probs;

    int max_depth() const { return floor_depth + static_cast<int>(probs.size()) - 1; }
    double at(int depth) const;
};

// p(d) proportional to the density at integer d, normalised over [N, L].
// N == L gives a point mass for every kind.
DepthPmf build_pmf(SamplerKind kind, int floor_depth, int max_depth, double k);

struct SamplerSpec {
    SamplerKind kind = SamplerKind::lvps;
    double k = kDefaultLvpsK;

    DepthPmf pmf(int floor_depth, int max_depth) const { return build_pmf(kind, floor_depth, max_depth, k); }
};

// Inverse-CDF draw; consumes exactly one uniform from rng.
int sample_depth(const DepthPmf& pmf, CounterRng& rng);

double expected_depth(const DepthPmf& pmf);

} // namespace apollo
