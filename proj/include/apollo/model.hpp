#pragma once

#include "apollo/autodiff.hpp"
#include "apollo/depth_maps.hpp"
#include "apollo/parameter.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace apollo {

enum class NormPlacement { pre, post };

std::string to_string(NormPlacement placement);
NormPlacement parse_norm_placement(const std::string& text);

// Byte-level vocabulary: 256 byte values plus one padding id.
inline constexpr int kByteVocab = 257;
inline constexpr int kPadToken = 256;

struct ModelConfig {
    int depth = 8;          // target depth L
    int d_model = 64;
    int n_heads = 4;
    int ffn_ratio = 4;
    int vocab_size = kByteVocab;
    int seq_len = 64;       // context length
    NormPlacement norm_placement = NormPlacement::pre;

    int head_dim() const { return d_model / n_heads; }
    int ffn_dim() const { return d_model * ffn_ratio; }
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// All weights of one transformer block. The attention projections are d x d;
// head m owns columns [m*dk, (m+1)*dk) of wq/wk/wv and the same rows of wo.
struct LayerWeights {
    Parameter wq, wk, wv, wo;
    Parameter bq, bk, bv, bo;
    Parameter w_in, b_in, w_out, b_out;
    Parameter ln1_gain, ln1_bias, ln2_gain, ln2_bias;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    bool operator==(const LayerWeights&) const = default;
};

// N actual layer-weight sets shared by the virtual layers through a LayerMap,
// plus the embedding table (tied to the output head), positional embedding and
// final layer norm.
struct WeightBank {
    ModelConfig config;
    std::vector<LayerWeights> slots;
    Parameter token_embedding;
    Parameter position_embedding;
    Parameter final_gain;
    Parameter final_bias;
    // Set by compute_gradients, cleared by zero_grad.
    bool grads_ready = false;

    int n_slots() const { return static_cast<int>(slots.size()); }

    // Embeddings first, then slots in order, then the final norm.
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

    void zero_grad();

    bool operator==(const WeightBank&) const = default;
};

inline constexpr double kInitStd = 0.02;

// Projections and embeddings ~ N(0, 0.02^2), biases 0, norm gains 1.
WeightBank init_bank(const ModelConfig& config, int n_slots, std::uint64_t seed);

// Token ids for `batch` rows of `seq` positions, row-major, plus next-token
// targets (kIgnoreTarget to exclude a position).
struct Batch {
    std::size_t batch = 0;
    std::size_t seq = 0;
    std::vector<int> tokens;
    std::vector<int> targets;
};

struct ForwardPass {
    ad::Var logits;       // [batch*seq x V]
    ad::Var last_hidden;  // output of the last block, [batch*seq x d]
};

// One block on x = [batch*seq x d].
ad::Var block_forward(ad::Tape& tape, LayerWeights& weights, const ModelConfig& config, ad::Var x,
                      std::size_t batch, std::size_t seq);
ad::Var block_forward(ad::Tape& tape, const LayerWeights& weights, const ModelConfig& config, ad::Var x,
                      std::size_t batch, std::size_t seq);

ForwardPass forward(ad::Tape& tape, WeightBank& bank, const LayerMap& map, std::span<const int> tokens,
                    std::size_t batch, std::size_t seq);
ForwardPass forward(ad::Tape& tape, const WeightBank& bank, const LayerMap& map, std::span<const int> tokens,
                    std::size_t batch, std::size_t seq);

// Logits shaped [batch x seq x V], no gradient.
Tensor forward_logits(const WeightBank& bank, const LayerMap& map, std::span<const int> tokens, std::size_t batch,
                      std::size_t seq);

// Zeroes grads, runs forward + backward, returns the loss. Sets grads_ready.
double compute_gradients(WeightBank& bank, const LayerMap& map, const Batch& batch);

// Mean cross-entropy without touching gradients.
double evaluate_loss(const WeightBank& bank, const LayerMap& map, const Batch& batch);

struct GradStats {
    double mean = 0.0;
    double std = 0.0;
};

// Mean and standard deviation of |g| over every trainable scalar.
GradStats grad_stats(const WeightBank& bank);

struct ActivationHistogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const;
    bool operator==(const ActivationHistogram&) const = default;
};

ActivationHistogram make_histogram(std::span<const double> values, int n_bins);

// Histogram of the last block's output over the batch, bins spanning the
// observed [min, max].
ActivationHistogram activation_histogram(const WeightBank& bank, const LayerMap& map, const Batch& batch, int n_bins);

} // namespace apollo
