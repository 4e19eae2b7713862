#include "apollo/model.hpp"

#include "apollo/error.hpp"
#include "apollo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace apollo {

std::string to_string(NormPlacement placement) { return placement == NormPlacement::pre ? "pre" : "post"; }

NormPlacement parse_norm_placement(const std::string& text) {
    if (text == "pre") return NormPlacement::pre;
    if (text == "post") return NormPlacement::post;
    throw InvalidArgument("unknown norm placement '" + text + "' (expected pre or post)");
}

void ModelConfig::validate() const {
    if (depth < 1) throw InvalidArgument("model depth must be >= 1");
    if (d_model < 1 || n_heads < 1) throw InvalidArgument("d_model and n_heads must be >= 1");
    if (d_model % n_heads != 0)
        throw InvalidArgument("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                              std::to_string(n_heads));
    if (ffn_ratio < 1) throw InvalidArgument("ffn_ratio must be >= 1");
    if (vocab_size < 2) throw InvalidArgument("vocab_size must be >= 2");
    if (seq_len < 1) throw InvalidArgument("seq_len must be >= 1");
}

// ---- parameter enumeration ------------------------------------------------

std::vector<Parameter*> LayerWeights::parameters() {
    return {&wq, &wk, &wv, &wo, &bq, &bk, &bv, &bo, &w_in, &b_in, &w_out, &b_out, &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias};
}

std::vector<const Parameter*> LayerWeights::parameters() const {
    return {&wq, &wk, &wv, &wo, &bq, &bk, &bv, &bo, &w_in, &b_in, &w_out, &b_out, &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias};
}

std::vector<Parameter*> WeightBank::parameters() {
    std::vector<Parameter*> out{&token_embedding, &position_embedding};
    for (auto& slot : slots)
        for (Parameter* p : slot.parameters()) out.push_back(p);
    out.push_back(&final_gain);
    out.push_back(&final_bias);
    return out;
}

std::vector<const Parameter*> WeightBank::parameters() const {
    std::vector<const Parameter*> out{&token_embedding, &position_embedding};
    for (const auto& slot : slots)
        for (const Parameter* p : slot.parameters()) out.push_back(p);
    out.push_back(&final_gain);
    out.push_back(&final_bias);
    return out;
}

std::size_t WeightBank::parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->size();
    return n;
}

void WeightBank::zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
    grads_ready = false;
}

// ---- initialisation -------------------------------------------------------

namespace {

Parameter normal_param(std::string name, Shape shape, CounterRng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.values) v = kInitStd * rng.normal();
    return Parameter(std::move(name), std::move(t));
}

Parameter filled_param(std::string name, Shape shape, double value) {
    return Parameter(std::move(name), Tensor(std::move(shape), value));
}

LayerWeights init_layer(const ModelConfig& c, int index, CounterRng& rng) {
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto f = static_cast<std::size_t>(c.ffn_dim());
    const std::string p = "slot" + std::to_string(index) + ".";
    LayerWeights w;
    w.wq = normal_param(p + "wq", {d, d}, rng);
    w.wk = normal_param(p + "wk", {d, d}, rng);
    w.wv = normal_param(p + "wv", {d, d}, rng);
    w.wo = normal_param(p + "wo", {d, d}, rng);
    w.bq = filled_param(p + "bq", {d}, 0.0);
    w.bk = filled_param(p + "bk", {d}, 0.0);
    w.bv = filled_param(p + "bv", {d}, 0.0);
    w.bo = filled_param(p + "bo", {d}, 0.0);
    w.w_in = normal_param(p + "w_in", {d, f}, rng);
    w.b_in = filled_param(p + "b_in", {f}, 0.0);
    w.w_out = normal_param(p + "w_out", {f, d}, rng);
    w.b_out = filled_param(p + "b_out", {d}, 0.0);
    w.ln1_gain = filled_param(p + "ln1_gain", {d}, 1.0);
    w.ln1_bias = filled_param(p + "ln1_bias", {d}, 0.0);
    w.ln2_gain = filled_param(p + "ln2_gain", {d}, 1.0);
    w.ln2_bias = filled_param(p + "ln2_bias", {d}, 0.0);
    return w;
}

} // namespace

WeightBank init_bank(const ModelConfig& config, int n_slots, std::uint64_t seed) {
    config.validate();
    if (n_slots < 1 || n_slots > config.depth)
        throw InvalidArgument("n_slots " + std::to_string(n_slots) + " outside [1, " + std::to_string(config.depth) + "]");
    CounterRng rng(seed, 0);
    const auto d = static_cast<std::size_t>(config.d_model);
    WeightBank bank;
    bank.config = config;
    bank.token_embedding = normal_param("token_embedding", {static_cast<std::size_t>(config.vocab_size), d}, rng);
    bank.position_embedding = normal_param("position_embedding", {static_cast<std::size_t>(config.seq_len), d}, rng);
    for (int i = 0; i < n_slots; ++i) bank.slots.push_back(init_layer(config, i, rng));
    bank.final_gain = filled_param("final_gain", {d}, 1.0);
    bank.final_bias = filled_param("final_bias", {d}, 0.0);
    return bank;
}

// ---- forward --------------------------------------------------------------

namespace {

template <class Weights>
ad::Var mhsa(ad::Tape& tape, Weights& w, const ModelConfig& c, ad::Var x, std::size_t batch, std::size_t seq) {
    const auto dk = static_cast<std::size_t>(c.head_dim());
    const ad::Var q = ad::add_bias(ad::matmul(x, tape.parameter(w.wq)), tape.parameter(w.bq));
    const ad::Var k = ad::add_bias(ad::matmul(x, tape.parameter(w.wk)), tape.parameter(w.bk));
    const ad::Var v = ad::add_bias(ad::matmul(x, tape.parameter(w.wv)), tape.parameter(w.bv));
    const ad::Var wo = tape.parameter(w.wo);
    // Sum over heads of Att_m . W^{O,m}, each W^{O,m} the head's row block of wo.
    ad::Var out;
    for (int m = 0; m < c.n_heads; ++m) {
        const std::size_t offset = static_cast<std::size_t>(m) * dk;
        const ad::Var context = ad::causal_attention_head(q, k, v, batch, seq, offset, dk);
        const ad::Var head = ad::matmul(context, ad::slice_rows(wo, offset, dk));
        out = out ? ad::add(out, head) : head;
    }
    return ad::add_bias(out, tape.parameter(w.bo));
}

template <class Weights>
ad::Var ffn(ad::Tape& tape, Weights& w, ad::Var x) {
    const ad::Var hidden = ad::gelu(ad::add_bias(ad::matmul(x, tape.parameter(w.w_in)), tape.parameter(w.b_in)));
    return ad::add_bias(ad::matmul(hidden, tape.parameter(w.w_out)), tape.parameter(w.b_out));
}

template <class Weights>
ad::Var block_impl(ad::Tape& tape, Weights& w, const ModelConfig& c, ad::Var x, std::size_t batch, std::size_t seq) {
    auto ln1 = [&](ad::Var in) { return ad::layernorm(in, tape.parameter(w.ln1_gain), tape.parameter(w.ln1_bias)); };
    auto ln2 = [&](ad::Var in) { return ad::layernorm(in, tape.parameter(w.ln2_gain), tape.parameter(w.ln2_bias)); };
    if (c.norm_placement == NormPlacement::pre) {
        const ad::Var h = ad::add(x, mhsa(tape, w, c, ln1(x), batch, seq));
        return ad::add(h, ffn(tape, w, ln2(h)));
    }
    const ad::Var h = ln1(ad::add(x, mhsa(tape, w, c, x, batch, seq)));
    return ln2(ad::add(h, ffn(tape, w, h)));
}

void check_tokens(const ModelConfig& c, std::span<const int> tokens, std::size_t batch, std::size_t seq) {
    if (batch == 0 || seq == 0) throw InvalidArgument("empty batch");
    if (seq > static_cast<std::size_t>(c.seq_len))
        throw InvalidArgument("sequence length " + std::to_string(seq) + " exceeds context " + std::to_string(c.seq_len));
    if (tokens.size() != batch * seq)
        throw ShapeError(std::to_string(tokens.size()) + " tokens for batch " + std::to_string(batch) + " x seq " +
                         std::to_string(seq));
}

template <class Bank>
ForwardPass forward_impl(ad::Tape& tape, Bank& bank, const LayerMap& map, std::span<const int> tokens,
                         std::size_t batch, std::size_t seq) {
    const ModelConfig& c = bank.config;
    check_tokens(c, tokens, batch, seq);
    if (map.depth() == 0) throw InvalidArgument("layer map is empty");
    for (std::size_t l = 0; l < map.depth(); ++l) {
        if (map.entries[l] < 1 || map.entries[l] > bank.n_slots())
            throw InvalidArgument("layer map entry " + std::to_string(map.entries[l]) + " at layer " +
                                  std::to_string(l + 1) + " outside bank range [1, " + std::to_string(bank.n_slots()) + "]");
    }
    std::vector<int> positions(batch * seq);
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % seq);

    const ad::Var table = tape.parameter(bank.token_embedding);
    ad::Var x = ad::add(ad::embedding(table, tokens), ad::embedding(tape.parameter(bank.position_embedding), positions));
    for (std::size_t l = 0; l < map.depth(); ++l) x = block_impl(tape, bank.slots[map.slot(l)], c, x, batch, seq);
    const ad::Var normed = ad::layernorm(x, tape.parameter(bank.final_gain), tape.parameter(bank.final_bias));
    return {ad::matmul_nt(normed, table), x};
}

} // namespace

ad::Var block_forward(ad::Tape& tape, LayerWeights& weights, const ModelConfig& config, ad::Var x, std::size_t batch,
                      std::size_t seq) {
    return block_impl(tape, weights, config, x, batch, seq);
}

ad::Var block_forward(ad::Tape& tape, const LayerWeights& weights, const ModelConfig& config, ad::Var x,
                      std::size_t batch, std::size_t seq) {
    return block_impl(tape, weights, config, x, batch, seq);
}

ForwardPass forward(ad::Tape& tape, WeightBank& bank, const LayerMap& map, std::span<const int> tokens,
                    std::size_t batch, std::size_t seq) {
    return forward_impl(tape, bank, map, tokens, batch, seq);
}

ForwardPass forward(ad::Tape& tape, const WeightBank& bank, const LayerMap& map, std::span<const int> tokens,
                    std::size_t batch, std::size_t seq) {
    return forward_impl(tape, bank, map, tokens, batch, seq);
}

Tensor forward_logits(const WeightBank& bank, const LayerMap& map, std::span<const int> tokens, std::size_t batch,
                      std::size_t seq) {
    ad::Tape tape(false);
    const ForwardPass pass = forward(tape, bank, map, tokens, batch, seq);
    Tensor out = pass.logits.value();
    out.shape = {batch, seq, static_cast<std::size_t>(bank.config.vocab_size)};
    return out;
}

double compute_gradients(WeightBank& bank, const LayerMap& map, const Batch& batch) {
    bank.zero_grad();
    ad::Tape tape;
    const ForwardPass pass = forward(tape, bank, map, batch.tokens, batch.batch, batch.seq);
    const ad::Var loss = ad::cross_entropy(pass.logits, batch.targets);
    tape.backward(loss);
    bank.grads_ready = true;
    return loss.value()[0];
}

double evaluate_loss(const WeightBank& bank, const LayerMap& map, const Batch& batch) {
    ad::Tape tape(false);
    const ForwardPass pass = forward(tape, bank, map, batch.tokens, batch.batch, batch.seq);
    return ad::cross_entropy(pass.logits, batch.targets).value()[0];
}

// ---- diagnostics ----------------------------------------------------------

GradStats grad_stats(const WeightBank& bank) {
    if (!bank.grads_ready) throw InvalidArgument("grad_stats called before a completed backward pass");
    double total = 0.0;
    std::size_t n = 0;
    for (const Parameter* p : bank.parameters())
        for (double g : p->grad) {
            total += std::abs(g);
            ++n;
        }
    if (n == 0) return {};
    const double mean = total / static_cast<double>(n);
    double sq = 0.0;
    for (const Parameter* p : bank.parameters())
        for (double g : p->grad) sq += (std::abs(g) - mean) * (std::abs(g) - mean);
    return {mean, std::sqrt(sq / static_cast<double>(n))};
}

std::uint64_t ActivationHistogram::total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

ActivationHistogram make_histogram(std::span<const double> values, int n_bins) {
    if (n_bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
    if (values.empty()) throw InvalidArgument("histogram of no values");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    ActivationHistogram h{*lo_it, *hi_it, std::vector<std::uint64_t>(static_cast<std::size_t>(n_bins), 0)};
    const double width = h.hi - h.lo;
    for (double v : values) {
        std::size_t bin = 0;
        if (width > 0.0) {
            bin = static_cast<std::size_t>((v - h.lo) / width * n_bins);
            bin = std::min(bin, static_cast<std::size_t>(n_bins - 1));
        }
        ++h.counts[bin];
    }
    return h;
}

ActivationHistogram activation_histogram(const WeightBank& bank, const LayerMap& map, const Batch& batch, int n_bins) {
    if (batch.batch == 0 || batch.tokens.empty()) throw InvalidArgument("activation histogram of an empty batch");
    if (n_bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
    ad::Tape tape(false);
    const ForwardPass pass = forward(tape, bank, map, batch.tokens, batch.batch, batch.seq);
    return make_histogram(pass.last_hidden.value().values, n_bins);
}

} // namespace apollo
