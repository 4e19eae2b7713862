#include "apollo/checkpoint.hpp"

#include "apollo/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace apollo {

namespace {

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out.insert(out.end(), p, p + n);
    }

    std::vector<std::uint8_t> out;

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw FormatError("checkpoint truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                              " more, have " + std::to_string(data_.size() - pos_) + ")");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

void write_values(Writer& w, const std::vector<double>& v) {
    for (double x : v) w.f64(x);
}

void read_values(Reader& r, std::vector<double>& v) {
    for (double& x : v) x = r.f64();
}

} // namespace

Checkpoint Checkpoint::from_state(const TrainState& s) {
    return {s.bank, s.step, s.stage, s.cum_flops, s.data_rng, s.depth_rng};
}

TrainState Checkpoint::to_state() const {
    TrainState s;
    s.bank = bank;
    s.step = step;
    s.stage = stage;
    s.cum_flops = cum_flops;
    s.data_rng = data_rng;
    s.depth_rng = depth_rng;
    return s;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
    Writer w;
    w.bytes(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    const ModelConfig& c = ck.bank.config;
    for (int v : {c.depth, c.d_model, c.n_heads, c.ffn_ratio, c.vocab_size, c.seq_len}) w.u32(static_cast<std::uint32_t>(v));
    w.u32(c.norm_placement == NormPlacement::pre ? 0 : 1);
    w.u64(static_cast<std::uint64_t>(ck.step));
    w.u32(static_cast<std::uint32_t>(ck.stage));
    w.u64(ck.cum_flops);
    w.u64(ck.data_rng.key());
    w.u64(ck.data_rng.counter());
    w.u64(ck.depth_rng.key());
    w.u64(ck.depth_rng.counter());
    const auto params = ck.bank.parameters();
    w.u32(static_cast<std::uint32_t>(ck.bank.n_slots()));
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
        w.u32(static_cast<std::uint32_t>(p->name.size()));
        w.bytes(p->name.data(), p->name.size());
        w.u32(static_cast<std::uint32_t>(p->value.rank()));
        for (std::size_t d : p->value.shape) w.u32(static_cast<std::uint32_t>(d));
        w.u64(p->steps);
        write_values(w, p->value.values);
        write_values(w, p->first_moment);
        write_values(w, p->second_moment);
    }
    return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (r.string(4) != std::string(kCheckpointMagic, 4)) throw FormatError("not an APLO checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("incompatible checkpoint version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kCheckpointVersion) + ")");
    ModelConfig c;
    c.depth = static_cast<int>(r.u32());
    c.d_model = static_cast<int>(r.u32());
    c.n_heads = static_cast<int>(r.u32());
    c.ffn_ratio = static_cast<int>(r.u32());
    c.vocab_size = static_cast<int>(r.u32());
    c.seq_len = static_cast<int>(r.u32());
    const std::uint32_t norm = r.u32();
    if (norm > 1) throw FormatError("checkpoint norm placement " + std::to_string(norm) + " unknown");
    c.norm_placement = norm == 0 ? NormPlacement::pre : NormPlacement::post;
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("checkpoint config invalid: ") + e.what());
    }

    Checkpoint ck;
    ck.step = static_cast<std::int64_t>(r.u64());
    ck.stage = static_cast<int>(r.u32());
    ck.cum_flops = r.u64();
    const std::uint64_t data_key = r.u64(), data_counter = r.u64();
    const std::uint64_t depth_key = r.u64(), depth_counter = r.u64();
    ck.data_rng = CounterRng::from_state(data_key, data_counter);
    ck.depth_rng = CounterRng::from_state(depth_key, depth_counter);

    const auto n_slots = static_cast<int>(r.u32());
    if (n_slots < 1 || n_slots > c.depth) throw FormatError("checkpoint slot count " + std::to_string(n_slots) + " out of range");
    {
        const double d = c.d_model, f = c.ffn_dim();
        const double per_slot = 4 * d * d + 2 * d * f + f + 9 * d;
        const double scalars = (c.vocab_size + c.seq_len + 2) * d + n_slots * per_slot;
        if (scalars * 24.0 > static_cast<double>(bytes.size()))
            throw FormatError("checkpoint truncated: config needs " + std::to_string(static_cast<std::uint64_t>(scalars)) +
                              " scalars but the file is only " + std::to_string(bytes.size()) + " bytes");
    }
    // Skeleton with the right names and shapes; every value is overwritten below.
    ck.bank = init_bank(c, n_slots, 0);
    auto params = ck.bank.parameters();
    const std::uint32_t n_tensors = r.u32();
    if (n_tensors != params.size())
        throw FormatError("checkpoint holds " + std::to_string(n_tensors) + " tensors, expected " + std::to_string(params.size()));
    for (Parameter* p : params) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.string(name_len);
        if (name != p->name) throw FormatError("checkpoint tensor '" + name + "' where '" + p->name + "' was expected");
        const std::uint32_t rank = r.u32();
        if (rank != p->value.rank())
            throw FormatError("checkpoint tensor '" + name + "' has rank " + std::to_string(rank));
        Shape shape(rank);
        for (auto& d : shape) d = r.u32();
        if (shape != p->value.shape)
            throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                              shape_string(p->value.shape));
        p->steps = r.u64();
        read_values(r, p->value.values);
        read_values(r, p->first_moment);
        read_values(r, p->second_moment);
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint payload");
    return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_checkpoint(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace apollo
