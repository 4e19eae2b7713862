#include "apollo/config.hpp"

#include "apollo/corpus.hpp"
#include "apollo/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace apollo {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end)
        throw ConfigError(key + ": cannot parse '" + value + "' as a number");
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": cannot parse '" + value + "' as a real number");
    }
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(key + ": empty list element");
        out.push_back(parse(key, item));
    }
    return out;
}

template <class Fn>
auto as_config_error(const std::string& key, Fn fn) {
    try {
        return fn();
    } catch (const InvalidArgument& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct KeyTable {
    std::vector<std::string> order;
    std::map<std::string, Setter> setters;

    void add(std::string key, Setter s) {
        order.push_back(key);
        setters.emplace(std::move(key), std::move(s));
    }
};

const KeyTable& key_table() {
    static const KeyTable table = [] {
        KeyTable t;
        auto int_field = [](int ModelConfig::*field) {
            return [field](RunConfig& c, const std::string& k, const std::string& v) { c.model.*field = parse_number<int>(k, v); };
        };
        t.add("model.depth", int_field(&ModelConfig::depth));
        t.add("model.d_model", int_field(&ModelConfig::d_model));
        t.add("model.n_heads", int_field(&ModelConfig::n_heads));
        t.add("model.ffn_ratio", int_field(&ModelConfig::ffn_ratio));
        t.add("model.vocab_size", int_field(&ModelConfig::vocab_size));
        t.add("model.norm_placement", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.model.norm_placement = as_config_error(k, [&] { return parse_norm_placement(v); });
        });
        t.add("sampler.kind", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.sampler.kind = as_config_error(k, [&] { return parse_sampler_kind(v); });
        });
        t.add("sampler.k", [](RunConfig& c, const std::string& k, const std::string& v) { c.sampler.k = parse_real(k, v); });
        t.add("schedule.slots", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.schedule_slots = parse_list<int>(k, v, [](const std::string& kk, const std::string& vv) { return parse_number<int>(kk, vv); });
        });
        t.add("schedule.boundary_epochs", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.boundary_epochs = parse_list<double>(k, v, parse_real);
        });
        t.add("optimizer.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.optimizer.lr = parse_real(k, v); });
        t.add("optimizer.weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.optimizer.weight_decay = parse_real(k, v); });
        t.add("optimizer.beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.optimizer.beta1 = parse_real(k, v); });
        t.add("optimizer.beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.optimizer.beta2 = parse_real(k, v); });
        t.add("optimizer.eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.optimizer.eps = parse_real(k, v); });
        t.add("data.corpus", [](RunConfig& c, const std::string&, const std::string& v) { c.corpus = v; });
        t.add("data.split", [](RunConfig& c, const std::string& k, const std::string& v) { c.split = parse_real(k, v); });
        t.add("data.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_number<std::size_t>(k, v); });
        t.add("data.seq_len", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.seq_len = parse_number<int>(k, v); });
        t.add("data.val_samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.val_samples = parse_number<std::size_t>(k, v); });
        t.add("run.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); });
        t.add("run.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_real(k, v); });
        t.add("run.total_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.total_steps = parse_number<std::int64_t>(k, v); });
        t.add("run.eval_interval", [](RunConfig& c, const std::string& k, const std::string& v) { c.eval_interval = parse_number<std::int64_t>(k, v); });
        t.add("run.out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; });
        t.add("run.mode", [](RunConfig& c, const std::string& k, const std::string& v) {
            c.mode = as_config_error(k, [&] { return parse_train_mode(v); });
        });
        t.add("expand.half_depth", [](RunConfig& c, const std::string& k, const std::string& v) { c.half_depth = parse_number<int>(k, v); });
        t.add("expand.histogram_bins", [](RunConfig& c, const std::string& k, const std::string& v) { c.histogram_bins = parse_number<int>(k, v); });
        return t;
    }();
    return table;
}

} // namespace

const std::vector<std::string>& config_keys() { return key_table().order; }

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig config;
    bool k_given = false;
    std::map<std::string, int> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(content).substr(0, eq));
        const std::string value = trim(std::string_view(content).substr(eq + 1));
        const auto& setters = key_table().setters;
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown key '" + key + "' on line " + std::to_string(line_no));
        if (seen.contains(key))
            throw ConfigError(key + ": given twice (lines " + std::to_string(seen[key]) + " and " + std::to_string(line_no) + ")");
        seen[key] = line_no;
        if (value.empty()) throw ConfigError(key + ": empty value");
        it->second(config, key, value);
        k_given = k_given || key == "sampler.k";
    }
    if (!k_given) config.sampler.k = default_k(config.sampler.kind);
    if (!config.corpus.empty() && config.corpus.is_relative() && !base_dir.empty()) config.corpus = base_dir / config.corpus;
    if (config.out_dir.is_relative() && !base_dir.empty() && seen.contains("run.out_dir")) config.out_dir = base_dir / config.out_dir;
    if (config.schedule_slots.empty()) config.schedule_slots = {config.model.depth};
    return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig config = parse_run_config(text, path.parent_path());
    validate_run_config(config);
    return config;
}

void validate_run_config(const RunConfig& c) {
    as_config_error("model", [&] { c.model.validate(); return 0; });
    if (c.model.vocab_size < kByteVocab)
        throw ConfigError("model.vocab_size: byte-level tokens need at least " + std::to_string(kByteVocab));
    as_config_error("optimizer", [&] { c.optimizer.validate(); return 0; });
    if (c.sampler.kind == SamplerKind::es && !(c.sampler.k > 0.0)) throw ConfigError("sampler.k: es needs k > 0");
    if (c.sampler.kind == SamplerKind::lvps && !(c.sampler.k >= 0.0)) throw ConfigError("sampler.k: lvps needs k >= 0");
    if (!(c.split > 0.0 && c.split < 1.0)) throw ConfigError("data.split: must lie in (0, 1)");
    if (c.batch_size < 1) throw ConfigError("data.batch_size: must be >= 1");
    if (c.val_samples < 1) throw ConfigError("data.val_samples: must be >= 1");
    if (c.eval_interval < 1) throw ConfigError("run.eval_interval: must be >= 1");
    if (!c.total_steps && !(c.epochs > 0.0)) throw ConfigError("run.epochs: must be > 0");
    if (c.total_steps && *c.total_steps < 1) throw ConfigError("run.total_steps: must be >= 1");
    if (c.corpus.empty()) throw ConfigError("data.corpus: required");
    if (!std::filesystem::exists(c.corpus)) throw ConfigError("data.corpus: file " + c.corpus.string() + " does not exist");
    if (c.histogram_bins < 2) throw ConfigError("expand.histogram_bins: must be >= 2");
    if (c.half_depth && (*c.half_depth < 1 || *c.half_depth > c.model.depth))
        throw ConfigError("expand.half_depth: must lie in [1, model.depth]");
    const auto& slots = c.schedule_slots;
    if (slots.empty()) throw ConfigError("schedule.slots: required");
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i] < 1) throw ConfigError("schedule.slots: entries must be >= 1");
        if (i && slots[i] <= slots[i - 1]) throw ConfigError("schedule.slots: must strictly increase");
    }
    if (slots.back() != c.model.depth)
        throw ConfigError("schedule.slots: last entry must equal model.depth (" + std::to_string(c.model.depth) + ")");
    if (c.boundary_epochs.size() + 1 != slots.size())
        throw ConfigError("schedule.boundary_epochs: expected " + std::to_string(slots.size() - 1) + " entries, got " +
                          std::to_string(c.boundary_epochs.size()));
    for (std::size_t i = 0; i < c.boundary_epochs.size(); ++i) {
        if (!(c.boundary_epochs[i] > 0.0)) throw ConfigError("schedule.boundary_epochs: entries must be > 0");
        if (i && !(c.boundary_epochs[i] > c.boundary_epochs[i - 1]))
            throw ConfigError("schedule.boundary_epochs: must strictly increase");
    }
}

std::int64_t steps_per_epoch(const RunConfig& c, std::size_t train_tokens) {
    const std::size_t per_step = c.batch_size * static_cast<std::size_t>(c.model.seq_len);
    const auto spe = static_cast<std::int64_t>(train_tokens / per_step);
    if (spe < 1)
        throw ConfigError("data.batch_size: " + std::to_string(train_tokens) + " training tokens do not fill one step of " +
                          std::to_string(per_step));
    return spe;
}

std::int64_t total_steps(const RunConfig& c, std::int64_t spe) {
    if (c.total_steps) return *c.total_steps;
    const auto steps = static_cast<std::int64_t>(std::floor(c.epochs * static_cast<double>(spe)));
    if (steps < 1) throw ConfigError("run.epochs: yields no training steps");
    return steps;
}

StageSchedule build_schedule(const RunConfig& c, std::int64_t spe) {
    StageSchedule s;
    s.total_steps = total_steps(c, spe);
    s.target_depth = c.model.depth;
    s.stages.push_back({1, c.schedule_slots.front()});
    for (std::size_t i = 0; i < c.boundary_epochs.size(); ++i) {
        const auto start = static_cast<std::int64_t>(std::floor(c.boundary_epochs[i] * static_cast<double>(spe))) + 1;
        if (start <= s.stages.back().start_step)
            throw ConfigError("schedule.boundary_epochs: entry " + std::to_string(i + 1) + " maps to step " +
                              std::to_string(start) + ", not after the previous stage");
        if (start > s.total_steps)
            throw ConfigError("schedule.boundary_epochs: entry " + std::to_string(i + 1) + " starts at step " +
                              std::to_string(start) + ", beyond the " + std::to_string(s.total_steps) + " training steps");
        s.stages.push_back({start, c.schedule_slots[i + 1]});
    }
    as_config_error("schedule", [&] { s.validate(); return 0; });
    return s;
}

RunSpec make_run_spec(const RunConfig& c, const TokenCorpus& corpus) {
    RunSpec spec;
    spec.model = c.model;
    spec.steps_per_epoch = steps_per_epoch(c, corpus.train.size());
    spec.schedule = c.mode == TrainMode::scratch ? StageSchedule::single(total_steps(c, spec.steps_per_epoch), c.model.depth)
                                                 : build_schedule(c, spec.steps_per_epoch);
    spec.options = default_options(c.mode);
    spec.options.sampler = c.sampler;
    spec.options.optimizer = c.optimizer;
    spec.batch_size = c.batch_size;
    spec.eval_interval = c.eval_interval;
    spec.val_samples = c.val_samples;
    spec.seed = c.seed;
    if (corpus.val.size() < static_cast<std::size_t>(c.model.seq_len) + 1)
        throw ConfigError("data.split: validation split holds " + std::to_string(corpus.val.size()) +
                          " tokens, fewer than one window of data.seq_len + 1");
    return spec;
}

} // namespace apollo
