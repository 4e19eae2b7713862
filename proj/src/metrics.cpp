#include "apollo/metrics.hpp"

#include "apollo/error.hpp"

#include <cmath>

namespace apollo {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

json to_json(const StepRecord& r) {
    json j{{"step", r.step},
           {"epoch", r.epoch},
           {"stage", r.stage},
           {"n_slots", r.n_slots},
           {"sampled_depth", r.sampled_depth},
           {"train_loss", number_or_null(r.train_loss)},
           {"val_loss", r.val_loss ? number_or_null(*r.val_loss) : json(nullptr)},
           {"grad_mean", r.grad_mean},
           {"grad_std", r.grad_std},
           {"cum_flops", r.cum_flops},
           {"wall_ms", r.wall_ms}};
    if (r.halted) j["halted"] = true;
    return j;
}

json to_json(const LossCurve& curve) {
    json arr = json::array();
    for (const auto& p : curve.points) arr.push_back(json::array({p.flops, p.loss}));
    return arr;
}

json to_json(const ActivationHistogram& h) { return {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}}; }

LossCurve curve_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("loss curve must be a JSON array of [flops, loss] pairs");
    LossCurve curve;
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number())
            throw FormatError("loss curve entries must be [flops, loss] number pairs");
        try {
            curve.append(item[0].get<double>(), item[1].get<double>());
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what());
        }
    }
    return curve;
}

std::string metrics_schema_error(const json& j) {
    if (!j.is_object()) return "record is not an object";
    for (const char* key : {"step", "epoch", "stage", "n_slots", "sampled_depth", "cum_flops"}) {
        if (!j.contains(key)) return std::string("missing ") + key;
        if (!j[key].is_number_integer()) return std::string(key) + " is not an integer";
    }
    const bool halted = j.contains("halted") && j["halted"] == true;
    for (const char* key : {"train_loss", "grad_mean", "grad_std", "wall_ms"}) {
        if (!j.contains(key)) return std::string("missing ") + key;
        if (halted && j[key].is_null()) continue;
        if (!j[key].is_number()) return std::string(key) + " is not a number";
    }
    if (!j.contains("val_loss")) return "missing val_loss";
    if (!j["val_loss"].is_null() && !j["val_loss"].is_number()) return "val_loss is neither a number nor null";
    return {};
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("error writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_curve(const std::filesystem::path& path, const LossCurve& curve) { write_json(path, to_json(curve)); }

LossCurve read_curve(const std::filesystem::path& path) { return curve_from_json(read_json(path)); }

JsonlSink::JsonlSink(const std::filesystem::path& path) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
}

void JsonlSink::record(const StepRecord& record) {
    out_ << to_json(record).dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("error writing " + path_.string());
}

} // namespace apollo
