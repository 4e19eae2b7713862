#pragma once

#include "apollo/flops.hpp"
#include "apollo/model.hpp"
#include "apollo/scheduler.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace apollo {

nlohmann::json to_json(const StepRecord& record);
nlohmann::json to_json(const LossCurve& curve);
nlohmann::json to_json(const ActivationHistogram& histogram);
LossCurve curve_from_json(const nlohmann::json& j);

// Checks one metrics.jsonl object: every field present with the right type,
// val_loss a number or null. Returns an empty string when valid.
std::string metrics_schema_error(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void write_curve(const std::filesystem::path& path, const LossCurve& curve);
LossCurve read_curve(const std::filesystem::path& path);

// Appends one JSON object per line.
class JsonlSink final : public MetricSink {
public:
    explicit JsonlSink(const std::filesystem::path& path);
    void record(const StepRecord& record) override;

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

} // namespace apollo
