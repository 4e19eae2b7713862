#pragma once

#include "apollo/model.hpp"
#include "apollo/parameter.hpp"

namespace apollo {

struct AdamWConfig {
    double lr = 1e-4;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
    bool operator==(const AdamWConfig&) const = default;
};

// One AdamW update from param.grad. Weight decay is decoupled: the weights
// shrink by lr * weight_decay before the bias-corrected Adam step. Bias
// correction uses the parameter's own step count.
void adamw_update(Parameter& param, const AdamWConfig& config);

void adamw_step(WeightBank& bank, const AdamWConfig& config);

} // namespace apollo
