#include "apollo/optimizer.hpp"

#include "apollo/error.hpp"

#include <cmath>

namespace apollo {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("optimizer.lr must be > 0");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("optimizer.weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidArgument("optimizer betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw InvalidArgument("optimizer.eps must be > 0");
}

void adamw_update(Parameter& param, const AdamWConfig& c) {
    ++param.steps;
    const double t = static_cast<double>(param.steps);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    const double decay = 1.0 - c.lr * c.weight_decay;
    auto& w = param.value.values;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = param.grad[i];
        double& m = param.first_moment[i];
        double& v = param.second_moment[i];
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        w[i] *= decay;
        w[i] -= c.lr * (m / correction1) / (std::sqrt(v / correction2) + c.eps);
    }
}

void adamw_step(WeightBank& bank, const AdamWConfig& config) {
    for (Parameter* p : bank.parameters()) adamw_update(*p, config);
}

} // namespace apollo
