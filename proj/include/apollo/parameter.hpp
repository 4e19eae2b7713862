#pragma once

#include "apollo/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace apollo {

// A trainable tensor together with its gradient accumulator and AdamW state.
struct Parameter {
    std::string name;
    Tensor value;
    std::vector<double> grad;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t steps = 0;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.size(), 0.0),
          first_moment(value.size(), 0.0),
          second_moment(value.size(), 0.0) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    bool operator==(const Parameter&) const = default;
};

} // namespace apollo
