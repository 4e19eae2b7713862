#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace apollo {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles.
struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> v);

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t size() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    // Last dimension; rows() folds every leading dimension.
    std::size_t cols() const;
    std::size_t rows() const;

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {values.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }

    bool operator==(const Tensor&) const = default;
};

} // namespace apollo
