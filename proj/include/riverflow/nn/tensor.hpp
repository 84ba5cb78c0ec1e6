#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace riverflow::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major array of doubles. Dimension 0 is the batch wherever a layer
/// consumes a tensor.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    /// Throws InputError when the value count does not match the shape.
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return values_.size(); }
    /// Values per batch item: product of all dimensions after the first.
    std::size_t item_size() const;

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Same values under a new shape of equal size.
    Tensor reshaped(Shape shape) const;
    void fill(double value);
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> values_;
};

} // namespace riverflow::nn
