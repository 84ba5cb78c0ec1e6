#include "riverflow/nn/tensor.hpp"

#include "riverflow/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace riverflow::nn {

std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape)
{
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? "," : "") + std::to_string(shape[i]);
    return out + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values))
{
    if (values_.size() != shape_size(shape_))
        throw InputError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                         " values");
}

std::size_t Tensor::item_size() const
{
    if (shape_.empty()) return 1;
    return shape_[0] == 0 ? 0 : values_.size() / shape_[0];
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != values_.size())
        throw InputError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), values_);
}

void Tensor::fill(double value)
{
    std::fill(values_.begin(), values_.end(), value);
}

bool Tensor::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

} // namespace riverflow::nn
