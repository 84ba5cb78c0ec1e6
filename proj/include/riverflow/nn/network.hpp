#pragma once

#include "riverflow/nn/checkpoint.hpp"
#include "riverflow/nn/layers.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace riverflow::nn {

/// Layers applied in order. Copies are deep (parameters and running
/// statistics), so a copy can serve as a frozen snapshot.
class Sequential {
public:
    Sequential() = default;
    /// Checks shape compatibility of every adjacent pair; throws InputError.
    Sequential(Shape input_item_shape, const std::vector<LayerSpec>& specs);
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    void init(std::uint64_t seed);

    Tensor forward(const Tensor& x, Mode mode);
    /// Eval-mode forward pass that leaves the network untouched.
    Tensor infer(const Tensor& x) const;
    /// Returns the gradient with respect to the network input.
    Tensor backward(const Tensor& grad_out);
    void zero_grad();

    std::vector<Param*> params();
    std::size_t param_count() const;
    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return output_shape_; }
    std::vector<LayerSpec> specs() const;
    std::size_t layer_count() const { return layers_.size(); }

    /// Parameter and buffer blocks are named "<prefix>.<layer>.<name>".
    void store(Checkpoint& ck, const std::string& prefix) const;
    void restore(const Checkpoint& ck, const std::string& prefix);

private:
    Shape input_shape_;
    Shape output_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

} // namespace riverflow::nn
