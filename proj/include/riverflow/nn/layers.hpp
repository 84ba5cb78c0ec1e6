#pragma once

#include "riverflow/nn/tensor.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace riverflow::nn {

enum class Mode { train, eval };

enum class Activation { tanh, relu, sigmoid, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);

enum class LayerKind { dense, conv2d, conv_transpose2d, batchnorm, activation, flatten, reshape };

/// Architecture description of one layer. Only the fields of its kind matter.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in = 0;  ///< dense input width, conv input channels, batchnorm features
    std::size_t out = 0; ///< dense output width, conv output channels
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
    std::size_t out_h = 0; ///< transposed convolution output size
    std::size_t out_w = 0;
    Activation activation = Activation::linear;
    Shape shape; ///< reshape target, per item

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                            std::size_t padding);
    static LayerSpec conv_transpose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                                      std::size_t padding, std::size_t out_h, std::size_t out_w);
    static LayerSpec batchnorm(std::size_t features);
    static LayerSpec act(Activation a);
    static LayerSpec flatten();
    static LayerSpec reshape(Shape per_item);

    /// One-line text form, e.g. "dense 53 64" or "conv2d 1 8 3 2 1".
    std::string to_string() const;
    static LayerSpec parse(std::string_view text);
    bool operator==(const LayerSpec&) const = default;
};

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool regularized = false; ///< weights carry the L2 penalty, biases and batchnorm terms do not
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerSpec spec() const = 0;
    /// Per-item output shape; throws InputError when `in` is incompatible.
    virtual Shape output_shape(const Shape& in) const = 0;
    /// Caches what backward needs.
    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    /// Eval-mode output without touching any cache; safe to call concurrently.
    virtual Tensor infer(const Tensor& x) const = 0;
    /// Accumulates parameter gradients and returns the input gradient.
    /// Throws InputError when no forward pass is cached.
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    /// Non-trainable state saved with checkpoints (batchnorm running statistics).
    virtual std::vector<std::pair<std::string, std::vector<double>*>> buffers() { return {}; }
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

} // namespace riverflow::nn
