#include "riverflow/nn/layers.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riverflow::nn {

using simd::Trans;

namespace {

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

std::size_t batch_of(const Tensor& x)
{
    if (x.rank() < 1) throw InputError("layer input needs a batch dimension");
    return x.dim(0);
}

Shape item_shape(const Tensor& x)
{
    return Shape(x.shape().begin() + 1, x.shape().end());
}

Shape with_batch(std::size_t batch, const Shape& item)
{
    Shape s{batch};
    s.insert(s.end(), item.begin(), item.end());
    return s;
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p)
{
    if (in + 2 * p < k) throw InputError("convolution kernel larger than padded input");
    return (in + 2 * p - k) / s + 1;
}

// col[(c k + ki) k + kj][oh Wo + ow] = x[c][oh s - p + ki][ow s - p + kj], zero outside.
void im2col(const double* x, std::size_t c_n, std::size_t h, std::size_t w, std::size_t k, std::size_t s,
            std::size_t p, std::size_t ho, std::size_t wo, double* col)
{
    const std::size_t hw_o = ho * wo;
    for (std::size_t c = 0; c < c_n; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* row = col + ((c * k + ki) * k + kj) * hw_o;
                for (std::size_t oh = 0; oh < ho; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * s + ki) - static_cast<std::ptrdiff_t>(p);
                    for (std::size_t ow = 0; ow < wo; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * s + kj) - static_cast<std::ptrdiff_t>(p);
                        const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(h) &&
                                            iw < static_cast<std::ptrdiff_t>(w);
                        row[oh * wo + ow] = inside ? x[(c * h + std::size_t(ih)) * w + std::size_t(iw)] : 0.0;
                    }
                }
            }
}

// Adjoint of im2col: accumulates into x, which the caller zeroes.
void col2im(const double* col, std::size_t c_n, std::size_t h, std::size_t w, std::size_t k, std::size_t s,
            std::size_t p, std::size_t ho, std::size_t wo, double* x)
{
    const std::size_t hw_o = ho * wo;
    for (std::size_t c = 0; c < c_n; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* row = col + ((c * k + ki) * k + kj) * hw_o;
                for (std::size_t oh = 0; oh < ho; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * s + ki) - static_cast<std::ptrdiff_t>(p);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t ow = 0; ow < wo; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * s + kj) - static_cast<std::ptrdiff_t>(p);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                        x[(c * h + std::size_t(ih)) * w + std::size_t(iw)] += row[oh * wo + ow];
                    }
                }
            }
}

void require_cache(bool cached, const char* layer)
{
    if (!cached) throw InputError(std::string(layer) + ": backward called without a cached forward pass");
}

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out) : in_(in), out_(out)
    {
        w_ = {"weight", Tensor({out, in}), Tensor({out, in}), true};
        b_ = {"bias", Tensor({out}), Tensor({out}), false};
    }
    LayerSpec spec() const override { return LayerSpec::dense(in_, out_); }
    Shape output_shape(const Shape& in) const override
    {
        if (shape_size(in) != in_)
            throw InputError("dense layer expects " + std::to_string(in_) + " inputs, got " + shape_string(in));
        return {out_};
    }
    Tensor forward(const Tensor& x, Mode) override
    {
        Tensor y = infer(x);
        x_ = x;
        cached_ = true;
        return y;
    }
    Tensor infer(const Tensor& x) const override
    {
        const std::size_t batch = batch_of(x);
        output_shape(item_shape(x));
        Tensor y({batch, out_});
        simd::gemm(Trans::no, Trans::yes, batch, out_, in_, 1.0, x.data(), in_, w_.value.data(), in_, 0.0, y.data(),
                   out_);
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t o = 0; o < out_; ++o) y[n * out_ + o] += b_.value[o];
        return y;
    }
    Tensor backward(const Tensor& dy) override
    {
        require_cache(cached_, "dense");
        const std::size_t batch = x_.dim(0);
        if (dy.size() != batch * out_) throw InputError("dense: output gradient has the wrong size");
        simd::gemm(Trans::yes, Trans::no, out_, in_, batch, 1.0, dy.data(), out_, x_.data(), in_, 1.0,
                   w_.grad.data(), in_);
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t o = 0; o < out_; ++o) b_.grad[o] += dy[n * out_ + o];
        Tensor dx(x_.shape());
        simd::gemm(Trans::no, Trans::no, batch, in_, out_, 1.0, dy.data(), out_, w_.value.data(), in_, 0.0, dx.data(),
                   in_);
        return dx;
    }
    std::vector<Param*> params() override { return {&w_, &b_}; }

private:
    std::size_t in_, out_;
    Param w_, b_;
    Tensor x_;
    bool cached_ = false;
};

struct Geometry {
    std::size_t c, h, w;
};

Geometry chw(const Shape& in, std::size_t channels, const char* layer)
{
    if (in.size() != 3 || in[0] != channels)
        throw InputError(std::string(layer) + " expects (" + std::to_string(channels) + ",H,W) input, got " +
                         shape_string(in));
    return {in[0], in[1], in[2]};
}

class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t s, std::size_t p)
        : in_(in_ch), out_(out_ch), k_(k), s_(s), p_(p)
    {
        require(k >= 1 && s >= 1, "conv2d kernel and stride must be positive");
        w_ = {"weight", Tensor({out_ch, in_ch * k * k}), Tensor({out_ch, in_ch * k * k}), true};
        b_ = {"bias", Tensor({out_ch}), Tensor({out_ch}), false};
    }
    LayerSpec spec() const override { return LayerSpec::conv2d(in_, out_, k_, s_, p_); }
    Shape output_shape(const Shape& in) const override
    {
        const auto g = chw(in, in_, "conv2d");
        return {out_, conv_out(g.h, k_, s_, p_), conv_out(g.w, k_, s_, p_)};
    }
    Tensor forward(const Tensor& x, Mode) override
    {
        const auto g = chw(item_shape(x), in_, "conv2d");
        h_ = g.h;
        w_in_ = g.w;
        ho_ = conv_out(g.h, k_, s_, p_);
        wo_ = conv_out(g.w, k_, s_, p_);
        batch_ = batch_of(x);
        cols_.assign(batch_ * in_ * k_ * k_ * ho_ * wo_, 0.0);
        Tensor y = run(x, cols_.data(), true);
        cached_ = true;
        return y;
    }
    Tensor infer(const Tensor& x) const override
    {
        const auto g = chw(item_shape(x), in_, "conv2d");
        std::vector<double> col(in_ * k_ * k_ * conv_out(g.h, k_, s_, p_) * conv_out(g.w, k_, s_, p_));
        return run(x, col.data(), false);
    }
    Tensor backward(const Tensor& dy) override
    {
        require_cache(cached_, "conv2d");
        const std::size_t ckk = in_ * k_ * k_, hw = ho_ * wo_;
        if (dy.size() != batch_ * out_ * hw) throw InputError("conv2d: output gradient has the wrong size");
        Tensor dx({batch_, in_, h_, w_in_});
        std::vector<double> dcol(ckk * hw);
        for (std::size_t n = 0; n < batch_; ++n) {
            const double* dyn = dy.data() + n * out_ * hw;
            const double* col = cols_.data() + n * ckk * hw;
            simd::gemm(Trans::no, Trans::yes, out_, ckk, hw, 1.0, dyn, hw, col, hw, 1.0, w_.grad.data(), ckk);
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t t = 0; t < hw; ++t) b_.grad[o] += dyn[o * hw + t];
            simd::gemm(Trans::yes, Trans::no, ckk, hw, out_, 1.0, w_.value.data(), ckk, dyn, hw, 0.0, dcol.data(), hw);
            col2im(dcol.data(), in_, h_, w_in_, k_, s_, p_, ho_, wo_, dx.data() + n * in_ * h_ * w_in_);
        }
        return dx;
    }
    std::vector<Param*> params() override { return {&w_, &b_}; }

private:
    // With keep_cols every item gets its own slice of `cols`; otherwise one
    // slice is reused.
    Tensor run(const Tensor& x, double* cols, bool keep_cols) const
    {
        const std::size_t batch = batch_of(x);
        const auto g = chw(item_shape(x), in_, "conv2d");
        const std::size_t ho = conv_out(g.h, k_, s_, p_), wo = conv_out(g.w, k_, s_, p_);
        const std::size_t ckk = in_ * k_ * k_, hw = ho * wo;
        Tensor y({batch, out_, ho, wo});
        for (std::size_t n = 0; n < batch; ++n) {
            double* col = cols + (keep_cols ? n * ckk * hw : 0);
            im2col(x.data() + n * in_ * g.h * g.w, in_, g.h, g.w, k_, s_, p_, ho, wo, col);
            double* yn = y.data() + n * out_ * hw;
            simd::gemm(Trans::no, Trans::no, out_, hw, ckk, 1.0, w_.value.data(), ckk, col, hw, 0.0, yn, hw);
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t t = 0; t < hw; ++t) yn[o * hw + t] += b_.value[o];
        }
        return y;
    }

    std::size_t in_, out_, k_, s_, p_;
    std::size_t h_ = 0, w_in_ = 0, ho_ = 0, wo_ = 0, batch_ = 0;
    Param w_, b_;
    std::vector<double> cols_;
    bool cached_ = false;
};

// Adjoint of a strided convolution from (out_h, out_w) down to the input size.
class ConvTranspose2d final : public Layer {
public:
    ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t s, std::size_t p,
                    std::size_t out_h, std::size_t out_w)
        : in_(in_ch), out_(out_ch), k_(k), s_(s), p_(p), oh_(out_h), ow_(out_w)
    {
        require(k >= 1 && s >= 1, "conv_transpose2d kernel and stride must be positive");
        require(out_h >= 1 && out_w >= 1, "conv_transpose2d needs an explicit output size");
        w_ = {"weight", Tensor({in_ch, out_ch * k * k}), Tensor({in_ch, out_ch * k * k}), true};
        b_ = {"bias", Tensor({out_ch}), Tensor({out_ch}), false};
    }
    LayerSpec spec() const override { return LayerSpec::conv_transpose2d(in_, out_, k_, s_, p_, oh_, ow_); }
    Shape output_shape(const Shape& in) const override
    {
        const auto g = chw(in, in_, "conv_transpose2d");
        if (conv_out(oh_, k_, s_, p_) != g.h || conv_out(ow_, k_, s_, p_) != g.w)
            throw InputError("conv_transpose2d: input " + shape_string(in) + " does not map to output " +
                             std::to_string(oh_) + "x" + std::to_string(ow_));
        return {out_, oh_, ow_};
    }
    Tensor forward(const Tensor& x, Mode) override
    {
        Tensor y = infer(x);
        h_ = x.dim(2);
        w_in_ = x.dim(3);
        x_ = x;
        cached_ = true;
        return y;
    }
    Tensor infer(const Tensor& x) const override
    {
        const std::size_t batch = batch_of(x);
        output_shape(item_shape(x));
        const std::size_t h = x.dim(2), w = x.dim(3);
        const std::size_t ckk = out_ * k_ * k_, hw = h * w, ohw = oh_ * ow_;
        std::vector<double> col(ckk * hw);
        Tensor y({batch, out_, oh_, ow_});
        for (std::size_t n = 0; n < batch; ++n) {
            simd::gemm(Trans::yes, Trans::no, ckk, hw, in_, 1.0, w_.value.data(), ckk, x.data() + n * in_ * hw, hw,
                       0.0, col.data(), hw);
            double* yn = y.data() + n * out_ * ohw;
            col2im(col.data(), out_, oh_, ow_, k_, s_, p_, h, w, yn);
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t t = 0; t < ohw; ++t) yn[o * ohw + t] += b_.value[o];
        }
        return y;
    }
    Tensor backward(const Tensor& dy) override
    {
        require_cache(cached_, "conv_transpose2d");
        const std::size_t batch = x_.dim(0);
        const std::size_t ckk = out_ * k_ * k_, hw = h_ * w_in_, ohw = oh_ * ow_;
        if (dy.size() != batch * out_ * ohw) throw InputError("conv_transpose2d: output gradient has the wrong size");
        Tensor dx(x_.shape());
        std::vector<double> dcol(ckk * hw);
        for (std::size_t n = 0; n < batch; ++n) {
            const double* dyn = dy.data() + n * out_ * ohw;
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t t = 0; t < ohw; ++t) b_.grad[o] += dyn[o * ohw + t];
            im2col(dyn, out_, oh_, ow_, k_, s_, p_, h_, w_in_, dcol.data());
            simd::gemm(Trans::no, Trans::yes, in_, ckk, hw, 1.0, x_.data() + n * in_ * hw, hw, dcol.data(), hw, 1.0,
                       w_.grad.data(), ckk);
            simd::gemm(Trans::no, Trans::no, in_, hw, ckk, 1.0, w_.value.data(), ckk, dcol.data(), hw, 0.0,
                       dx.data() + n * in_ * hw, hw);
        }
        return dx;
    }
    std::vector<Param*> params() override { return {&w_, &b_}; }

private:
    std::size_t in_, out_, k_, s_, p_, oh_, ow_;
    std::size_t h_ = 0, w_in_ = 0;
    Param w_, b_;
    Tensor x_;
    bool cached_ = false;
};

// Normalizes dimension 1 of (batch, features, ...) over the batch and any
// trailing spatial dimensions.
class BatchNorm final : public Layer {
public:
    explicit BatchNorm(std::size_t features)
        : c_(features), running_mean_(features, 0.0), running_var_(features, 1.0)
    {
        gamma_ = {"gamma", Tensor({features}, 1.0), Tensor({features}), false};
        beta_ = {"beta", Tensor({features}), Tensor({features}), false};
    }
    LayerSpec spec() const override { return LayerSpec::batchnorm(c_); }
    Shape output_shape(const Shape& in) const override
    {
        if (in.empty() || in[0] != c_)
            throw InputError("batchnorm expects " + std::to_string(c_) + " features, got " + shape_string(in));
        return in;
    }
    Tensor forward(const Tensor& x, Mode mode) override
    {
        const std::size_t batch = batch_of(x);
        output_shape(item_shape(x));
        const std::size_t spatial = x.item_size() / c_;
        const std::size_t count = batch * spatial;
        mode_ = mode;
        xhat_ = Tensor(x.shape());
        inv_std_.assign(c_, 0.0);
        Tensor y(x.shape());
        for (std::size_t c = 0; c < c_; ++c) {
            double mean = 0.0, var = 0.0;
            if (mode == Mode::train) {
                for (std::size_t n = 0; n < batch; ++n)
                    for (std::size_t t = 0; t < spatial; ++t) mean += x[(n * c_ + c) * spatial + t];
                mean /= double(count);
                for (std::size_t n = 0; n < batch; ++n)
                    for (std::size_t t = 0; t < spatial; ++t) {
                        const double d = x[(n * c_ + c) * spatial + t] - mean;
                        var += d * d;
                    }
                var /= double(count);
                const double unbiased = count > 1 ? var * double(count) / double(count - 1) : var;
                running_mean_[c] = (1.0 - kBatchNormMomentum) * running_mean_[c] + kBatchNormMomentum * mean;
                running_var_[c] = (1.0 - kBatchNormMomentum) * running_var_[c] + kBatchNormMomentum * unbiased;
            } else {
                mean = running_mean_[c];
                var = running_var_[c];
            }
            const double inv = 1.0 / std::sqrt(var + kBatchNormEps);
            inv_std_[c] = inv;
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t t = 0; t < spatial; ++t) {
                    const std::size_t idx = (n * c_ + c) * spatial + t;
                    xhat_[idx] = (x[idx] - mean) * inv;
                    y[idx] = gamma_.value[c] * xhat_[idx] + beta_.value[c];
                }
        }
        cached_ = true;
        return y;
    }
    Tensor infer(const Tensor& x) const override
    {
        const std::size_t batch = batch_of(x);
        output_shape(item_shape(x));
        const std::size_t spatial = x.item_size() / c_;
        Tensor y(x.shape());
        for (std::size_t c = 0; c < c_; ++c) {
            const double inv = 1.0 / std::sqrt(running_var_[c] + kBatchNormEps);
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t t = 0; t < spatial; ++t) {
                    const std::size_t idx = (n * c_ + c) * spatial + t;
                    y[idx] = gamma_.value[c] * ((x[idx] - running_mean_[c]) * inv) + beta_.value[c];
                }
        }
        return y;
    }
    Tensor backward(const Tensor& dy) override
    {
        require_cache(cached_, "batchnorm");
        if (dy.size() != xhat_.size()) throw InputError("batchnorm: output gradient has the wrong size");
        const std::size_t batch = xhat_.dim(0);
        const std::size_t spatial = xhat_.item_size() / c_;
        const double count = double(batch * spatial);
        Tensor dx(xhat_.shape());
        for (std::size_t c = 0; c < c_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t t = 0; t < spatial; ++t) {
                    const std::size_t idx = (n * c_ + c) * spatial + t;
                    sum_dy += dy[idx];
                    sum_dy_xhat += dy[idx] * xhat_[idx];
                }
            gamma_.grad[c] += sum_dy_xhat;
            beta_.grad[c] += sum_dy;
            const double g = gamma_.value[c] * inv_std_[c];
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t t = 0; t < spatial; ++t) {
                    const std::size_t idx = (n * c_ + c) * spatial + t;
                    dx[idx] = mode_ == Mode::train
                                  ? g * (dy[idx] - sum_dy / count - xhat_[idx] * sum_dy_xhat / count)
                                  : g * dy[idx];
                }
        }
        return dx;
    }
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::pair<std::string, std::vector<double>*>> buffers() override
    {
        return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
    }

private:
    std::size_t c_;
    Param gamma_, beta_;
    std::vector<double> running_mean_, running_var_;
    std::vector<double> inv_std_;
    Tensor xhat_;
    Mode mode_ = Mode::train;
    bool cached_ = false;
};

class ActivationLayer final : public Layer {
public:
    explicit ActivationLayer(Activation a) : a_(a) {}
    LayerSpec spec() const override { return LayerSpec::act(a_); }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, Mode) override
    {
        y_ = infer(x);
        x_ = x;
        cached_ = true;
        return y_;
    }
    Tensor infer(const Tensor& x) const override
    {
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = x[i];
            switch (a_) {
            case Activation::tanh: y[i] = std::tanh(v); break;
            case Activation::relu: y[i] = v > 0.0 ? v : 0.0; break;
            case Activation::sigmoid: y[i] = 1.0 / (1.0 + std::exp(-v)); break;
            case Activation::linear: y[i] = v; break;
            }
        }
        return y;
    }
    Tensor backward(const Tensor& dy) override
    {
        require_cache(cached_, "activation");
        if (dy.size() != y_.size()) throw InputError("activation: output gradient has the wrong size");
        Tensor dx(y_.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) {
            switch (a_) {
            case Activation::tanh: dx[i] = dy[i] * (1.0 - y_[i] * y_[i]); break;
            case Activation::relu: dx[i] = x_[i] > 0.0 ? dy[i] : 0.0; break;
            case Activation::sigmoid: dx[i] = dy[i] * y_[i] * (1.0 - y_[i]); break;
            case Activation::linear: dx[i] = dy[i]; break;
            }
        }
        return dx;
    }

private:
    Activation a_;
    Tensor x_, y_;
    bool cached_ = false;
};

class Reshape final : public Layer {
public:
    explicit Reshape(Shape target, bool flatten) : target_(std::move(target)), flatten_(flatten) {}
    LayerSpec spec() const override { return flatten_ ? LayerSpec::flatten() : LayerSpec::reshape(target_); }
    Shape output_shape(const Shape& in) const override
    {
        if (flatten_) return {shape_size(in)};
        if (shape_size(in) != shape_size(target_))
            throw InputError("cannot reshape " + shape_string(in) + " to " + shape_string(target_));
        return target_;
    }
    Tensor forward(const Tensor& x, Mode) override
    {
        in_shape_ = x.shape();
        cached_ = true;
        return infer(x);
    }
    Tensor infer(const Tensor& x) const override
    {
        return x.reshaped(with_batch(batch_of(x), output_shape(item_shape(x))));
    }
    Tensor backward(const Tensor& dy) override
    {
        require_cache(cached_, flatten_ ? "flatten" : "reshape");
        return dy.reshaped(in_shape_);
    }

private:
    Shape target_;
    bool flatten_;
    Shape in_shape_;
    bool cached_ = false;
};

} // namespace

std::string_view to_string(Activation a)
{
    switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
    }
    return "linear";
}

Activation parse_activation(std::string_view text)
{
    if (text == "tanh") return Activation::tanh;
    if (text == "relu") return Activation::relu;
    if (text == "sigmoid") return Activation::sigmoid;
    if (text == "linear") return Activation::linear;
    throw InputError("unknown activation '" + std::string(text) + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out)
{
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in = in;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                            std::size_t padding)
{
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in = in_ch;
    s.out = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::conv_transpose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                                      std::size_t padding, std::size_t out_h, std::size_t out_w)
{
    LayerSpec s = conv2d(in_ch, out_ch, kernel, stride, padding);
    s.kind = LayerKind::conv_transpose2d;
    s.out_h = out_h;
    s.out_w = out_w;
    return s;
}

LayerSpec LayerSpec::batchnorm(std::size_t features)
{
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    s.in = features;
    return s;
}

LayerSpec LayerSpec::act(Activation a)
{
    LayerSpec s;
    s.kind = LayerKind::activation;
    s.activation = a;
    return s;
}

LayerSpec LayerSpec::flatten()
{
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::reshape(Shape per_item)
{
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.shape = std::move(per_item);
    return s;
}

std::string LayerSpec::to_string() const
{
    std::ostringstream out;
    switch (kind) {
    case LayerKind::dense: out << "dense " << in << " " << this->out; break;
    case LayerKind::conv2d:
        out << "conv2d " << in << " " << this->out << " " << kernel << " " << stride << " " << padding;
        break;
    case LayerKind::conv_transpose2d:
        out << "conv_transpose2d " << in << " " << this->out << " " << kernel << " " << stride << " " << padding
            << " " << out_h << " " << out_w;
        break;
    case LayerKind::batchnorm: out << "batchnorm " << in; break;
    case LayerKind::activation: out << "activation " << nn::to_string(activation); break;
    case LayerKind::flatten: out << "flatten"; break;
    case LayerKind::reshape:
        out << "reshape";
        for (auto d : shape) out << " " << d;
        break;
    }
    return out.str();
}

LayerSpec LayerSpec::parse(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string kind;
    in >> kind;
    auto read = [&](std::size_t& v) {
        if (!(in >> v)) throw FormatError("bad layer description '" + std::string(text) + "'");
    };
    LayerSpec s;
    if (kind == "dense") {
        s.kind = LayerKind::dense;
        read(s.in);
        read(s.out);
    } else if (kind == "conv2d" || kind == "conv_transpose2d") {
        s.kind = kind == "conv2d" ? LayerKind::conv2d : LayerKind::conv_transpose2d;
        read(s.in);
        read(s.out);
        read(s.kernel);
        read(s.stride);
        read(s.padding);
        if (s.kind == LayerKind::conv_transpose2d) {
            read(s.out_h);
            read(s.out_w);
        }
    } else if (kind == "batchnorm") {
        s.kind = LayerKind::batchnorm;
        read(s.in);
    } else if (kind == "activation") {
        s.kind = LayerKind::activation;
        std::string a;
        in >> a;
        s.activation = parse_activation(a);
    } else if (kind == "flatten") {
        s.kind = LayerKind::flatten;
    } else if (kind == "reshape") {
        s.kind = LayerKind::reshape;
        std::size_t d;
        while (in >> d) s.shape.push_back(d);
        if (s.shape.empty()) throw FormatError("reshape layer without a target shape");
    } else {
        throw FormatError("unknown layer kind '" + kind + "'");
    }
    return s;
}

std::unique_ptr<Layer> make_layer(const LayerSpec& s)
{
    switch (s.kind) {
    case LayerKind::dense: return std::make_unique<Dense>(s.in, s.out);
    case LayerKind::conv2d: return std::make_unique<Conv2d>(s.in, s.out, s.kernel, s.stride, s.padding);
    case LayerKind::conv_transpose2d:
        return std::make_unique<ConvTranspose2d>(s.in, s.out, s.kernel, s.stride, s.padding, s.out_h, s.out_w);
    case LayerKind::batchnorm: return std::make_unique<BatchNorm>(s.in);
    case LayerKind::activation: return std::make_unique<ActivationLayer>(s.activation);
    case LayerKind::flatten: return std::make_unique<Reshape>(Shape{}, true);
    case LayerKind::reshape: return std::make_unique<Reshape>(s.shape, false);
    }
    throw InputError("unknown layer kind");
}

} // namespace riverflow::nn
