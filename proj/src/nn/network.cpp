#include "riverflow/nn/network.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/common/seed.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace riverflow::nn {

Sequential::Sequential(Shape input_item_shape, const std::vector<LayerSpec>& specs)
    : input_shape_(std::move(input_item_shape))
{
    Shape shape = input_shape_;
    for (std::size_t l = 0; l < specs.size(); ++l) {
        auto layer = make_layer(specs[l]);
        try {
            shape = layer->output_shape(shape);
        } catch (const InputError& e) {
            throw InputError("layer " + std::to_string(l) + " (" + specs[l].to_string() + "): " + e.what());
        }
        layers_.push_back(std::move(layer));
    }
    output_shape_ = shape;
}

Sequential::Sequential(const Sequential& other) : Sequential(other.input_shape_, other.specs())
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto dst = layers_[l]->params();
        auto src = other.layers_[l]->params();
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p]->value = src[p]->value;
        auto dbuf = layers_[l]->buffers();
        auto sbuf = other.layers_[l]->buffers();
        for (std::size_t b = 0; b < dbuf.size(); ++b) *dbuf[b].second = *sbuf[b].second;
    }
}

Sequential& Sequential::operator=(const Sequential& other)
{
    if (this != &other) {
        Sequential copy(other);
        *this = std::move(copy);
    }
    return *this;
}

void Sequential::init(std::uint64_t seed)
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec s = layers_[l]->spec();
        std::size_t fan_in = 0, fan_out = 0;
        if (s.kind == LayerKind::dense) {
            fan_in = s.in;
            fan_out = s.out;
        } else if (s.kind == LayerKind::conv2d || s.kind == LayerKind::conv_transpose2d) {
            fan_in = s.in * s.kernel * s.kernel;
            fan_out = s.out * s.kernel * s.kernel;
        } else {
            continue;
        }
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        std::mt19937_64 rng(derive_seed(seed, "nn/init", l));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Param* p : layers_[l]->params()) {
            if (p->regularized)
                for (auto& v : p->value.values()) v = u(rng);
            else
                p->value.fill(0.0);
        }
    }
}

Tensor Sequential::forward(const Tensor& x, Mode mode)
{
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode);
    return h;
}

Tensor Sequential::infer(const Tensor& x) const
{
    Tensor h = x;
    for (const auto& layer : layers_) h = layer->infer(h);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out)
{
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::zero_grad()
{
    for (Param* p : params()) p->grad.fill(0.0);
}

std::vector<Param*> Sequential::params()
{
    std::vector<Param*> out;
    for (auto& layer : layers_)
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

std::size_t Sequential::param_count() const
{
    std::size_t n = 0;
    for (const auto& layer : layers_)
        for (Param* p : layer->params()) n += p->value.size();
    return n;
}

std::vector<LayerSpec> Sequential::specs() const
{
    std::vector<LayerSpec> out;
    for (const auto& layer : layers_) out.push_back(layer->spec());
    return out;
}

void Sequential::store(Checkpoint& ck, const std::string& prefix) const
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string base = prefix + "." + std::to_string(l) + ".";
        for (Param* p : layers_[l]->params())
            ck.add(base + p->name, std::vector<double>(p->value.values().begin(), p->value.values().end()));
        for (auto& [name, buf] : layers_[l]->buffers()) ck.add(base + name, *buf);
    }
}

void Sequential::restore(const Checkpoint& ck, const std::string& prefix)
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string base = prefix + "." + std::to_string(l) + ".";
        for (Param* p : layers_[l]->params()) {
            const auto& v = ck.block(base + p->name);
            if (v.size() != p->value.size()) throw FormatError("checkpoint block " + base + p->name + " has wrong size");
            std::copy(v.begin(), v.end(), p->value.values().begin());
        }
        for (auto& [name, buf] : layers_[l]->buffers()) {
            const auto& v = ck.block(base + name);
            if (v.size() != buf->size()) throw FormatError("checkpoint block " + base + name + " has wrong size");
            *buf = v;
        }
    }
}

} // namespace riverflow::nn
