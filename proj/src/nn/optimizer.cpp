#include "riverflow/nn/optimizer.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/simd/kernels.hpp"

#include <cmath>

namespace riverflow::nn {

std::string_view to_string(OptimizerKind k)
{
    switch (k) {
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::gd: return "gd";
    }
    return "adam";
}

OptimizerKind parse_optimizer(std::string_view text)
{
    if (text == "adam") return OptimizerKind::adam;
    if (text == "sgd") return OptimizerKind::sgd;
    if (text == "gd") return OptimizerKind::gd;
    throw InputError("unknown optimizer '" + std::string(text) + "'");
}

void TrainSpec::validate() const
{
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be positive");
    require(decay >= 0.0, "decay must be non-negative");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(l2_coeff >= 0.0, "l2_coeff must be non-negative");
    require(kl_weight >= 0.0, "kl_weight must be non-negative");
}

Optimizer::Optimizer(const TrainSpec& spec) : spec_(spec)
{
    spec_.validate();
}

double Optimizer::current_learning_rate() const
{
    return spec_.learning_rate / (1.0 + spec_.decay * double(t_));
}

void Optimizer::step(const std::vector<Param*>& params)
{
    const double lr = current_learning_rate();
    if (spec_.optimizer == OptimizerKind::adam) {
        if (m_.empty()) {
            for (Param* p : params) {
                m_.emplace_back(p->value.size(), 0.0);
                v_.emplace_back(p->value.size(), 0.0);
            }
        }
        if (m_.size() != params.size()) throw InputError("optimizer called with a different parameter list");
        const double k = double(t_ + 1);
        const simd::AdamStep s{lr, beta1, beta2, epsilon, 1.0 - std::pow(beta1, k), 1.0 - std::pow(beta2, k)};
        for (std::size_t i = 0; i < params.size(); ++i)
            simd::adam_update(params[i]->value.values(), params[i]->grad.values(), m_[i], v_[i], s);
    } else {
        for (Param* p : params) simd::axpy(-lr, p->grad.values(), p->value.values());
    }
    ++t_;
}

} // namespace riverflow::nn
