#pragma once

#include "riverflow/nn/layers.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace riverflow::nn {

enum class OptimizerKind { adam, sgd, gd };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view text);

struct TrainSpec {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double decay = 1e-3; ///< lr_t = lr / (1 + decay t)
    std::size_t batch_size = 32;
    double l2_coeff = 0.0;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double kl_weight = 1e-3; ///< SVE only

    void validate() const;
};

/// Applies one update per call to every parameter in the list it was first
/// called with. Adam uses beta1 0.9, beta2 0.999, epsilon 1e-8 and bias
/// correction; sgd and gd take plain gradient steps (gd is sgd on the full
/// batch, which the caller arranges).
class Optimizer {
public:
    explicit Optimizer(const TrainSpec& spec);
    void step(const std::vector<Param*>& params);
    std::size_t steps_taken() const { return t_; }
    double current_learning_rate() const;

    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double epsilon = 1e-8;

private:
    TrainSpec spec_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace riverflow::nn
