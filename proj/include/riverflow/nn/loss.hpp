#pragma once

#include "riverflow/nn/layers.hpp"
#include "riverflow/nn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace riverflow::nn {

/// mean((y - t)^2) over every entry. Writes d/dy into `grad` when given.
double mse_loss(const Tensor& y, const Tensor& target, Tensor* grad = nullptr);

/// (lambda / 2) * sum of squared regularized parameters; adds lambda * w to
/// their gradients when `accumulate_grad` is set.
double l2_penalty(const std::vector<Param*>& params, double lambda, bool accumulate_grad);

constexpr double kLogVarMin = -30.0;
constexpr double kLogVarMax = 30.0;

/// Batch mean of KL(N(mu, diag exp(log_var)) || N(0, I)). Adds
/// weight * dKL/dmu and weight * dKL/dlog_var to the gradients when given.
double kl_standard_normal(const Tensor& mu, const Tensor& log_var, double weight = 1.0, Tensor* grad_mu = nullptr,
                          Tensor* grad_log_var = nullptr);

/// z = mu + exp(0.5 log_var) * eps with log_var clamped to [-30, 30].
Tensor reparameterize(const Tensor& mu, const Tensor& log_var, const Tensor& eps);
/// Adds dz-induced gradients to grad_mu and grad_log_var (none through the clamp).
void reparameterize_backward(const Tensor& log_var, const Tensor& eps, const Tensor& grad_z, Tensor& grad_mu,
                             Tensor& grad_log_var);
/// Standard normal noise shaped like `like`, deterministic in `seed`.
Tensor standard_normal_like(const Tensor& like, std::uint64_t seed);
/// reparameterize with noise drawn from `seed`.
Tensor gaussian_reparam_sample(const Tensor& mu, const Tensor& log_var, std::uint64_t seed);

} // namespace riverflow::nn
