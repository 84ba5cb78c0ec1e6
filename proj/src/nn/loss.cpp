#include "riverflow/nn/loss.hpp"

#include "riverflow/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace riverflow::nn {

namespace {

void same_size(const Tensor& a, const Tensor& b, const char* what)
{
    if (a.size() != b.size())
        throw InputError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
}

double clamp_log_var(double v)
{
    return std::clamp(v, kLogVarMin, kLogVarMax);
}

bool inside_clamp(double v)
{
    return v > kLogVarMin && v < kLogVarMax;
}

} // namespace

double mse_loss(const Tensor& y, const Tensor& target, Tensor* grad)
{
    same_size(y, target, "mse_loss");
    const double n = double(y.size());
    double sum = 0.0;
    if (grad) *grad = Tensor(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - target[i];
        sum += d * d;
        if (grad) (*grad)[i] = 2.0 * d / n;
    }
    return sum / n;
}

double l2_penalty(const std::vector<Param*>& params, double lambda, bool accumulate_grad)
{
    if (lambda == 0.0) return 0.0;
    double sum = 0.0;
    for (Param* p : params) {
        if (!p->regularized) continue;
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            sum += p->value[i] * p->value[i];
            if (accumulate_grad) p->grad[i] += lambda * p->value[i];
        }
    }
    return 0.5 * lambda * sum;
}

double kl_standard_normal(const Tensor& mu, const Tensor& log_var, double weight, Tensor* grad_mu,
                          Tensor* grad_log_var)
{
    same_size(mu, log_var, "kl_standard_normal");
    const double batch = mu.rank() > 0 && mu.dim(0) > 0 ? double(mu.dim(0)) : 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double lv = clamp_log_var(log_var[i]);
        const double e = std::exp(lv);
        sum += -0.5 * (1.0 + lv - mu[i] * mu[i] - e);
        if (grad_mu) (*grad_mu)[i] += weight * mu[i] / batch;
        if (grad_log_var && inside_clamp(log_var[i])) (*grad_log_var)[i] += weight * 0.5 * (e - 1.0) / batch;
    }
    return sum / batch;
}

Tensor reparameterize(const Tensor& mu, const Tensor& log_var, const Tensor& eps)
{
    same_size(mu, log_var, "reparameterize");
    same_size(mu, eps, "reparameterize");
    Tensor z(mu.shape());
    for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(0.5 * clamp_log_var(log_var[i])) * eps[i];
    return z;
}

void reparameterize_backward(const Tensor& log_var, const Tensor& eps, const Tensor& grad_z, Tensor& grad_mu,
                             Tensor& grad_log_var)
{
    for (std::size_t i = 0; i < grad_z.size(); ++i) {
        grad_mu[i] += grad_z[i];
        if (inside_clamp(log_var[i]))
            grad_log_var[i] += grad_z[i] * eps[i] * 0.5 * std::exp(0.5 * log_var[i]);
    }
}

Tensor standard_normal_like(const Tensor& like, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor eps(like.shape());
    for (auto& v : eps.values()) v = normal(rng);
    return eps;
}

Tensor gaussian_reparam_sample(const Tensor& mu, const Tensor& log_var, std::uint64_t seed)
{
    return reparameterize(mu, log_var, standard_normal_like(mu, seed));
}

} // namespace riverflow::nn
