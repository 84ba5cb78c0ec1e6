#include "riverflow/inversion/inversion.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/common/parallel.hpp"

#include <cmath>

namespace riverflow::inversion {

using geostat::LowRankGaussian;

namespace {

struct Iterate {
    Eigen::VectorXd s;
    Eigen::VectorXd h;
    double objective = 0.0;
};

Eigen::VectorXd field_of(const LowRankGaussian& prior, const Eigen::VectorXd& s)
{
    const auto mean = prior.mean().values();
    Eigen::VectorXd x = prior.factor() * s;
    for (Eigen::Index n = 0; n < x.size(); ++n) x(n) += mean[static_cast<std::size_t>(n)];
    return x;
}

Iterate evaluate(const ForwardMap& forward, const Eigen::VectorXd& data, const LowRankGaussian& prior,
                 const Eigen::VectorXd& s, double sigma)
{
    Iterate it{s, forward(field_of(prior, s)), 0.0};
    if (it.h.size() != data.size()) throw InputError("forward map returned the wrong number of observations");
    it.objective = 0.5 * (data - it.h).squaredNorm() / (sigma * sigma) + 0.5 * s.squaredNorm();
    return it;
}

Eigen::MatrixXd jacobian(const ForwardMap& forward, const LowRankGaussian& prior, const Iterate& at, double step)
{
    const Eigen::Index p = at.s.size();
    Eigen::MatrixXd j(at.h.size(), p);
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t c) {
        Eigen::VectorXd s = at.s;
        s(static_cast<Eigen::Index>(c)) += step;
        const Eigen::VectorXd h = forward(field_of(prior, s));
        j.col(static_cast<Eigen::Index>(c)) = (h - at.h) / step;
    });
    return j;
}

} // namespace

void InversionConfig::validate() const
{
    require(n_pc >= 1, "n_pc must be at least 1");
    require(obs_noise_sigma > 0.0 && std::isfinite(obs_noise_sigma), "obs_noise_sigma must be positive");
    require(fd_step > 0.0, "fd_step must be positive");
    require(damping >= 0.0, "damping must be non-negative");
}

InversionResult invert_with_forward(const ForwardMap& forward, const Eigen::VectorXd& data,
                                    const LowRankGaussian& full_prior, const InversionConfig& cfg)
{
    cfg.validate();
    if (full_prior.rank() < cfg.n_pc)
        throw InputError("prior rank " + std::to_string(full_prior.rank()) + " is below n_pc " +
                         std::to_string(cfg.n_pc));
    const LowRankGaussian prior = full_prior.truncated(cfg.n_pc);
    const auto p = static_cast<Eigen::Index>(cfg.n_pc);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);

    InversionResult out;
    if (data.size() == 0) {
        out.posterior = prior;
        out.coef_mean = Eigen::VectorXd::Zero(p);
        out.coef_covariance = identity;
        return out;
    }

    const double sigma2 = cfg.obs_noise_sigma * cfg.obs_noise_sigma;
    Iterate current = evaluate(forward, data, prior, Eigen::VectorXd::Zero(p), cfg.obs_noise_sigma);
    out.objective.push_back(current.objective);
    Eigen::MatrixXd j = jacobian(forward, prior, current, cfg.fd_step);
    double lambda = cfg.damping;
    bool any_accepted = false;

    for (std::size_t iter = 0; iter < cfg.max_gn_iter; ++iter) {
        out.iterations = iter + 1;
        const Eigen::MatrixXd normal = j.transpose() * j / sigma2 + identity;
        const Eigen::VectorXd gradient = j.transpose() * (data - current.h) / sigma2 - current.s;

        bool accepted = false;
        Eigen::VectorXd step;
        for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
            step = (normal + lambda * identity).ldlt().solve(gradient);
            if (!step.allFinite()) throw SolveError("Gauss-Newton system is singular");
            Iterate trial = evaluate(forward, data, prior, current.s + step, cfg.obs_noise_sigma);
            if (trial.objective <= current.objective) {
                current = std::move(trial);
                lambda *= 0.5;
                accepted = true;
            } else {
                lambda = std::max(lambda, 1e-6) * 10.0;
            }
        }
        if (!accepted) break;
        any_accepted = true;
        out.objective.push_back(current.objective);
        j = jacobian(forward, prior, current, cfg.fd_step);
        if (step.norm() < cfg.step_tol) break;
    }
    out.improved = any_accepted;

    const Eigen::MatrixXd precision = j.transpose() * j / sigma2 + identity;
    out.coef_covariance = precision.ldlt().solve(identity);
    out.coef_covariance = 0.5 * (out.coef_covariance + out.coef_covariance.transpose()).eval();
    const Eigen::LLT<Eigen::MatrixXd> chol(out.coef_covariance);
    if (chol.info() != Eigen::Success) throw SolveError("posterior coefficient covariance is not positive definite");
    out.coef_mean = current.s;

    const Eigen::VectorXd x = field_of(prior, current.s);
    std::vector<double> mean(x.data(), x.data() + x.size());
    out.posterior = LowRankGaussian(grid::ScalarField(prior.shape(), std::move(mean), grid::FieldKind::bathymetry),
                                    prior.factor() * Eigen::MatrixXd(chol.matrixL()));
    return out;
}

InversionResult invert(const oracle::ObservationSet& obs, const grid::BoundaryCondition& bc,
                       const grid::RiverGrid& grid, const LowRankGaussian& prior, const InversionConfig& cfg,
                       const oracle::OracleConfig& oracle_cfg)
{
    if (!(obs.shape.n_across == grid.n_across() && obs.shape.n_along == grid.n_along()))
        throw InputError("observation grid does not match the river grid");
    if (!(prior.shape().n_across == grid.n_across() && prior.shape().n_along == grid.n_along()))
        throw InputError("prior grid does not match the river grid");
    const auto k = static_cast<Eigen::Index>(obs.size());
    Eigen::VectorXd data(2 * k);
    for (Eigen::Index t = 0; t < k; ++t) {
        data(t) = obs.easting[static_cast<std::size_t>(t)];
        data(k + t) = obs.northing[static_cast<std::size_t>(t)];
    }
    const grid::GridShape shape = prior.shape();
    ForwardMap forward = [&](const Eigen::VectorXd& x) {
        grid::ScalarField bed(shape, std::vector<double>(x.data(), x.data() + x.size()), grid::FieldKind::bathymetry);
        const auto state = oracle::solve_steady(grid, bed, bc, oracle_cfg);
        Eigen::VectorXd h(2 * k);
        for (Eigen::Index t = 0; t < k; ++t) {
            const std::size_t node = obs.locations[static_cast<std::size_t>(t)];
            h(t) = state.velocity.easting()[node];
            h(k + t) = state.velocity.northing()[node];
        }
        return h;
    };
    return invert_with_forward(forward, data, prior, cfg);
}

} // namespace riverflow::inversion
