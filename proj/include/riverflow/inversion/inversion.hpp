#pragma once

#include "riverflow/geostat/geostat.hpp"
#include "riverflow/grid/boundary.hpp"
#include "riverflow/grid/grid.hpp"
#include "riverflow/oracle/oracle.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace riverflow::inversion {

struct InversionConfig {
    std::size_t n_pc = 100;
    double obs_noise_sigma = 0.1; ///< [m/s]
    std::size_t max_gn_iter = 5;
    double step_tol = 1e-8;  ///< stop once the coefficient step norm falls below this
    double fd_step = 1e-3;   ///< Jacobian probe size in coefficient units
    double damping = 1e-3;   ///< initial Levenberg term, halved on accepted steps

    void validate() const;
};

struct InversionResult {
    geostat::LowRankGaussian posterior;
    Eigen::VectorXd coef_mean;       ///< posterior mean of the prior coefficients
    Eigen::MatrixXd coef_covariance; ///< (J^T J / sigma^2 + I)^-1 at the final iterate
    std::vector<double> objective;   ///< objective after each accepted iterate, starting at the prior mean
    std::size_t iterations = 0;
    /// False when no step reduced the objective; the prior mean is returned.
    bool improved = true;
};

/// Maps a full field (node values) to predicted observations.
using ForwardMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Gauss-Newton in the coefficients s of x = mean + F s, s ~ N(0, I), with
/// objective |d - h(x)|^2 / (2 sigma^2) + |s|^2 / 2. Jacobian columns are
/// forward differences. The output factor is F L with L L^T the coefficient
/// covariance, so it has exactly n_pc columns. An empty `data` returns the
/// prior truncated to n_pc.
InversionResult invert_with_forward(const ForwardMap& forward, const Eigen::VectorXd& data,
                                    const geostat::LowRankGaussian& prior, const InversionConfig& cfg);

/// Observed quantities are the easting values followed by the northing values
/// at the observation nodes.
InversionResult invert(const oracle::ObservationSet& obs, const grid::BoundaryCondition& bc,
                       const grid::RiverGrid& grid, const geostat::LowRankGaussian& prior,
                       const InversionConfig& cfg, const oracle::OracleConfig& oracle_cfg = {});

} // namespace riverflow::inversion
