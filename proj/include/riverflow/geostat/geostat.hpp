#pragma once

#include "riverflow/grid/field.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace riverflow::geostat {

/// cov(dx, dy) = beta^2 exp(-dx^2/l_x^2 - dy^2/l_y^2); x along the river, y across.
struct SeparableKernel {
    double beta = 1.2; ///< [m]
    double l_x = 115.0; ///< [m]
    double l_y = 29.0;  ///< [m]

    void validate() const;
};

double kernel_eval(const SeparableKernel& k, double dx, double dy);

/// Per-node standard deviation multiplier in the across-river direction.
struct WeightProfile {
    std::vector<double> weights;

    /// w(i) = w_min + (1 - w_min) sin(pi i / (n - 1))^p. Equals 1 at the middle
    /// node for odd n and w_min at both banks.
    static WeightProfile sine_power(std::size_t n_across, double w_min = 0.15, double power = 1.0);
    static WeightProfile ones(std::size_t n_across);
};

/// Gaussian field represented as mean + factor * xi, xi ~ N(0, I_r).
class LowRankGaussian {
public:
    LowRankGaussian() = default;
    /// Throws InputError when factor rows differ from the mean's node count or
    /// the factor holds non-finite entries.
    LowRankGaussian(grid::ScalarField mean, Eigen::MatrixXd factor);

    const grid::ScalarField& mean() const { return mean_; }
    const Eigen::MatrixXd& factor() const { return factor_; }
    std::size_t rank() const { return static_cast<std::size_t>(factor_.cols()); }
    const grid::GridShape& shape() const { return mean_.shape(); }

    /// Diagonal of factor * factor^T.
    Eigen::VectorXd pointwise_variance() const;
    /// Keeps the leading `r` columns.
    LowRankGaussian truncated(std::size_t r) const;

    /// Header "RLG1" (n_across, n_along, spacing_m, rank, dtype f64) followed by
    /// the mean payload and the row-major factor payload, little-endian.
    void save(const std::filesystem::path& path) const;
    static LowRankGaussian load(const std::filesystem::path& path);

private:
    grid::ScalarField mean_;
    Eigen::MatrixXd factor_;
};

/// beta^2 exp(-(j - q)^2 h^2 / l_x^2) over along indices.
Eigen::MatrixXd along_covariance(const SeparableKernel& k, const grid::GridShape& shape);
/// beta^2 exp(-(i - p)^2 h^2 / l_y^2) over across indices.
Eigen::MatrixXd across_covariance(const SeparableKernel& k, const grid::GridShape& shape);

struct FactorRanks {
    std::size_t rank_x = 60;
    std::size_t rank_y = 20;
    std::size_t max_rank = 100;
};

/// Zero-mean low-rank factor of the separable covariance on `shape`. Columns are
/// Kronecker products of 1D eigenvectors scaled by sqrt(lambda_x lambda_y) / beta,
/// ordered by decreasing combined eigenvalue. 1D eigenvalues below 1e-10 of the
/// largest are dropped. Throws InputError when a rank exceeds its axis length and
/// SolveError when a 1D matrix is indefinite beyond round-off.
LowRankGaussian build_separable_factors(const SeparableKernel& k, const grid::GridShape& shape,
                                        const FactorRanks& ranks = {});

/// Scales every factor row of across index i by w[i]. The mean is unchanged.
LowRankGaussian apply_cross_river_weighting(const LowRankGaussian& g, const WeightProfile& w);

/// mean + factor * xi with xi drawn from a generator seeded by `seed`.
grid::ScalarField sample_field(const LowRankGaussian& g, std::uint64_t seed);

/// n fields, each one posterior draw plus one independent draw of the
/// zero-mean weighted kernel field.
std::vector<grid::ScalarField> augment_posterior(const LowRankGaussian& posterior,
                                                 const LowRankGaussian& weighted_kernel, std::size_t n,
                                                 std::uint64_t seed);

/// Convenience overload that builds the weighted kernel factor first.
std::vector<grid::ScalarField> augment_posterior(const LowRankGaussian& posterior, const SeparableKernel& k,
                                                 const WeightProfile& w, std::size_t n, std::uint64_t seed,
                                                 const FactorRanks& ranks = {});

} // namespace riverflow::geostat
