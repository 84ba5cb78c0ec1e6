#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace riverflow::surrogate {

/// Rows of `components` are the leading principal directions (U_L), so
/// project(x) = U_L (x - mean) and reconstruct(z) = U_L^T z + mean.
struct PcaBasis {
    Eigen::MatrixXd components; ///< L x M, orthonormal rows
    Eigen::VectorXd mean;       ///< M
    Eigen::VectorXd singular_values; ///< L, of the centered data, descending

    std::size_t latent() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t ambient() const { return static_cast<std::size_t>(components.cols()); }

    /// Throws InputError on a dimension mismatch.
    Eigen::VectorXd project(const Eigen::VectorXd& x) const;
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const;
    /// Row-wise versions for a samples-as-rows matrix.
    Eigen::MatrixXd project_rows(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd reconstruct_rows(const Eigen::MatrixXd& z) const;
};

/// Top-L right singular directions of the centered data (samples as rows).
/// Each direction's sign makes its largest-magnitude entry positive. Throws
/// SolveError when L exceeds the numerical rank of the centered data.
PcaBasis fit_pca(const Eigen::MatrixXd& data, std::size_t latent);

/// Block-wise incremental SVD: each update stacks the previous basis scaled
/// by its singular values, the centered block and a mean-shift row, then
/// re-truncates to L.
class IncrementalPca {
public:
    explicit IncrementalPca(std::size_t latent);
    /// Throws InputError when the first block has fewer than L rows or the
    /// width changes between blocks.
    void partial_fit(const Eigen::MatrixXd& block);
    std::size_t samples_seen() const { return seen_; }
    /// Throws SolveError when the data seen so far has rank below L.
    PcaBasis basis() const;

private:
    std::size_t latent_;
    std::size_t seen_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd components_;
    Eigen::VectorXd singular_;
};

/// Feeds `data` to IncrementalPca in consecutive blocks of `block` rows.
PcaBasis incremental_fit_pca(const Eigen::MatrixXd& data, std::size_t latent, std::size_t block);

} // namespace riverflow::surrogate
