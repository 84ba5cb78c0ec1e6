#include "riverflow/surrogate/pca.hpp"

#include "riverflow/common/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace riverflow::surrogate {

namespace {

double rank_tolerance(const Eigen::VectorXd& s, Eigen::Index rows, Eigen::Index cols)
{
    if (s.size() == 0) return 0.0;
    return double(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * s(0) * 16.0;
}

void canonical_signs(Eigen::MatrixXd& rows)
{
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::Index arg = 0;
        rows.row(r).cwiseAbs().maxCoeff(&arg);
        if (rows(r, arg) < 0.0) rows.row(r) *= -1.0;
    }
}

void check_rank(const Eigen::VectorXd& s, Eigen::Index rows, Eigen::Index cols, std::size_t latent)
{
    const double tol = rank_tolerance(s, rows, cols);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++rank;
    if (latent > rank)
        throw SolveError("requested " + std::to_string(latent) + " principal components but the centered data has rank " +
                         std::to_string(rank));
}

} // namespace

Eigen::VectorXd PcaBasis::project(const Eigen::VectorXd& x) const
{
    if (x.size() != mean.size())
        throw InputError("project: vector of length " + std::to_string(x.size()) + ", basis expects " +
                         std::to_string(mean.size()));
    return components * (x - mean);
}

Eigen::VectorXd PcaBasis::reconstruct(const Eigen::VectorXd& z) const
{
    if (z.size() != components.rows())
        throw InputError("reconstruct: latent vector of length " + std::to_string(z.size()) + ", basis has " +
                         std::to_string(components.rows()));
    return components.transpose() * z + mean;
}

Eigen::MatrixXd PcaBasis::project_rows(const Eigen::MatrixXd& x) const
{
    if (x.cols() != mean.size()) throw InputError("project_rows: width does not match the basis");
    // Row by row so a batch gives bitwise the same result as single vectors.
    Eigen::MatrixXd out(x.rows(), components.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = project(x.row(r).transpose()).transpose();
    return out;
}

Eigen::MatrixXd PcaBasis::reconstruct_rows(const Eigen::MatrixXd& z) const
{
    if (z.cols() != components.rows()) throw InputError("reconstruct_rows: width does not match the basis");
    Eigen::MatrixXd out(z.rows(), components.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) out.row(r) = reconstruct(z.row(r).transpose()).transpose();
    return out;
}

PcaBasis fit_pca(const Eigen::MatrixXd& data, std::size_t latent)
{
    require(latent >= 1, "latent count must be at least 1");
    require(data.rows() >= 1 && data.cols() >= 1, "fit_pca needs a non-empty data matrix");
    require(latent <= static_cast<std::size_t>(data.cols()), "latent count exceeds the ambient dimension");
    PcaBasis basis;
    basis.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - basis.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    check_rank(svd.singularValues(), centered.rows(), centered.cols(), latent);
    const auto l = static_cast<Eigen::Index>(latent);
    basis.components = svd.matrixV().leftCols(l).transpose();
    basis.singular_values = svd.singularValues().head(l);
    canonical_signs(basis.components);
    return basis;
}

IncrementalPca::IncrementalPca(std::size_t latent) : latent_(latent)
{
    require(latent >= 1, "latent count must be at least 1");
}

void IncrementalPca::partial_fit(const Eigen::MatrixXd& block)
{
    if (block.rows() == 0) return;
    if (seen_ == 0) {
        require(static_cast<std::size_t>(block.rows()) >= latent_,
                "first incremental PCA block has " + std::to_string(block.rows()) + " rows, fewer than L = " +
                    std::to_string(latent_));
        require(static_cast<std::size_t>(block.cols()) >= latent_, "latent count exceeds the ambient dimension");
    } else {
        require(block.cols() == mean_.size(), "incremental PCA block width changed");
    }
    const double n_old = double(seen_);
    const double n_new = double(block.rows());
    const Eigen::VectorXd block_mean = block.colwise().mean().transpose();

    Eigen::MatrixXd stacked;
    if (seen_ == 0) {
        stacked = block.rowwise() - block_mean.transpose();
        mean_ = block_mean;
    } else {
        const Eigen::Index l = components_.rows();
        stacked.resize(l + block.rows() + 1, block.cols());
        stacked.topRows(l) = singular_.asDiagonal() * components_;
        stacked.middleRows(l, block.rows()) = block.rowwise() - block_mean.transpose();
        stacked.row(l + block.rows()) = std::sqrt(n_old * n_new / (n_old + n_new)) * (mean_ - block_mean).transpose();
        mean_ = (n_old * mean_ + n_new * block_mean) / (n_old + n_new);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinV);
    const Eigen::Index keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(latent_), svd.singularValues().size());
    components_ = svd.matrixV().leftCols(keep).transpose();
    singular_ = svd.singularValues().head(keep);
    seen_ += static_cast<std::size_t>(block.rows());
}

PcaBasis IncrementalPca::basis() const
{
    if (seen_ == 0) throw InputError("incremental PCA has seen no data");
    check_rank(singular_, static_cast<Eigen::Index>(seen_), mean_.size(), latent_);
    if (singular_.size() < static_cast<Eigen::Index>(latent_) || singular_(singular_.size() - 1) <= 0.0)
        throw SolveError("incremental PCA data has rank below " + std::to_string(latent_));
    PcaBasis b;
    b.components = components_;
    b.mean = mean_;
    b.singular_values = singular_;
    canonical_signs(b.components);
    return b;
}

PcaBasis incremental_fit_pca(const Eigen::MatrixXd& data, std::size_t latent, std::size_t block)
{
    require(block >= 1, "block size must be at least 1");
    IncrementalPca ipca(latent);
    for (Eigen::Index start = 0; start < data.rows(); start += static_cast<Eigen::Index>(block)) {
        const Eigen::Index rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(block), data.rows() - start);
        ipca.partial_fit(data.middleRows(start, rows));
    }
    return ipca.basis();
}

} // namespace riverflow::surrogate
