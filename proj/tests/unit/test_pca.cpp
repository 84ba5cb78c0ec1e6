#include "doctest.h"

#include "riverflow/common/error.hpp"
#include "riverflow/surrogate/pca.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>

using namespace riverflow;
using namespace riverflow::surrogate;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    return m;
}

// Data whose centered spectrum decays geometrically.
Eigen::MatrixXd decaying(Eigen::Index rows, Eigen::Index cols, double ratio, std::uint64_t seed)
{
    const Eigen::MatrixXd q = gaussian(cols, cols, seed).householderQr().householderQ();
    Eigen::MatrixXd scores = gaussian(rows, cols, seed + 1);
    for (Eigen::Index c = 0; c < cols; ++c) scores.col(c) *= std::pow(ratio, double(c));
    Eigen::MatrixXd x = scores * q.transpose();
    x.rowwise() += Eigen::RowVectorXd::LinSpaced(cols, 1.0, 3.0);
    return x;
}

double reconstruction_rmse(const PcaBasis& b, const Eigen::MatrixXd& x)
{
    return std::sqrt((b.reconstruct_rows(b.project_rows(x)) - x).squaredNorm() / double(x.size()));
}

double max_principal_angle(const Eigen::MatrixXd& a_rows, const Eigen::MatrixXd& b_rows)
{
    const Eigen::MatrixXd m = a_rows * b_rows.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double smallest = std::min(1.0, svd.singularValues().minCoeff());
    return std::acos(smallest);
}

} // namespace

TEST_CASE("full-rank round trip")
{
    const Eigen::MatrixXd x = gaussian(30, 12, 1);
    const auto b = fit_pca(x, 12);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        CHECK((b.reconstruct(b.project(x.row(r).transpose())) - x.row(r).transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rank-one data needs one component")
{
    Eigen::VectorXd m = Eigen::VectorXd::LinSpaced(9, -1.0, 2.0);
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(9, 0.5, 1.5).normalized();
    Eigen::MatrixXd x(15, 9);
    for (Eigen::Index r = 0; r < 15; ++r) x.row(r) = (m + (0.3 * double(r) - 2.0) * v).transpose();
    const auto b = fit_pca(x, 1);
    CHECK(reconstruction_rmse(b, x) < 1e-10);
    CHECK_THROWS_AS(fit_pca(x, 2), SolveError);
}

TEST_CASE("reconstruction error matches Eckart-Young and shrinks with L")
{
    const Eigen::MatrixXd x = gaussian(30, 20, 2);
    // Oracle: one-sided Jacobi SVD of the centered data.
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(centered);
    const Eigen::VectorXd s = oracle.singularValues();
    double prev = 1e300;
    for (std::size_t l = 1; l <= 20; ++l) {
        const auto b = fit_pca(x, l);
        double tail = 0.0;
        for (Eigen::Index i = Eigen::Index(l); i < s.size(); ++i) tail += s(i) * s(i);
        const double expected = std::sqrt(tail / double(x.size()));
        const double got = reconstruction_rmse(b, x);
        CHECK(std::abs(got - expected) < 1e-9);
        CHECK(got <= prev + 1e-15);
        prev = got;
    }
}

TEST_CASE("basis properties")
{
    const Eigen::MatrixXd x = gaussian(25, 10, 3);
    const auto b = fit_pca(x, 6);
    CHECK((b.components * b.components.transpose() - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(b.project(b.mean).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd z = gaussian(6, 1, 4).col(0);
    CHECK((b.project(b.reconstruct(z)) - z).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index i = 1; i < 6; ++i) CHECK(b.singular_values(i) <= b.singular_values(i - 1));
    CHECK_THROWS_AS(b.project(Eigen::VectorXd::Zero(9)), InputError);
    CHECK_THROWS_AS(b.reconstruct(Eigen::VectorXd::Zero(5)), InputError);
    CHECK_THROWS_AS(fit_pca(x, 11), InputError);
}

TEST_CASE("single-block incremental fit equals batch fit")
{
    const Eigen::MatrixXd x = gaussian(40, 15, 5);
    const auto batch = fit_pca(x, 7);
    const auto inc = incremental_fit_pca(x, 7, 40);
    CHECK((batch.components - inc.components).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((batch.mean - inc.mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-block incremental fit is close to batch PCA")
{
    const Eigen::MatrixXd x = decaying(200, 30, 0.6, 6);
    const auto batch = fit_pca(x, 8);
    const auto inc = incremental_fit_pca(x, 8, 100);
    const double rb = reconstruction_rmse(batch, x);
    const double ri = reconstruction_rmse(inc, x);
    CHECK(ri >= rb - 1e-12);
    CHECK(ri <= 1.01 * rb);
}

TEST_CASE("incremental subspace stays within 1e-3 rad of batch PCA")
{
    const Eigen::MatrixXd x = decaying(10000, 40, 0.5, 7);
    const auto batch = fit_pca(x, 10);
    const auto inc = incremental_fit_pca(x, 10, 500);
    CHECK(inc.ambient() == 40);
    CHECK(max_principal_angle(batch.components, inc.components) < 1e-3);
    CHECK((inc.mean - batch.mean).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("incremental PCA error cases")
{
    const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(50, 6);
    CHECK_THROWS_AS(incremental_fit_pca(same, 2, 10), SolveError);
    CHECK_THROWS_AS(incremental_fit_pca(gaussian(50, 6, 8), 5, 3), InputError);
    IncrementalPca ipca(2);
    ipca.partial_fit(gaussian(5, 6, 9));
    CHECK_THROWS_AS(ipca.partial_fit(gaussian(5, 7, 9)), InputError);
}
