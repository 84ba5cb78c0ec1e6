#include "riverflow/geostat/geostat.hpp"

#include "riverflow/common/binary_io.hpp"
#include "riverflow/common/error.hpp"
#include "riverflow/common/parallel.hpp"
#include "riverflow/common/seed.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace riverflow::geostat {

using grid::GridShape;
using grid::ScalarField;

namespace {

constexpr double kEigenDropRatio = 1e-10;
constexpr double kNegativeTolerance = 1e-8;

struct Eigenpairs {
    Eigen::VectorXd values; // descending
    Eigen::MatrixXd vectors;
};

Eigenpairs leading_eigenpairs(const Eigen::MatrixXd& c, std::size_t count, const char* axis)
{
    const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) throw SolveError(std::string("eigendecomposition failed on ") + axis + " axis");
    const Eigen::Index n = sym.rows();
    const double lambda_max = solver.eigenvalues()(n - 1);
    if (lambda_max <= 0.0) return {Eigen::VectorXd(0), Eigen::MatrixXd(n, 0)};
    if (solver.eigenvalues()(0) < -kNegativeTolerance * lambda_max)
        throw SolveError(std::string("covariance on ") + axis + " axis is not positive semidefinite");

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = n - 1; i >= 0 && keep.size() < count; --i)
        if (solver.eigenvalues()(i) >= kEigenDropRatio * lambda_max) keep.push_back(i);
    Eigenpairs out{Eigen::VectorXd(static_cast<Eigen::Index>(keep.size())),
                   Eigen::MatrixXd(n, static_cast<Eigen::Index>(keep.size()))};
    for (std::size_t c_idx = 0; c_idx < keep.size(); ++c_idx) {
        const auto col = static_cast<Eigen::Index>(c_idx);
        out.values(col) = std::max(0.0, solver.eigenvalues()(keep[c_idx]));
        out.vectors.col(col) = solver.eigenvectors().col(keep[c_idx]);
    }
    return out;
}

Eigen::MatrixXd gaussian_1d(double beta, double length_scale, std::size_t n, double spacing)
{
    Eigen::MatrixXd c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double d = (static_cast<double>(a) - static_cast<double>(b)) * spacing;
            c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                beta * beta * std::exp(-d * d / (length_scale * length_scale));
        }
    return c;
}

Eigen::VectorXd standard_normal(std::size_t r, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd xi(static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    return xi;
}

} // namespace

void SeparableKernel::validate() const
{
    require(beta >= 0.0 && std::isfinite(beta), "kernel beta must be non-negative");
    require(l_x > 0.0 && l_y > 0.0 && std::isfinite(l_x) && std::isfinite(l_y), "kernel length scales must be positive");
}

double kernel_eval(const SeparableKernel& k, double dx, double dy)
{
    return k.beta * k.beta * std::exp(-dx * dx / (k.l_x * k.l_x) - dy * dy / (k.l_y * k.l_y));
}

WeightProfile WeightProfile::sine_power(std::size_t n_across, double w_min, double power)
{
    require(n_across >= 2, "weight profile needs at least two across nodes");
    require(w_min >= 0.0 && w_min <= 1.0 && power > 0.0, "weight profile: need 0 <= w_min <= 1 and power > 0");
    WeightProfile w;
    w.weights.resize(n_across);
    const double last = static_cast<double>(n_across - 1);
    for (std::size_t i = 0; i < n_across; ++i) {
        // Mirror the index so both halves evaluate identical arguments.
        const double mirrored = std::min(static_cast<double>(i), last - static_cast<double>(i));
        const double s = std::sin(std::numbers::pi * mirrored / last);
        w.weights[i] = w_min + (1.0 - w_min) * std::pow(s, power);
    }
    if (n_across % 2 == 1) w.weights[n_across / 2] = 1.0;
    return w;
}

WeightProfile WeightProfile::ones(std::size_t n_across) { return WeightProfile{std::vector<double>(n_across, 1.0)}; }

LowRankGaussian::LowRankGaussian(ScalarField mean, Eigen::MatrixXd factor)
    : mean_(std::move(mean)), factor_(std::move(factor))
{
    require(static_cast<std::size_t>(factor_.rows()) == mean_.size(), "LowRankGaussian: factor rows must match node count");
    require(factor_.allFinite(), "LowRankGaussian: factor must be finite");
}

Eigen::VectorXd LowRankGaussian::pointwise_variance() const { return factor_.rowwise().squaredNorm(); }

LowRankGaussian LowRankGaussian::truncated(std::size_t r) const
{
    require(r <= rank(), "LowRankGaussian::truncated: rank exceeds available columns");
    return LowRankGaussian(mean_, factor_.leftCols(static_cast<Eigen::Index>(r)));
}

void LowRankGaussian::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    std::ostringstream h;
    h.precision(17);
    h << "RLG1\n"
      << "n_across " << shape().n_across << "\n"
      << "n_along " << shape().n_along << "\n"
      << "spacing_m " << shape().spacing_m << "\n"
      << "rank " << rank() << "\n"
      << "dtype f64\n"
      << "end\n";
    out << h.str();
    write_f64_le(out, mean_.values());
    std::vector<double> rows(static_cast<std::size_t>(factor_.size()));
    const Eigen::Index r = factor_.cols();
    for (Eigen::Index i = 0; i < factor_.rows(); ++i)
        for (Eigen::Index c = 0; c < r; ++c) rows[static_cast<std::size_t>(i * r + c)] = factor_(i, c);
    write_f64_le(out, rows);
    if (!out) throw InputError("write failed: " + path.string());
}

LowRankGaussian LowRankGaussian::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    const auto header = read_text_header(in, "RLG1");
    auto get = [&](const std::string& key) {
        auto it = header.find(key);
        if (it == header.end()) throw FormatError("posterior header missing '" + key + "'");
        return it->second;
    };
    GridShape shape;
    std::size_t rank = 0;
    try {
        shape.n_across = std::stoul(get("n_across"));
        shape.n_along = std::stoul(get("n_along"));
        shape.spacing_m = std::stod(get("spacing_m"));
        rank = std::stoul(get("rank"));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError("posterior header: unparsable value");
    }
    if (get("dtype") != "f64") throw FormatError("posterior payload must be f64");
    std::vector<double> mean, rows;
    if (!read_f64_le(in, shape.node_count(), mean) || !read_f64_le(in, shape.node_count() * rank, rows))
        throw FormatError("posterior payload shorter than declared");
    if (!at_eof(in)) throw FormatError("posterior payload longer than declared");
    Eigen::MatrixXd factor(static_cast<Eigen::Index>(shape.node_count()), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < factor.rows(); ++i)
        for (Eigen::Index c = 0; c < factor.cols(); ++c)
            factor(i, c) = rows[static_cast<std::size_t>(i * factor.cols() + c)];
    try {
        return LowRankGaussian(ScalarField(shape, std::move(mean), grid::FieldKind::bathymetry), std::move(factor));
    } catch (const InputError& e) {
        throw FormatError(std::string("posterior payload invalid: ") + e.what());
    }
}

Eigen::MatrixXd along_covariance(const SeparableKernel& k, const GridShape& shape)
{
    return gaussian_1d(k.beta, k.l_x, shape.n_along, shape.spacing_m);
}

Eigen::MatrixXd across_covariance(const SeparableKernel& k, const GridShape& shape)
{
    return gaussian_1d(k.beta, k.l_y, shape.n_across, shape.spacing_m);
}

LowRankGaussian build_separable_factors(const SeparableKernel& k, const GridShape& shape, const FactorRanks& ranks)
{
    k.validate();
    require(ranks.rank_x <= shape.n_along, "build_separable_factors: rank_x exceeds n_along");
    require(ranks.rank_y <= shape.n_across, "build_separable_factors: rank_y exceeds n_across");
    const auto nodes = static_cast<Eigen::Index>(shape.node_count());
    const ScalarField zero_mean = ScalarField::constant(shape, 0.0, grid::FieldKind::bathymetry);

    if (k.beta == 0.0) {
        const std::size_t r = std::min(ranks.rank_x * ranks.rank_y, ranks.max_rank);
        return LowRankGaussian(zero_mean, Eigen::MatrixXd::Zero(nodes, static_cast<Eigen::Index>(r)));
    }

    const Eigenpairs along = leading_eigenpairs(along_covariance(k, shape), ranks.rank_x, "along");
    const Eigenpairs across = leading_eigenpairs(across_covariance(k, shape), ranks.rank_y, "across");

    struct Pair {
        double lambda;
        Eigen::Index a; // along eigen index
        Eigen::Index c; // across eigen index
    };
    std::vector<Pair> pairs;
    const double beta2 = k.beta * k.beta;
    for (Eigen::Index a = 0; a < along.values.size(); ++a)
        for (Eigen::Index c = 0; c < across.values.size(); ++c)
            pairs.push_back({along.values(a) * across.values(c) / beta2, a, c});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.lambda > y.lambda; });
    if (pairs.size() > ranks.max_rank) pairs.resize(ranks.max_rank);

    const std::size_t n_across = shape.n_across;
    Eigen::MatrixXd factor(nodes, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t col = 0; col < pairs.size(); ++col) {
        const auto& p = pairs[col];
        const double scale = std::sqrt(p.lambda);
        for (std::size_t j = 0; j < shape.n_along; ++j) {
            const double va = along.vectors(static_cast<Eigen::Index>(j), p.a) * scale;
            for (std::size_t i = 0; i < n_across; ++i)
                factor(static_cast<Eigen::Index>(j * n_across + i), static_cast<Eigen::Index>(col)) =
                    va * across.vectors(static_cast<Eigen::Index>(i), p.c);
        }
    }
    return LowRankGaussian(zero_mean, std::move(factor));
}

LowRankGaussian apply_cross_river_weighting(const LowRankGaussian& g, const WeightProfile& w)
{
    const std::size_t n_across = g.shape().n_across;
    require(w.weights.size() == n_across, "apply_cross_river_weighting: profile length must equal n_across");
    Eigen::MatrixXd factor = g.factor();
    for (Eigen::Index row = 0; row < factor.rows(); ++row)
        factor.row(row) *= w.weights[static_cast<std::size_t>(row) % n_across];
    return LowRankGaussian(g.mean(), std::move(factor));
}

ScalarField sample_field(const LowRankGaussian& g, std::uint64_t seed)
{
    std::vector<double> values(g.mean().values().begin(), g.mean().values().end());
    if (g.rank() > 0) {
        const Eigen::VectorXd delta = g.factor() * standard_normal(g.rank(), seed);
        for (std::size_t k = 0; k < values.size(); ++k) values[k] += delta(static_cast<Eigen::Index>(k));
    }
    return ScalarField(g.shape(), std::move(values), grid::FieldKind::bathymetry);
}

std::vector<ScalarField> augment_posterior(const LowRankGaussian& posterior, const LowRankGaussian& weighted_kernel,
                                           std::size_t n, std::uint64_t seed)
{
    require(posterior.shape() == weighted_kernel.shape(), "augment_posterior: grid mismatch");
    std::vector<ScalarField> out(n);
    parallel_for(n, [&](std::size_t i) {
        const ScalarField base = sample_field(posterior, derive_seed(seed, "augment/posterior", i));
        const ScalarField bump = sample_field(weighted_kernel, derive_seed(seed, "augment/kernel", i));
        std::vector<double> values(base.size());
        for (std::size_t k = 0; k < values.size(); ++k) values[k] = base[k] + (bump[k] - weighted_kernel.mean()[k]);
        out[i] = ScalarField(posterior.shape(), std::move(values), grid::FieldKind::bathymetry);
    });
    return out;
}

std::vector<ScalarField> augment_posterior(const LowRankGaussian& posterior, const SeparableKernel& k,
                                           const WeightProfile& w, std::size_t n, std::uint64_t seed,
                                           const FactorRanks& ranks)
{
    const auto kernel = apply_cross_river_weighting(build_separable_factors(k, posterior.shape(), ranks), w);
    return augment_posterior(posterior, kernel, n, seed);
}

} // namespace riverflow::geostat
