#include "riverflow/analysis/analysis.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/common/parallel.hpp"
#include "riverflow/surrogate/training.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace riverflow::analysis {

using surrogate::ExampleList;
using surrogate::Scope;
using surrogate::SurrogateModel;

namespace {

ExampleList examples_for(const SurrogateModel& model, SampleRefs samples)
{
    return model.scope() == Scope::global
               ? ExampleList::global(samples, model.target())
               : ExampleList::local(samples, model.target(), model.architecture().window_along);
}

double pooled_rmse(const Eigen::MatrixXd& pred, std::span<const surrogate::Example> items)
{
    double sq = 0.0;
    for (std::size_t r = 0; r < items.size(); ++r)
        for (std::size_t c = 0; c < items[r].target.size(); ++c) {
            const double e = pred(Eigen::Index(r), Eigen::Index(c)) - items[r].target[c];
            sq += e * e;
        }
    return std::sqrt(sq / double(pred.size()));
}

std::vector<double> column_sigma(const Eigen::MatrixXd& z)
{
    require(z.rows() >= 2, "latent spread needs at least two items");
    std::vector<double> s(std::size_t(z.cols()));
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double mean = z.col(c).mean();
        s[std::size_t(c)] = std::sqrt((z.col(c).array() - mean).square().sum() / double(z.rows() - 1));
    }
    return s;
}

} // namespace

LatentStats latent_stats(const SurrogateModel& model, SampleRefs samples, const std::string& tag)
{
    const auto items = examples_for(model, samples);
    return {tag, column_sigma(model.encode(items.items()))};
}

SensitivityReport latent_sensitivity(const SurrogateModel& model, SampleRefs samples, const std::string& tag)
{
    const auto list = examples_for(model, samples);
    const auto items = list.items();
    const Eigen::MatrixXd z = model.encode(items);
    SensitivityReport r;
    r.tag = tag;
    r.sigma = column_sigma(z);
    r.baseline_rmse = pooled_rmse(model.decode(z, items), items);
    r.delta_rmse.assign(r.sigma.size(), 0.0);
    parallel_for(r.sigma.size(), [&](std::size_t l) {
        Eigen::MatrixXd zp = z;
        zp.col(Eigen::Index(l)).array() += 2.0 * r.sigma[l];
        r.delta_rmse[l] = std::abs(pooled_rmse(model.decode(zp, items), items) - r.baseline_rmse);
    });
    return r;
}

double sensitivity_decay_ratio(const SensitivityReport& r, std::size_t first, std::size_t last)
{
    const std::size_t n = r.delta_rmse.size();
    require(first > 0 && last > 0 && first <= n && last <= n, "component counts exceed the latent size");
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < first; ++i) head += r.delta_rmse[i];
    for (std::size_t i = n - last; i < n; ++i) tail += r.delta_rmse[i];
    head /= double(first);
    tail /= double(last);
    if (head == 0.0) return tail == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return tail / head;
}

std::vector<std::size_t> default_sections(std::size_t n_along)
{
    std::vector<std::size_t> out{0, n_along};
    for (double s : {10.0, 25.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 450.0})
        out.push_back(std::min(n_along, std::size_t(std::lround(s * double(n_along) / 501.0))));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

grid::ScalarField partial_bathymetry(const grid::ScalarField& truth, const grid::ScalarField& reference,
                                     std::size_t sections)
{
    require(truth.shape() == reference.shape(), "reference bed is on a different grid");
    require(sections <= truth.shape().n_along, "S = " + std::to_string(sections) + " exceeds n_along = " +
                                                   std::to_string(truth.shape().n_along));
    const std::size_t cut = sections * truth.shape().n_across;
    std::vector<double> v(reference.values().begin(), reference.values().end());
    std::copy_n(truth.values().begin(), cut, v.begin());
    return grid::ScalarField(truth.shape(), std::move(v), truth.kind());
}

std::vector<PartialResult> partial_bathymetry_eval(const SurrogateModel& model, SampleRefs samples,
                                                   const grid::ScalarField& posterior_mean,
                                                   std::span<const std::size_t> sections)
{
    require(posterior_mean.shape() == model.grid_shape(), "posterior mean is on a different grid");
    for (auto s : sections)
        require(s <= model.grid_shape().n_along, "S = " + std::to_string(s) + " exceeds n_along");
    std::vector<PartialResult> out;
    for (std::size_t s : sections) {
        std::vector<grid::ScalarField> beds;
        beds.reserve(samples.size());
        for (const auto* sample : samples) beds.push_back(partial_bathymetry(sample->bathy, posterior_mean, s));
        out.push_back({s, surrogate::evaluate(model, samples, beds).rmse});
    }
    return out;
}

double quantile_sorted(std::span<const double> sorted, double p)
{
    require(!sorted.empty(), "quantile of an empty list");
    require(p >= 0.0 && p <= 1.0, "quantile level outside [0, 1]");
    const double h = double(sorted.size() - 1) * p;
    const std::size_t lo = std::size_t(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values)
{
    require(!values.empty(), "box statistics of an empty list");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.count = values.size();
    b.q1 = quantile_sorted(values, 0.25);
    b.median = quantile_sorted(values, 0.5);
    b.q3 = quantile_sorted(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
    std::optional<double> wl, wh;
    for (double v : values) {
        if (v < lo || v > hi) {
            b.outliers.push_back(v);
            continue;
        }
        if (!wl) wl = v;
        wh = v;
    }
    b.whisker_low = wl.value_or(b.q1);
    b.whisker_high = wh.value_or(b.q3);
    return b;
}

DischargeErrorBins bin_errors(std::span<const double> discharge, std::span<const double> errors, double q_min,
                              double q_max, std::size_t n_bins)
{
    require(discharge.size() == errors.size(), "one discharge per error is required");
    require(!errors.empty(), "no errors to bin");
    require(n_bins > 0 && q_max > q_min, "invalid discharge range or bin count");
    DischargeErrorBins out;
    const double width = (q_max - q_min) / double(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        out.bins.push_back({q_min + double(b) * width, b + 1 == n_bins ? q_max : q_min + double(b + 1) * width, {}, {}});
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const double pos = std::floor((discharge[i] - q_min) / width);
        const std::size_t b = pos < 0.0 ? 0 : std::min(n_bins - 1, std::size_t(pos));
        out.bins[b].errors.push_back(errors[i]);
    }
    for (auto& bin : out.bins)
        if (!bin.errors.empty()) bin.box = box_stats(bin.errors);
    return out;
}

DischargeErrorBins error_vs_discharge(const SurrogateModel& model, SampleRefs samples, double q_min, double q_max,
                                      std::size_t n_bins)
{
    require(!samples.empty(), "error binning needs at least one sample");
    const auto ev = surrogate::evaluate(model, samples);
    std::vector<double> q;
    for (const auto* s : samples) q.push_back(s->bc.discharge_q);
    return bin_errors(q, ev.sample_rmse, q_min, q_max, n_bins);
}

PropagationResult propagate(const SurrogateModel& model, const grid::RiverGrid& grid,
                            const geostat::LowRankGaussian& posterior, const grid::BoundaryCondition& bc,
                            std::size_t n, std::uint64_t seed, const oracle::OracleConfig& oracle_cfg)
{
    require(grid.shape() == model.grid_shape(), "model and grid differ");
    PropagationResult r;
    r.surrogate = surrogate::predict_posterior_ensemble(model, posterior, bc, n, seed);
    const auto draws = surrogate::posterior_draws(posterior, n, seed);
    std::vector<std::optional<grid::ScalarField>> solved(n);
    parallel_for(n, [&](std::size_t i) {
        try {
            const auto state = oracle::solve_steady(grid, draws[i], bc, oracle_cfg);
            solved[i] = grid::ScalarField(grid.shape(), surrogate::target_values(state.velocity, model.target()),
                                          r.surrogate.mean.kind());
        } catch (const SolveError&) {
        }
    });
    std::vector<grid::ScalarField> fields;
    for (auto& f : solved) {
        if (f)
            fields.push_back(std::move(*f));
        else
            ++r.oracle_failures;
    }
    if (fields.size() < 2) throw SolveError("fewer than two posterior draws could be solved");
    r.oracle = surrogate::ensemble_stats(fields);
    r.mean_rmse = grid::field_rmse(r.surrogate.mean, r.oracle.mean);
    return r;
}

} // namespace riverflow::analysis
