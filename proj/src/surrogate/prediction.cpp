#include "riverflow/surrogate/prediction.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/common/seed.hpp"
#include "riverflow/surrogate/training.hpp"

#include <algorithm>
#include <cmath>

namespace riverflow::surrogate {

std::string_view to_string(Tiling t) { return t == Tiling::dense ? "dense" : "disjoint"; }

Tiling parse_tiling(std::string_view text)
{
    if (text == "dense") return Tiling::dense;
    if (text == "disjoint") return Tiling::disjoint;
    throw InputError("unknown tiling '" + std::string(text) + "'");
}

SegmentPrediction predict_segment(const SurrogateModel& model, const grid::ScalarField& bathy,
                                  const grid::BoundaryCondition& bc, std::size_t start, std::size_t length,
                                  Tiling tiling)
{
    require(model.scope() == Scope::local, "segment prediction needs a local model");
    require(bathy.shape() == model.grid_shape(), "bathymetry grid does not match the model grid");
    bc.validate();
    const std::size_t span = model.architecture().window_along;
    const std::size_t na = model.grid_shape().n_across;
    require(length >= span, "segment length " + std::to_string(length) + " is shorter than the window (" +
                                std::to_string(span) + ")");
    require(start + length <= model.grid_shape().n_along, "segment leaves the grid");

    SegmentPrediction seg;
    seg.start = start;
    seg.length = length;
    seg.n_across = na;
    const std::size_t last = start + length - span;
    if (tiling == Tiling::dense) {
        for (std::size_t d = start; d <= last; ++d) seg.window_starts.push_back(d);
    } else {
        for (std::size_t d = start; d + span <= start + length; d += span) seg.window_starts.push_back(d);
        if (seg.window_starts.back() != last) seg.window_starts.push_back(last);
    }

    std::vector<Example> items;
    for (std::size_t d : seg.window_starts) items.push_back({bathy.values().subspan(d * na, span * na), bc, d, {}});
    const Eigen::MatrixXd y = model.predict(items);

    seg.values.assign(length * na, 0.0);
    std::vector<std::size_t> count(length, 0);
    for (std::size_t w = 0; w < items.size(); ++w) {
        const std::size_t d = seg.window_starts[w];
        for (std::size_t j = 0; j < span; ++j) {
            const std::size_t row = d - start + j;
            if (tiling == Tiling::disjoint && count[row] > 0) continue;
            ++count[row];
            for (std::size_t i = 0; i < na; ++i) {
                // Running mean: exact when every window agrees.
                double& v = seg.values[row * na + i];
                v += (y(Eigen::Index(w), Eigen::Index(j * na + i)) - v) / double(count[row]);
            }
        }
    }
    return seg;
}

EnsembleStats ensemble_stats(const std::vector<grid::ScalarField>& members)
{
    require(members.size() >= 2, "ensemble statistics need at least two members");
    const auto& shape = members.front().shape();
    const std::size_t n = members.front().size();
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    for (const auto& f : members) {
        require(f.shape() == shape, "ensemble members have different grids");
        for (std::size_t k = 0; k < n; ++k) {
            const double d = f[k] - members.front()[k];
            sum[k] += d;
            sum_sq[k] += d * d;
        }
    }
    const double count = double(members.size());
    std::vector<double> mean(n), sd(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double m = sum[k] / count;
        mean[k] = members.front()[k] + m;
        sd[k] = std::sqrt(std::max(0.0, sum_sq[k] / count - m * m));
    }
    const auto kind = members.front().kind();
    return {grid::ScalarField(shape, std::move(mean), kind), grid::ScalarField(shape, std::move(sd), kind)};
}

std::vector<grid::ScalarField> posterior_draws(const geostat::LowRankGaussian& posterior, std::size_t n,
                                               std::uint64_t seed)
{
    std::vector<grid::ScalarField> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(geostat::sample_field(posterior, derive_seed(seed, "ensemble", i)));
    return out;
}

EnsembleStats predict_posterior_ensemble(const SurrogateModel& model, const geostat::LowRankGaussian& posterior,
                                         const grid::BoundaryCondition& bc, std::size_t n, std::uint64_t seed)
{
    require(n >= 2, "posterior ensemble needs n >= 2");
    require(model.scope() == Scope::global, "posterior ensembles need a global model");
    require(posterior.shape() == model.grid_shape(), "posterior grid does not match the model grid");
    std::vector<grid::ScalarField> predictions;
    predictions.reserve(n);
    for (const auto& b : posterior_draws(posterior, n, seed)) predictions.push_back(model.predict_global(b, bc));
    return ensemble_stats(predictions);
}

} // namespace riverflow::surrogate
