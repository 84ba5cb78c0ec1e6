#pragma once

#include "riverflow/geostat/geostat.hpp"
#include "riverflow/surrogate/model.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace riverflow::surrogate {

enum class Tiling {
    dense,   ///< every stride-1 window, nodes averaged over the windows covering them
    disjoint ///< non-overlapping windows, the last one right-aligned
};

std::string_view to_string(Tiling t);
Tiling parse_tiling(std::string_view text);

/// Prediction on along sections [start, start + length), along-major like a field.
struct SegmentPrediction {
    std::size_t start = 0;
    std::size_t length = 0;
    std::size_t n_across = 0;
    std::vector<double> values;
    std::vector<std::size_t> window_starts; ///< windows that were evaluated
    double at(std::size_t i_across, std::size_t j) const { return values[j * n_across + i_across]; }
};

/// Throws InputError for a global model, a segment shorter than the window
/// or one that leaves the grid.
SegmentPrediction predict_segment(const SurrogateModel& model, const grid::ScalarField& bathy,
                                  const grid::BoundaryCondition& bc, std::size_t start, std::size_t length,
                                  Tiling tiling);

struct EnsembleStats {
    grid::ScalarField mean;
    grid::ScalarField std; ///< population convention (divisor n)
};

/// Pointwise mean and standard deviation. Deviations are accumulated relative
/// to the first member, so identical members give exactly zero spread.
/// Throws InputError for fewer than two members or mixed shapes.
EnsembleStats ensemble_stats(const std::vector<grid::ScalarField>& members);

/// Draw i is sample_field(posterior, derive_seed(seed, "ensemble", i)).
std::vector<grid::ScalarField> posterior_draws(const geostat::LowRankGaussian& posterior, std::size_t n,
                                               std::uint64_t seed);

/// n posterior draws pushed through predict_global. Throws InputError when n < 2.
EnsembleStats predict_posterior_ensemble(const SurrogateModel& model, const geostat::LowRankGaussian& posterior,
                                         const grid::BoundaryCondition& bc, std::size_t n, std::uint64_t seed);

} // namespace riverflow::surrogate
