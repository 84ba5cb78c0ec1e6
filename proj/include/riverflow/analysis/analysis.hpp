#pragma once

#include "riverflow/geostat/geostat.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/oracle/oracle.hpp"
#include "riverflow/surrogate/model.hpp"
#include "riverflow/surrogate/prediction.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace riverflow::analysis {

using SampleRefs = std::span<const oracle::Sample* const>;

struct LatentStats {
    std::string tag;
    std::vector<double> sigma; ///< per latent component, sample convention (n - 1)
};

/// Spread of the encoded latent coordinates. Throws InputError with fewer
/// than two items.
LatentStats latent_stats(const surrogate::SurrogateModel& model, SampleRefs samples, const std::string& tag);

struct SensitivityReport {
    std::string tag;
    double baseline_rmse = 0.0;
    std::vector<double> sigma;
    std::vector<double> delta_rmse; ///< |RMSE with component l shifted by 2 sigma_l - baseline|
};

/// Shifts one latent component at a time by +2 sigma_l on every item and
/// re-evaluates through the decoder only. The model is not modified.
SensitivityReport latent_sensitivity(const surrogate::SurrogateModel& model, SampleRefs samples,
                                     const std::string& tag);

/// Mean delta over the trailing `last` components divided by the mean over
/// the leading `first` (0 when both are zero).
double sensitivity_decay_ratio(const SensitivityReport& r, std::size_t first = 5, std::size_t last = 10);

/// {10, 25, 50, 100, 150, 200, 250, 300, 350, 450} rescaled from 501
/// sections to n_along, plus 0 and n_along, sorted and de-duplicated.
std::vector<std::size_t> default_sections(std::size_t n_along);

/// True bed on along indices below `sections`, the reference bed elsewhere.
grid::ScalarField partial_bathymetry(const grid::ScalarField& truth, const grid::ScalarField& reference,
                                     std::size_t sections);

struct PartialResult {
    std::size_t sections = 0;
    double rmse = 0.0;
};

/// Pooled RMSE for each S. Throws InputError when S exceeds n_along.
std::vector<PartialResult> partial_bathymetry_eval(const surrogate::SurrogateModel& model, SampleRefs samples,
                                                   const grid::ScalarField& posterior_mean,
                                                   std::span<const std::size_t> sections);

struct BoxStats {
    std::size_t count = 0;
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    double whisker_low = 0.0, whisker_high = 0.0; ///< extreme values inside the 1.5 IQR fences
    std::vector<double> outliers;
};

/// Linear interpolation between order statistics at h = (n - 1) p.
double quantile_sorted(std::span<const double> sorted, double p);
/// Throws InputError for an empty list.
BoxStats box_stats(std::vector<double> values);

struct DischargeBin {
    double q_low = 0.0, q_high = 0.0;
    std::vector<double> errors;
    BoxStats box; ///< count 0 for an empty bin
};

struct DischargeErrorBins {
    std::vector<DischargeBin> bins;
};

/// Groups per-sample errors by discharge into equal-width bins over
/// [q_min, q_max]; the top edge belongs to the last bin and values outside
/// the range go to the nearest end bin.
DischargeErrorBins bin_errors(std::span<const double> discharge, std::span<const double> errors, double q_min,
                              double q_max, std::size_t n_bins = 5);

/// Per-sample RMSE of `model` binned by each sample's discharge.
DischargeErrorBins error_vs_discharge(const surrogate::SurrogateModel& model, SampleRefs samples, double q_min,
                                      double q_max, std::size_t n_bins = 5);

struct PropagationResult {
    surrogate::EnsembleStats surrogate;
    surrogate::EnsembleStats oracle;
    double mean_rmse = 0.0; ///< between the two ensemble means
    std::size_t oracle_failures = 0;
};

/// Runs the surrogate and the steady solver on the same n posterior draws
/// (draw i from derive_seed(seed, "ensemble", i)). Draws the solver rejects
/// are left out of the solver ensemble and counted.
PropagationResult propagate(const surrogate::SurrogateModel& model, const grid::RiverGrid& grid,
                            const geostat::LowRankGaussian& posterior, const grid::BoundaryCondition& bc,
                            std::size_t n, std::uint64_t seed, const oracle::OracleConfig& oracle_cfg = {});

} // namespace riverflow::analysis
