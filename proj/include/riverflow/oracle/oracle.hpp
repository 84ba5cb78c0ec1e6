#pragma once

#include "riverflow/grid/boundary.hpp"
#include "riverflow/grid/field.hpp"
#include "riverflow/grid/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace riverflow::oracle {

enum class StageMode { fixed_stage, backwater };

std::string_view to_string(StageMode mode);
StageMode parse_stage_mode(std::string_view text);

struct OracleConfig {
    double manning_n = 0.03; ///< [s m^(-1/3)]
    double h_min = 0.05;     ///< depth floor on wetted nodes [m]
    StageMode mode = StageMode::backwater;
    std::size_t max_iter = 200; ///< bisection steps per cross section
    double tol = 1e-6;          ///< stage tolerance [m]

    void validate() const;
};

struct SteadyState {
    grid::VectorField velocity;   ///< [m/s]
    grid::ScalarField depth;      ///< [m], zero on dry nodes
    std::vector<double> surface;  ///< water-surface elevation per cross section [m]
};

/// Quasi-2D steady flow. The water surface is either flat at z_f or marched
/// upstream from z_f with the standard-step energy balance and Manning
/// friction. Within a section the streamwise speed is u_i = Q h_i^(2/3) /
/// sum_k(h_k^(5/3) dy), so sum_i u_i h_i dy = Q. Speeds point along the local
/// centerline tangent.
///
/// Throws SolveError when a section has fewer than 3 wetted nodes or the
/// stage search does not converge, InputError on a grid/field mismatch.
SteadyState solve_steady(const grid::RiverGrid& grid, const grid::ScalarField& bathy,
                         const grid::BoundaryCondition& bc, const OracleConfig& cfg = {});

/// Sparse noisy velocity measurements.
struct ObservationSet {
    grid::GridShape shape;
    std::vector<std::size_t> locations; ///< node indices
    std::vector<double> easting;        ///< [m/s]
    std::vector<double> northing;       ///< [m/s]
    double noise_sigma = 0.0;           ///< [m/s]

    std::size_t size() const { return locations.size(); }
    /// CSV with a "# n_across=.. n_along=.. spacing_m=.. noise_sigma=.." line
    /// followed by "node,easting,northing" rows.
    void save(const std::filesystem::path& path) const;
    static ObservationSet load(const std::filesystem::path& path);
};

/// k distinct nodes drawn without replacement; each component gets independent
/// N(0, sigma^2) noise with sigma = noise_fraction * max |v|.
ObservationSet make_observations(const grid::VectorField& v, std::size_t k, double noise_fraction,
                                 std::uint64_t seed);

/// Synthetic channel bed: a thalweg that drifts toward the outer bank in bends,
/// a pool-riffle undulation along the reach and a power-law rise to the banks.
struct ChannelShape {
    double thalweg_z = 24.0;       ///< [m]
    double bank_z = 34.0;          ///< [m]
    double thalweg_shift = 0.35;   ///< fraction of the half width at peak curvature
    double riffle_amplitude = 0.8; ///< [m]
    double riffle_wavelength = 100.0; ///< [m]
    double profile_power = 1.5;
};

/// Defaults give the "true" bed used to synthesize observations.
grid::ScalarField synthetic_bathymetry(const grid::RiverGrid& grid, const ChannelShape& shape = {});
/// Smooth guess without bend response or riffles; the prior mean.
grid::ScalarField template_bathymetry(const grid::RiverGrid& grid, const ChannelShape& shape = {});

} // namespace riverflow::oracle
