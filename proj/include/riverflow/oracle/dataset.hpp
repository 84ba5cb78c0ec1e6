#pragma once

#include "riverflow/grid/boundary.hpp"
#include "riverflow/grid/field.hpp"
#include "riverflow/grid/field_io.hpp"
#include "riverflow/grid/grid.hpp"
#include "riverflow/oracle/oracle.hpp"
#include "riverflow/scenario/gauge.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace riverflow::oracle {

enum class Split { train, validation, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Sample {
    std::size_t bathy_index = 0;
    std::size_t bc_index = 0;
    grid::BoundaryCondition bc;
    Split split = Split::train;
    grid::ScalarField bathy;
    grid::VectorField velocity;
    grid::ScalarField depth;
    std::string digest; ///< SHA-256 over the bathymetry, velocity and depth files
};

struct FailedSolve {
    std::size_t bathy_index = 0;
    std::size_t bc_index = 0;
    grid::BoundaryCondition bc;
    std::string error;
};

/// Directory layout:
///   grid.csv, manifest.jsonl (one accepted sample per line), failures.jsonl,
///   dataset.json (counts and the manifest digest), fields/*.rfs
class SampleSet {
public:
    SampleSet(grid::RiverGrid grid, std::vector<Sample> samples, std::vector<FailedSolve> failures,
              std::string manifest_digest)
        : grid_(std::move(grid)), samples_(std::move(samples)), failures_(std::move(failures)),
          manifest_digest_(std::move(manifest_digest))
    {
    }

    const grid::RiverGrid& grid() const { return grid_; }
    const std::vector<Sample>& samples() const { return samples_; }
    const std::vector<FailedSolve>& failures() const { return failures_; }
    std::vector<const Sample*> split(Split s) const;
    const std::string& manifest_digest() const { return manifest_digest_; }

    /// Verifies every record digest; throws FormatError on a mismatch.
    static SampleSet load(const std::filesystem::path& dir);

private:
    grid::RiverGrid grid_;
    std::vector<Sample> samples_;
    std::vector<FailedSolve> failures_;
    std::string manifest_digest_;
};

struct DatasetConfig {
    std::size_t bcs_per_bathy = 10;
    double validation_fraction = 0.10;
    /// The last `test_bathys` bathymetries and all their BC draws form the test split.
    std::size_t test_bathys = 0;
    grid::PayloadType dtype = grid::PayloadType::f32;
};

/// Solves every (bathymetry, BC) pair and writes the dataset to `out_dir`.
/// BC draws for bathymetry b use derive_seed(seed, "dataset/bc", b). Failed
/// solves are written to failures.jsonl and skipped. The returned samples hold
/// the values exactly as stored on disk. Throws SolveError if every solve fails.
SampleSet build_dataset(const grid::RiverGrid& grid, const std::vector<grid::ScalarField>& bathys,
                        const scenario::StageDischargeCurve& curve, const DatasetConfig& cfg,
                        const OracleConfig& oracle, std::uint64_t seed, const std::filesystem::path& out_dir);

} // namespace riverflow::oracle
