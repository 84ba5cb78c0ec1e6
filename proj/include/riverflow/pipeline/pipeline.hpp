#pragma once

#include "riverflow/common/config.hpp"
#include "riverflow/geostat/geostat.hpp"
#include "riverflow/grid/field_io.hpp"
#include "riverflow/nn/optimizer.hpp"
#include "riverflow/oracle/oracle.hpp"
#include "riverflow/surrogate/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace riverflow::pipeline {

/// One surrogate to train, named by its config section (train.<name>.*).
struct ModelRun {
    std::string name;
    surrogate::Variant variant = surrogate::Variant::se;
    surrogate::Scope scope = surrogate::Scope::global;
    nn::TrainSpec spec;
    surrogate::Architecture arch;
};

struct PipelineConfig {
    KeyValueConfig source; ///< the parsed text, recorded in the run manifest
    std::uint64_t seed = 0;
    grid::GridShape grid;
    std::filesystem::path gauge_csv;

    geostat::SeparableKernel kernel;
    geostat::FactorRanks ranks;
    double weight_min = 0.15;
    double weight_power = 1.0;
    oracle::OracleConfig oracle;

    // Synthetic field campaign and inversion.
    bool invert = true;
    std::size_t obs_count = 408;
    double obs_noise_fraction = 0.10;
    double obs_discharge = 400.0;
    std::size_t n_pc = 100;
    std::size_t max_gn_iter = 5;

    std::size_t n_bathy = 80;
    std::size_t bcs_per_bathy = 5;
    std::size_t test_bathys = 20;
    double validation_fraction = 0.10;
    grid::PayloadType dtype = grid::PayloadType::f32;

    surrogate::Target target = surrogate::Target::magnitude;
    std::vector<ModelRun> runs;

    std::size_t ensemble_size = 100;
    double ensemble_discharge = 400.0;

    /// Every key listed in the shipped desk.config is required; the error
    /// names the first missing one. Relative paths resolve against `base_dir`.
    static PipelineConfig from(const KeyValueConfig& kv, const std::filesystem::path& base_dir);
    static PipelineConfig load(const std::filesystem::path& path);

    /// Human-readable stage list, one line per stage.
    std::vector<std::string> plan() const;
};

/// Raised when a stage throws; the message starts with the stage name.
class StageFailure : public std::runtime_error {
public:
    StageFailure(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage))
    {
    }
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct ModelMetrics {
    std::string name;
    surrogate::Variant variant = surrogate::Variant::se;
    surrogate::Scope scope = surrogate::Scope::global;
    double train_rmse = 0.0;
    double validation_rmse = 0.0;
    double test_rmse = 0.0;
    std::size_t best_epoch = 0;
    std::size_t param_count = 0;
    std::vector<double> decay_ratio; ///< train, validation, test
    std::vector<std::size_t> sections;
    std::vector<double> partial_rmse; ///< one per entry of `sections`
    double segment_rmse = -1.0;       ///< local models: dense tiling over the whole reach
    double propagation_rmse = -1.0;   ///< global models: surrogate vs oracle ensemble mean
    double surrogate_std_min = -1.0;
    std::size_t oracle_failures = 0;
};

struct PipelineResult {
    std::filesystem::path run_dir;
    double prior_bed_rmse = 0.0;
    double posterior_bed_rmse = 0.0;
    std::size_t dataset_samples = 0;
    std::size_t dataset_failures = 0;
    std::vector<ModelMetrics> models;
    std::string manifest_digest; ///< SHA-256 of manifest.json
    /// Wall-clock seconds per stage in run order; kept out of the manifest.
    std::vector<std::pair<std::string, double>> stage_seconds;
    double stage_time(const std::string& prefix) const; ///< summed over stages starting with `prefix`
    const ModelMetrics& model(const std::string& name) const;
};

/// Runs every stage into `run_dir`, which is emptied first. Progress lines go
/// to `log` when given. Throws StageFailure; files written before the failing
/// stage are kept.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& run_dir, std::ostream* log = nullptr);

} // namespace riverflow::pipeline
