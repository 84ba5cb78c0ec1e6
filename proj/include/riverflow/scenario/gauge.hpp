#pragma once

#include "riverflow/grid/boundary.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace riverflow::scenario {

struct GaugeRecord {
    std::chrono::sys_seconds timestamp;
    double discharge_q = 0.0; ///< [m^3/s]
    double stage_zf = 0.0;    ///< [m]
};

enum class Units {
    si, ///< m^3/s and m
    us  ///< ft^3/s and ft, converted on ingest
};

Units parse_units(std::string_view text);

/// Reads `timestamp,discharge_m3s,stage_m` rows (column order free, header
/// required). Returns records sorted by time. Throws FormatError for a missing
/// column or unparsable value and InputError for non-positive discharge or a
/// repeated timestamp.
std::vector<GaugeRecord> ingest_gauge_csv(const std::filesystem::path& path, Units units = Units::si);

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" and the 'T' separated form, optional trailing 'Z'.
std::chrono::sys_seconds parse_timestamp(std::string_view text);

/// Single-valued stage-discharge relation z_f(Q) = a Q^2 + b Q + c on [q_min, q_max].
struct StageDischargeCurve {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double q_min = 85.0;
    double q_max = 840.0;
    double residual_rms = 0.0;
    double residual_max_abs = 0.0;
    std::size_t fit_count = 0;

    double operator()(double q) const { return a * q * q + b * q + c; }

    void save(const std::filesystem::path& path) const;
    static StageDischargeCurve load(const std::filesystem::path& path);
};

/// Least-squares parabola through (Q, z_f). The discharge range defaults to
/// the observed extremes. Throws SolveError with fewer than 3 distinct Q values.
StageDischargeCurve fit_stage_discharge(std::span<const GaugeRecord> records);

/// Q ~ Uniform(q_min, q_max), z_f = curve(Q); deterministic in `seed`.
std::vector<grid::BoundaryCondition> sample_bc(const StageDischargeCurve& curve, std::size_t n, std::uint64_t seed);

} // namespace riverflow::scenario
