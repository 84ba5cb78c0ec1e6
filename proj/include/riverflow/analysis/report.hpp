#pragma once

#include "riverflow/analysis/analysis.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace riverflow::analysis {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Fixed-layout SVG documents; equal inputs give byte-identical text.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series);
std::string svg_box_plot(const std::string& title, const std::string& y_label, const DischargeErrorBins& bins);
/// Cells coloured on a linear ramp between the field minimum and maximum; a
/// constant field collapses the legend to a single value.
std::string svg_heatmap(const std::string& title, const grid::ScalarField& field);

/// Writes `text` to `path`, creating parent directories. Throws InputError
/// when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);

/// sensitivity.csv (one row per latent component) and sensitivity.svg.
void emit_sensitivity(const std::filesystem::path& dir, const std::vector<SensitivityReport>& reports);
/// partial_eval.csv and partial_eval.svg.
void emit_partial(const std::filesystem::path& dir, const std::vector<PartialResult>& results);
/// error_bins.csv and error_bins.svg.
void emit_error_bins(const std::filesystem::path& dir, const DischargeErrorBins& bins);
/// Mean and standard deviation fields (.rfs) and their heatmaps.
void emit_ensemble(const std::filesystem::path& dir, const std::string& stem, const surrogate::EnsembleStats& stats);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

} // namespace riverflow::analysis
