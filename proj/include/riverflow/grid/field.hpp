#pragma once

#include "riverflow/grid/grid.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace riverflow::grid {

enum class FieldKind { generic, bathymetry, depth, velocity_magnitude, easting, northing, velocity };

std::string_view to_string(FieldKind kind);
FieldKind parse_field_kind(std::string_view text);

/// Real values on every node of a grid. Immutable once constructed.
class ScalarField {
public:
    ScalarField() = default;
    /// Throws InputError on a shape mismatch or non-finite entry.
    ScalarField(GridShape shape, std::vector<double> values, FieldKind kind = FieldKind::generic);

    static ScalarField constant(const GridShape& shape, double value, FieldKind kind = FieldKind::generic);

    const GridShape& shape() const { return shape_; }
    FieldKind kind() const { return kind_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t node) const { return values_[node]; }
    double at(std::size_t i_across, std::size_t j_along) const { return values_[shape_.index(i_across, j_along)]; }

    double min() const;
    double max() const;

private:
    GridShape shape_;
    FieldKind kind_ = FieldKind::generic;
    std::vector<double> values_;
};

/// Easting/northing velocity components on a grid [m/s].
class VectorField {
public:
    VectorField() = default;
    VectorField(GridShape shape, std::vector<double> easting, std::vector<double> northing);

    const GridShape& shape() const { return shape_; }
    std::span<const double> easting() const { return easting_; }
    std::span<const double> northing() const { return northing_; }
    ScalarField easting_field() const;
    ScalarField northing_field() const;

private:
    GridShape shape_;
    std::vector<double> easting_;
    std::vector<double> northing_;
};

/// sqrt(mean((a - b)^2)) over all nodes.
double field_rmse(const ScalarField& a, const ScalarField& b);

/// Pointwise sqrt(easting^2 + northing^2).
ScalarField velocity_magnitude(const VectorField& v);

} // namespace riverflow::grid
