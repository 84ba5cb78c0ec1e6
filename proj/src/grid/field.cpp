#include "riverflow/grid/field.hpp"

#include "riverflow/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace riverflow::grid {

namespace {

void check_values(const GridShape& shape, std::span<const double> values, const char* what)
{
    if (values.size() != shape.node_count())
        throw InputError(std::string(what) + ": expected " + std::to_string(shape.node_count()) + " values, got " +
                         std::to_string(values.size()));
    for (double v : values)
        if (!std::isfinite(v)) throw InputError(std::string(what) + ": non-finite value");
}

} // namespace

std::string_view to_string(FieldKind kind)
{
    switch (kind) {
    case FieldKind::generic: return "generic";
    case FieldKind::bathymetry: return "bathymetry";
    case FieldKind::depth: return "depth";
    case FieldKind::velocity_magnitude: return "velocity_magnitude";
    case FieldKind::easting: return "easting";
    case FieldKind::northing: return "northing";
    case FieldKind::velocity: return "velocity";
    }
    return "generic";
}

FieldKind parse_field_kind(std::string_view text)
{
    for (FieldKind k : {FieldKind::generic, FieldKind::bathymetry, FieldKind::depth, FieldKind::velocity_magnitude,
                        FieldKind::easting, FieldKind::northing, FieldKind::velocity})
        if (to_string(k) == text) return k;
    throw FormatError("unknown field kind '" + std::string(text) + "'");
}

ScalarField::ScalarField(GridShape shape, std::vector<double> values, FieldKind kind)
    : shape_(shape), kind_(kind), values_(std::move(values))
{
    check_values(shape_, values_, "ScalarField");
}

ScalarField ScalarField::constant(const GridShape& shape, double value, FieldKind kind)
{
    return ScalarField(shape, std::vector<double>(shape.node_count(), value), kind);
}

double ScalarField::min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }

double ScalarField::max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

VectorField::VectorField(GridShape shape, std::vector<double> easting, std::vector<double> northing)
    : shape_(shape), easting_(std::move(easting)), northing_(std::move(northing))
{
    check_values(shape_, easting_, "VectorField easting");
    check_values(shape_, northing_, "VectorField northing");
}

ScalarField VectorField::easting_field() const { return ScalarField(shape_, easting_, FieldKind::easting); }

ScalarField VectorField::northing_field() const { return ScalarField(shape_, northing_, FieldKind::northing); }

double field_rmse(const ScalarField& a, const ScalarField& b)
{
    if (!(a.shape() == b.shape()) || a.size() != b.size()) throw InputError("field_rmse: shape mismatch");
    if (a.size() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(a.size()));
}

ScalarField velocity_magnitude(const VectorField& v)
{
    std::vector<double> mag(v.easting().size());
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(v.easting()[k], v.northing()[k]);
    return ScalarField(v.shape(), std::move(mag), FieldKind::velocity_magnitude);
}

} // namespace riverflow::grid
