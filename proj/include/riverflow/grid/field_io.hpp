#pragma once

// Field files: a text header followed by a little-endian payload.
//
//   RFS1
//   n_across 41
//   n_along 501
//   spacing_m 2.4
//   dtype f32
//   kind bathymetry
//   components 1
//   end
//   <payload: components x n_along x n_across values, across index fastest>
//
// Vector fields store the easting block followed by the northing block.

#include "riverflow/grid/field.hpp"

#include <filesystem>
#include <string_view>

namespace riverflow::grid {

enum class PayloadType { f32, f64 };

PayloadType parse_payload_type(std::string_view text);

void save_field(const ScalarField& field, const std::filesystem::path& path, PayloadType dtype = PayloadType::f64);
void save_field(const VectorField& field, const std::filesystem::path& path, PayloadType dtype = PayloadType::f64);

ScalarField load_scalar_field(const std::filesystem::path& path);
VectorField load_vector_field(const std::filesystem::path& path);

} // namespace riverflow::grid
