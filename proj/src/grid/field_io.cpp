#include "riverflow/grid/field_io.hpp"

#include "riverflow/common/binary_io.hpp"
#include "riverflow/common/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace riverflow::grid {

namespace {

constexpr const char* kMagic = "RFS1";

struct FieldHeader {
    GridShape shape;
    PayloadType dtype = PayloadType::f64;
    FieldKind kind = FieldKind::generic;
    std::size_t components = 1;
};

void write_header(std::ostream& out, const GridShape& shape, PayloadType dtype, FieldKind kind, std::size_t components)
{
    std::ostringstream h;
    h.precision(17);
    h << kMagic << "\n"
      << "n_across " << shape.n_across << "\n"
      << "n_along " << shape.n_along << "\n"
      << "spacing_m " << shape.spacing_m << "\n"
      << "dtype " << (dtype == PayloadType::f32 ? "f32" : "f64") << "\n"
      << "kind " << to_string(kind) << "\n"
      << "components " << components << "\n"
      << "end\n";
    out << h.str();
}

std::size_t parse_count(const std::map<std::string, std::string>& header, const std::string& key)
{
    auto it = header.find(key);
    if (it == header.end()) throw FormatError("field header missing '" + key + "'");
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw FormatError("");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw FormatError("field header: bad value for '" + key + "'");
    }
}

FieldHeader read_header(std::istream& in)
{
    const auto header = read_text_header(in, kMagic);
    FieldHeader h;
    h.shape.n_across = parse_count(header, "n_across");
    h.shape.n_along = parse_count(header, "n_along");
    h.components = parse_count(header, "components");
    auto it = header.find("spacing_m");
    if (it == header.end()) throw FormatError("field header missing 'spacing_m'");
    try {
        h.shape.spacing_m = std::stod(it->second);
    } catch (const std::exception&) {
        throw FormatError("field header: bad spacing_m");
    }
    it = header.find("dtype");
    if (it == header.end()) throw FormatError("field header missing 'dtype'");
    h.dtype = parse_payload_type(it->second);
    it = header.find("kind");
    h.kind = it == header.end() ? FieldKind::generic : parse_field_kind(it->second);
    if (h.shape.n_across == 0 || h.shape.n_along == 0) throw FormatError("field header: empty grid");
    return h;
}

std::vector<double> read_payload(std::istream& in, const FieldHeader& h)
{
    const std::size_t count = h.components * h.shape.node_count();
    std::vector<double> values;
    const bool ok = h.dtype == PayloadType::f32 ? read_f32_le(in, count, values) : read_f64_le(in, count, values);
    if (!ok) throw FormatError("field payload shorter than the declared shape");
    if (!at_eof(in)) throw FormatError("field payload longer than the declared shape");
    for (double v : values)
        if (!std::isfinite(v)) throw FormatError("field payload contains a non-finite value");
    return values;
}

void write_payload(std::ostream& out, std::span<const double> values, PayloadType dtype)
{
    if (dtype == PayloadType::f32)
        write_f32_le(out, values);
    else
        write_f64_le(out, values);
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

} // namespace

PayloadType parse_payload_type(std::string_view text)
{
    if (text == "f32") return PayloadType::f32;
    if (text == "f64") return PayloadType::f64;
    throw FormatError("unknown dtype '" + std::string(text) + "'");
}

void save_field(const ScalarField& field, const std::filesystem::path& path, PayloadType dtype)
{
    auto out = open_out(path);
    write_header(out, field.shape(), dtype, field.kind(), 1);
    write_payload(out, field.values(), dtype);
    if (!out) throw InputError("write failed: " + path.string());
}

void save_field(const VectorField& field, const std::filesystem::path& path, PayloadType dtype)
{
    auto out = open_out(path);
    write_header(out, field.shape(), dtype, FieldKind::velocity, 2);
    write_payload(out, field.easting(), dtype);
    write_payload(out, field.northing(), dtype);
    if (!out) throw InputError("write failed: " + path.string());
}

ScalarField load_scalar_field(const std::filesystem::path& path)
{
    auto in = open_in(path);
    const FieldHeader h = read_header(in);
    if (h.components != 1) throw FormatError(path.string() + ": expected a scalar field");
    return ScalarField(h.shape, read_payload(in, h), h.kind);
}

VectorField load_vector_field(const std::filesystem::path& path)
{
    auto in = open_in(path);
    const FieldHeader h = read_header(in);
    if (h.components != 2) throw FormatError(path.string() + ": expected a vector field");
    std::vector<double> both = read_payload(in, h);
    const auto n = static_cast<std::ptrdiff_t>(h.shape.node_count());
    std::vector<double> east(both.begin(), both.begin() + n);
    std::vector<double> north(both.begin() + n, both.end());
    return VectorField(h.shape, std::move(east), std::move(north));
}

} // namespace riverflow::grid
