#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace riverflow {

namespace detail {
template <typename U>
U to_little(U v)
{
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        U out = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) out |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(U) - 1 - i));
        return out;
    }
}
} // namespace detail

inline void write_f64_le(std::ostream& out, std::span<const double> values)
{
    std::vector<char> buf(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = detail::to_little(std::bit_cast<std::uint64_t>(values[i]));
        std::memcpy(buf.data() + 8 * i, &bits, 8);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void write_f32_le(std::ostream& out, std::span<const double> values)
{
    std::vector<char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = detail::to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
        std::memcpy(buf.data() + 4 * i, &bits, 4);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

/// Reads exactly `count` values; returns false on a short read.
inline bool read_f64_le(std::istream& in, std::size_t count, std::vector<double>& out)
{
    std::vector<char> buf(count * 8);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) return false;
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, buf.data() + 8 * i, 8);
        out[i] = std::bit_cast<double>(detail::to_little(bits));
    }
    return true;
}

inline bool read_f32_le(std::istream& in, std::size_t count, std::vector<double>& out)
{
    std::vector<char> buf(count * 4);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) return false;
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, buf.data() + 4 * i, 4);
        out[i] = static_cast<double>(std::bit_cast<float>(detail::to_little(bits)));
    }
    return true;
}

/// Parses "key value" lines after `magic` up to a line reading "end".
/// Throws FormatError on a wrong magic string or a missing terminator.
std::map<std::string, std::string> read_text_header(std::istream& in, const std::string& magic);

/// True when the stream has no bytes left.
inline bool at_eof(std::istream& in) { return in.peek() == std::char_traits<char>::eof(); }

} // namespace riverflow
