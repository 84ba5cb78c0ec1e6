#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace riverflow::nn {

/// Versioned container for trained models:
///
///   RFN1
///   header_bytes <n>
///   <n bytes of JSON text>
///   block <name> <count>       repeated, each followed by count little-endian f64
///   end
class Checkpoint {
public:
    std::string header; ///< JSON text
    std::vector<std::pair<std::string, std::vector<double>>> blocks;

    void add(std::string name, std::vector<double> values);
    bool has(const std::string& name) const;
    /// Throws FormatError when the block is missing.
    const std::vector<double>& block(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

} // namespace riverflow::nn
