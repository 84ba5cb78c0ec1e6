#include "riverflow/nn/checkpoint.hpp"

#include "riverflow/common/binary_io.hpp"
#include "riverflow/common/error.hpp"

#include <fstream>
#include <sstream>

namespace riverflow::nn {

void Checkpoint::add(std::string name, std::vector<double> values)
{
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw InputError("checkpoint block names must be non-empty and contain no whitespace");
    if (has(name)) throw InputError("duplicate checkpoint block '" + name + "'");
    blocks.emplace_back(std::move(name), std::move(values));
}

bool Checkpoint::has(const std::string& name) const
{
    for (const auto& b : blocks)
        if (b.first == name) return true;
    return false;
}

const std::vector<double>& Checkpoint::block(const std::string& name) const
{
    for (const auto& b : blocks)
        if (b.first == name) return b.second;
    throw FormatError("checkpoint has no block '" + name + "'");
}

void Checkpoint::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    out << "RFN1\nheader_bytes " << header.size() << "\n" << header << "\n";
    for (const auto& [name, values] : blocks) {
        out << "block " << name << " " << values.size() << "\n";
        write_f64_le(out, values);
    }
    out << "end\n";
    if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    const std::string where = path.string() + ": ";
    std::string line;
    if (!std::getline(in, line) || line != "RFN1") throw FormatError(where + "bad magic (expected RFN1)");
    std::size_t bytes = 0;
    {
        if (!std::getline(in, line)) throw FormatError(where + "truncated header");
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key >> bytes) || key != "header_bytes") throw FormatError(where + "missing header_bytes");
    }
    Checkpoint ck;
    ck.header.resize(bytes);
    if (!in.read(ck.header.data(), static_cast<std::streamsize>(bytes))) throw FormatError(where + "truncated header");
    if (in.get() != '\n') throw FormatError(where + "header not terminated");
    while (std::getline(in, line)) {
        if (line == "end") return ck;
        std::istringstream ls(line);
        std::string tag, name;
        std::size_t count = 0;
        if (!(ls >> tag >> name >> count) || tag != "block") throw FormatError(where + "bad block line '" + line + "'");
        std::vector<double> values;
        if (!read_f64_le(in, count, values)) throw FormatError(where + "block '" + name + "' is truncated");
        ck.blocks.emplace_back(name, std::move(values));
    }
    throw FormatError(where + "missing end marker");
}

} // namespace riverflow::nn
