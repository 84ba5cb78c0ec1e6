#include "riverflow/common/binary_io.hpp"

#include "riverflow/common/error.hpp"

namespace riverflow {

std::map<std::string, std::string> read_text_header(std::istream& in, const std::string& magic)
{
    std::string line;
    if (!std::getline(in, line) || line != magic)
        throw FormatError("bad magic: expected '" + magic + "'");
    std::map<std::string, std::string> header;
    while (std::getline(in, line)) {
        if (line == "end") return header;
        const auto space = line.find(' ');
        if (space == std::string::npos || space == 0) throw FormatError("malformed header line '" + line + "'");
        header[line.substr(0, space)] = line.substr(space + 1);
    }
    throw FormatError("header not terminated by 'end'");
}

} // namespace riverflow
