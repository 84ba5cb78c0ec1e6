#include "riverflow/common/config.hpp"

#include "riverflow/common/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace riverflow {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T value{};
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) throw InputError("config key '" + key + "': cannot parse '" + text + "'");
    return value;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text)
{
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string KeyValueConfig::get_string(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) throw InputError("missing config key '" + key + "'");
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key) const { return parse_number<double>(key, get_string(key)); }

long long KeyValueConfig::get_int(const std::string& key) const { return parse_number<long long>(key, get_string(key)); }

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const
{
    return parse_number<std::uint64_t>(key, get_string(key));
}

bool KeyValueConfig::get_bool(const std::string& key) const
{
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InputError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<long long> KeyValueConfig::get_int_list(const std::string& key) const
{
    std::vector<long long> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_number<long long>(key, item));
    }
    return out;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key) const
{
    std::vector<std::string> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const
{
    return contains(key) ? get_string(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const
{
    return contains(key) ? get_double(key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const
{
    return contains(key) ? get_int(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const
{
    return contains(key) ? get_bool(key) : fallback;
}

std::string KeyValueConfig::to_string() const
{
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

} // namespace riverflow
