#include "riverflow/scenario/gauge.hpp"

#include "riverflow/common/config.hpp"
#include "riverflow/common/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace riverflow::scenario {

namespace {

constexpr double kCubicFeetToCubicMeters = 0.028316846592;
constexpr double kFeetToMeters = 0.3048;

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\n\"");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\"");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_real(const std::string& text, int line_no, const char* column)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw FormatError("gauge line " + std::to_string(line_no) + ": cannot parse " + column + " '" + text + "'");
    return v;
}

} // namespace

Units parse_units(std::string_view text)
{
    if (text == "si") return Units::si;
    if (text == "us") return Units::us;
    throw InputError("unknown units '" + std::string(text) + "' (expected si or us)");
}

std::chrono::sys_seconds parse_timestamp(std::string_view text)
{
    std::string s(text);
    if (!s.empty() && s.back() == 'Z') s.pop_back();
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char sep = 0;
    int consumed = 0;
    int fields = std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed);
    if (fields != 3) throw FormatError("bad timestamp '" + std::string(text) + "'");
    if (static_cast<std::size_t>(consumed) != s.size()) {
        int rest = 0;
        fields = std::sscanf(s.c_str() + consumed, "%c%2d:%2d%n", &sep, &h, &mi, &rest);
        if (fields != 3 || (sep != 'T' && sep != ' ')) throw FormatError("bad timestamp '" + std::string(text) + "'");
        consumed += rest;
        if (static_cast<std::size_t>(consumed) != s.size()) {
            fields = std::sscanf(s.c_str() + consumed, ":%2d%n", &sec, &rest);
            if (fields != 1 || static_cast<std::size_t>(consumed + rest) != s.size())
                throw FormatError("bad timestamp '" + std::string(text) + "'");
        }
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw FormatError("invalid date '" + std::string(text) + "'");
    return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{sec};
}

std::vector<GaugeRecord> ingest_gauge_csv(const std::filesystem::path& path, Units units)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open gauge file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("gauge file is empty");
    const auto header = split_csv(line);
    auto column = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError("gauge file missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_time = column("timestamp");
    const std::size_t c_q = column("discharge_m3s");
    const std::size_t c_z = column("stage_m");
    const std::size_t needed = std::max({c_time, c_q, c_z}) + 1;

    const double q_scale = units == Units::us ? kCubicFeetToCubicMeters : 1.0;
    const double z_scale = units == Units::us ? kFeetToMeters : 1.0;

    std::vector<GaugeRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() < needed) throw FormatError("gauge line " + std::to_string(line_no) + ": missing column");
        GaugeRecord r;
        r.timestamp = parse_timestamp(cells[c_time]);
        r.discharge_q = parse_real(cells[c_q], line_no, "discharge") * q_scale;
        r.stage_zf = parse_real(cells[c_z], line_no, "stage") * z_scale;
        if (!(r.discharge_q > 0.0))
            throw InputError("gauge line " + std::to_string(line_no) + ": discharge must be positive");
        records.push_back(r);
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const GaugeRecord& a, const GaugeRecord& b) { return a.timestamp < b.timestamp; });
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].timestamp == records[i - 1].timestamp) throw InputError("gauge file has a duplicate timestamp");
    return records;
}

StageDischargeCurve fit_stage_discharge(std::span<const GaugeRecord> records)
{
    std::set<double> distinct;
    for (const auto& r : records) distinct.insert(r.discharge_q);
    if (records.size() < 3 || distinct.size() < 3)
        throw SolveError("fit_stage_discharge: need at least 3 distinct discharge values");

    const double q_lo = *distinct.begin();
    const double q_hi = *distinct.rbegin();
    // Fit in a centred, scaled variable to keep the design well conditioned.
    const double center = 0.5 * (q_lo + q_hi);
    const double scale = 0.5 * (q_hi - q_lo);
    const auto n = static_cast<Eigen::Index>(records.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = (records[static_cast<std::size_t>(i)].discharge_q - center) / scale;
        design(i, 0) = t * t;
        design(i, 1) = t;
        design(i, 2) = 1.0;
        z(i) = records[static_cast<std::size_t>(i)].stage_zf;
    }
    const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(z);

    StageDischargeCurve curve;
    const double s2 = scale * scale;
    curve.a = coef(0) / s2;
    curve.b = coef(1) / scale - 2.0 * coef(0) * center / s2;
    curve.c = coef(0) * center * center / s2 - coef(1) * center / scale + coef(2);
    curve.q_min = q_lo;
    curve.q_max = q_hi;

    double ss = 0.0, worst = 0.0;
    for (const auto& r : records) {
        const double res = r.stage_zf - curve(r.discharge_q);
        ss += res * res;
        worst = std::max(worst, std::abs(res));
    }
    curve.residual_rms = std::sqrt(ss / static_cast<double>(records.size()));
    curve.residual_max_abs = worst;
    curve.fit_count = records.size();
    return curve;
}

void StageDischargeCurve::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "# stage-discharge curve z_f = a Q^2 + b Q + c\n"
                  "a = %.17g\nb = %.17g\nc = %.17g\nq_min = %.17g\nq_max = %.17g\n"
                  "residual_rms = %.17g\nresidual_max_abs = %.17g\nfit_count = %zu\n",
                  a, b, c, q_min, q_max, residual_rms, residual_max_abs, fit_count);
    out << buf;
}

StageDischargeCurve StageDischargeCurve::load(const std::filesystem::path& path)
{
    const auto cfg = KeyValueConfig::load(path);
    StageDischargeCurve c;
    c.a = cfg.get_double("a");
    c.b = cfg.get_double("b");
    c.c = cfg.get_double("c");
    c.q_min = cfg.get_double("q_min");
    c.q_max = cfg.get_double("q_max");
    c.residual_rms = cfg.get_double("residual_rms", 0.0);
    c.residual_max_abs = cfg.get_double("residual_max_abs", 0.0);
    c.fit_count = static_cast<std::size_t>(cfg.get_int("fit_count", 0));
    return c;
}

std::vector<grid::BoundaryCondition> sample_bc(const StageDischargeCurve& curve, std::size_t n, std::uint64_t seed)
{
    require(n >= 1, "sample_bc: n must be at least 1");
    if (!(curve.q_min < curve.q_max)) throw InputError("sample_bc: q_min must be below q_max");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(curve.q_min, curve.q_max);
    std::vector<grid::BoundaryCondition> out;
    out.reserve(n);
    while (out.size() < n) {
        const double q = uniform(rng);
        if (q <= curve.q_min) continue; // open interval
        out.push_back({q, curve(q)});
    }
    return out;
}

} // namespace riverflow::scenario
