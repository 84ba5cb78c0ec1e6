#include "riverflow/grid/grid.hpp"

#include "riverflow/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace riverflow::grid {

RiverGrid::RiverGrid(std::size_t n_across, std::vector<Point2> centerline, double spacing_m)
    : shape_{n_across, centerline.size(), spacing_m}, centerline_(std::move(centerline))
{
    require(n_across > 0, "RiverGrid: n_across must be positive");
    require(shape_.n_along >= 2, "RiverGrid: centerline needs at least two points");
    require(spacing_m > 0.0 && std::isfinite(spacing_m), "RiverGrid: spacing must be positive");

    const std::size_t n = shape_.n_along;
    arc_length_.assign(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
        const double ds = std::hypot(centerline_[j].x - centerline_[j - 1].x, centerline_[j].y - centerline_[j - 1].y);
        if (!(ds > 0.0)) throw InputError("RiverGrid: centerline arc length must be strictly increasing");
        arc_length_[j] = arc_length_[j - 1] + ds;
    }

    tangents_.resize(n);
    across_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t lo = j == 0 ? 0 : j - 1;
        const std::size_t hi = j + 1 == n ? n - 1 : j + 1;
        const double tx = centerline_[hi].x - centerline_[lo].x;
        const double ty = centerline_[hi].y - centerline_[lo].y;
        const double norm = std::hypot(tx, ty);
        if (!(norm > 0.0)) throw InputError("RiverGrid: degenerate centerline tangent");
        tangents_[j] = {tx / norm, ty / norm};
        across_[j] = {-tangents_[j].y, tangents_[j].x};
    }
}

RiverGrid RiverGrid::synthetic_bend(std::size_t n_across, std::size_t n_along, double spacing_m)
{
    require(n_along >= 2, "synthetic_bend: n_along must be at least 2");
    const double length = spacing_m * static_cast<double>(n_along - 1);
    const double start_heading = -10.0 * std::numbers::pi / 180.0;
    const double turn = 90.0 * std::numbers::pi / 180.0;
    const double bend_begin = 0.1 * length;
    const double bend_end = 0.9 * length;
    auto heading = [&](double s) {
        double t = (s - bend_begin) / (bend_end - bend_begin);
        t = std::clamp(t, 0.0, 1.0);
        return start_heading + turn * t * t * (3.0 - 2.0 * t);
    };

    std::vector<Point2> pts(n_along);
    for (std::size_t j = 1; j < n_along; ++j) {
        const double s_mid = spacing_m * (static_cast<double>(j) - 0.5);
        const double h = heading(s_mid);
        pts[j] = {pts[j - 1].x + spacing_m * std::cos(h), pts[j - 1].y + spacing_m * std::sin(h)};
    }
    return RiverGrid(n_across, std::move(pts), spacing_m);
}

Point2 RiverGrid::node_position(std::size_t i_across, std::size_t j_along) const
{
    const double offset = (static_cast<double>(i_across) - 0.5 * static_cast<double>(shape_.n_across - 1)) * shape_.spacing_m;
    return {centerline_[j_along].x + offset * across_[j_along].x, centerline_[j_along].y + offset * across_[j_along].y};
}

void RiverGrid::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out.precision(17);
    out << "# riverflow centerline\n";
    out << "# n_across=" << shape_.n_across << " spacing_m=" << shape_.spacing_m << "\n";
    out << "x,y\n";
    for (const auto& p : centerline_) out << p.x << ',' << p.y << '\n';
}

RiverGrid RiverGrid::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::size_t n_across = 0;
    double spacing = 0.0;
    std::vector<Point2> pts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream tokens(line.substr(1));
            std::string tok;
            while (tokens >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq);
                const std::string value = tok.substr(eq + 1);
                if (key == "n_across") n_across = std::stoul(value);
                if (key == "spacing_m") spacing = std::stod(value);
            }
            continue;
        }
        if (line == "x,y") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw FormatError("grid file line " + std::to_string(line_no) + ": expected x,y");
        try {
            pts.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw FormatError("grid file line " + std::to_string(line_no) + ": unparsable coordinate");
        }
    }
    if (n_across == 0 || spacing <= 0.0) throw FormatError("grid file missing n_across/spacing_m header");
    return RiverGrid(n_across, std::move(pts), spacing);
}

} // namespace riverflow::grid
