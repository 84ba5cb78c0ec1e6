#include "riverflow/oracle/oracle.hpp"

#include "riverflow/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace riverflow::oracle {

using grid::GridShape;
using grid::ScalarField;
using grid::VectorField;

namespace {

constexpr double kGravity = 9.81;
constexpr std::size_t kMinWetted = 3;
constexpr double kInvPhi = 0.6180339887498949;

// Area, conveyance and wetted count of one cross section at stage z.
struct Hydraulics {
    double area = 0.0;
    double conveyance = 0.0;
    std::size_t wetted = 0;
};

double wetted_depth(double z, double bed, double h_min)
{
    const double h = z - bed;
    return h > 0.0 ? std::max(h, h_min) : 0.0;
}

Hydraulics section_hydraulics(std::span<const double> bed, double z, double dy, const OracleConfig& cfg)
{
    Hydraulics out;
    for (double b : bed) {
        const double h = wetted_depth(z, b, cfg.h_min);
        if (h <= 0.0) continue;
        ++out.wetted;
        out.area += h * dy;
        out.conveyance += std::pow(h, 5.0 / 3.0) * dy / cfg.manning_n;
    }
    return out;
}

// Total head minus the upstream half of the friction loss; the standard step
// balances this against the downstream head plus the downstream half.
double step_head(const Hydraulics& hy, double z, double q, double dx)
{
    const double v = q / hy.area;
    const double sf = (q * q) / (hy.conveyance * hy.conveyance);
    return z + v * v / (2.0 * kGravity) - 0.5 * dx * sf;
}

double lowest_wet_stage(std::span<const double> bed)
{
    std::vector<double> sorted(bed.begin(), bed.end());
    std::nth_element(sorted.begin(), sorted.begin() + (kMinWetted - 1), sorted.end());
    const double third = sorted[kMinWetted - 1];
    return third + 1e-9 * std::max(1.0, std::abs(third));
}

double solve_upstream_stage(std::span<const double> bed, double target, double q, double dx, double dy,
                            const OracleConfig& cfg, std::size_t j)
{
    auto head = [&](double z) { return step_head(section_hydraulics(bed, z, dy, cfg), z, q, dx); };

    const double z_floor = lowest_wet_stage(bed);
    double z_hi = std::max(target, z_floor) + 1.0;
    for (int k = 0; head(z_hi) <= target; ++k) {
        if (k > 60) throw SolveError("backwater stage search diverged at section " + std::to_string(j));
        z_hi += 10.0;
    }

    // The subcritical root lies above the minimum of the head curve.
    double a = z_floor, b = z_hi;
    for (std::size_t it = 0; it < cfg.max_iter && b - a > cfg.tol; ++it) {
        const double c = b - kInvPhi * (b - a);
        const double d = a + kInvPhi * (b - a);
        if (head(c) < head(d))
            b = d;
        else
            a = c;
    }
    double lo = 0.5 * (a + b);
    if (head(lo) > target) {
        lo = z_floor;
        if (head(lo) > target)
            throw SolveError("no subcritical water surface at section " + std::to_string(j) +
                             " (flow chokes or the section runs dry)");
    }

    double hi = z_hi;
    std::size_t it = 0;
    for (; it < cfg.max_iter && hi - lo > cfg.tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (head(mid) > target)
            hi = mid;
        else
            lo = mid;
    }
    if (hi - lo > cfg.tol)
        throw SolveError("backwater bisection did not converge at section " + std::to_string(j) + " after " +
                         std::to_string(cfg.max_iter) + " iterations");
    return 0.5 * (lo + hi);
}

} // namespace

std::string_view to_string(StageMode mode)
{
    return mode == StageMode::fixed_stage ? "fixed_stage" : "backwater";
}

StageMode parse_stage_mode(std::string_view text)
{
    if (text == "fixed_stage" || text == "fixed-stage") return StageMode::fixed_stage;
    if (text == "backwater") return StageMode::backwater;
    throw InputError("unknown oracle mode '" + std::string(text) + "' (expected fixed_stage or backwater)");
}

void OracleConfig::validate() const
{
    require(manning_n > 0.0 && std::isfinite(manning_n), "manning_n must be positive");
    require(h_min > 0.0 && std::isfinite(h_min), "h_min must be positive");
    require(tol > 0.0, "oracle tol must be positive");
    require(max_iter >= 1, "oracle max_iter must be at least 1");
}

SteadyState solve_steady(const grid::RiverGrid& grid, const ScalarField& bathy, const grid::BoundaryCondition& bc,
                         const OracleConfig& cfg)
{
    cfg.validate();
    bc.validate();
    const GridShape& shape = grid.shape();
    if (bathy.shape().n_across != shape.n_across || bathy.shape().n_along != shape.n_along)
        throw InputError("bathymetry shape does not match the grid");
    const std::size_t nx = shape.n_across;
    const std::size_t ny = shape.n_along;
    const double dy = shape.spacing_m;
    const double q = bc.discharge_q;
    auto bed = [&](std::size_t j) { return bathy.values().subspan(j * nx, nx); };

    std::vector<double> surface(ny, bc.stage_zf);
    if (cfg.mode == StageMode::backwater) {
        const auto arc = grid.arc_length();
        Hydraulics down = section_hydraulics(bed(ny - 1), surface[ny - 1], dy, cfg);
        if (down.wetted < kMinWetted)
            throw SolveError("downstream stage leaves fewer than 3 wetted nodes at section " + std::to_string(ny - 1));
        for (std::size_t jj = ny - 1; jj-- > 0;) {
            const double dx = arc[jj + 1] - arc[jj];
            const double target = surface[jj + 1] + std::pow(q / down.area, 2) / (2.0 * kGravity) +
                                  0.5 * dx * (q * q) / (down.conveyance * down.conveyance);
            surface[jj] = solve_upstream_stage(bed(jj), target, q, dx, dy, cfg, jj);
            down = section_hydraulics(bed(jj), surface[jj], dy, cfg);
        }
    }

    std::vector<double> depth(shape.node_count(), 0.0);
    std::vector<double> east(shape.node_count(), 0.0);
    std::vector<double> north(shape.node_count(), 0.0);
    const auto tangents = grid.tangents();
    for (std::size_t j = 0; j < ny; ++j) {
        const auto b = bed(j);
        double denom = 0.0;
        std::size_t wetted = 0;
        for (std::size_t i = 0; i < nx; ++i) {
            const double h = wetted_depth(surface[j], b[i], cfg.h_min);
            depth[j * nx + i] = h;
            if (h > 0.0) {
                ++wetted;
                denom += std::pow(h, 5.0 / 3.0) * dy;
            }
        }
        if (wetted < kMinWetted)
            throw SolveError("dry section " + std::to_string(j) + ": " + std::to_string(wetted) +
                             " wetted nodes at stage " + std::to_string(surface[j]));
        for (std::size_t i = 0; i < nx; ++i) {
            const double h = depth[j * nx + i];
            if (h <= 0.0) continue;
            const double u = q * std::pow(h, 2.0 / 3.0) / denom;
            east[j * nx + i] = u * tangents[j].x;
            north[j * nx + i] = u * tangents[j].y;
        }
    }
    return {VectorField(shape, std::move(east), std::move(north)),
            ScalarField(shape, std::move(depth), grid::FieldKind::depth), std::move(surface)};
}

ObservationSet make_observations(const VectorField& v, std::size_t k, double noise_fraction, std::uint64_t seed)
{
    const std::size_t n = v.shape().node_count();
    require(k <= n, "cannot observe " + std::to_string(k) + " of " + std::to_string(n) + " nodes");
    require(noise_fraction >= 0.0 && std::isfinite(noise_fraction), "noise_fraction must be non-negative");

    const ScalarField mag = grid::velocity_magnitude(v);
    const double sigma = noise_fraction * (n > 0 ? mag.max() : 0.0);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t t = 0; t < k; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, n - 1);
        std::swap(order[t], order[pick(rng)]);
    }

    ObservationSet obs;
    obs.shape = v.shape();
    obs.noise_sigma = sigma;
    obs.locations.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t node : obs.locations) {
        obs.easting.push_back(v.easting()[node] + sigma * noise(rng));
        obs.northing.push_back(v.northing()[node] + sigma * noise(rng));
    }
    return obs;
}

void ObservationSet::save(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write observations to " + path.string());
    out << std::setprecision(17);
    out << "# n_across=" << shape.n_across << " n_along=" << shape.n_along << " spacing_m=" << shape.spacing_m
        << " noise_sigma=" << noise_sigma << "\n";
    out << "node,easting,northing\n";
    for (std::size_t t = 0; t < locations.size(); ++t)
        out << locations[t] << "," << easting[t] << "," << northing[t] << "\n";
    if (!out) throw InputError("failed writing " + path.string());
}

ObservationSet ObservationSet::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open observations " + path.string());
    ObservationSet obs;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw FormatError(path.string() + ": missing header");
    {
        std::istringstream hs(line.substr(2));
        std::string token;
        int found = 0;
        while (hs >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            try {
                if (key == "n_across") obs.shape.n_across = std::stoul(value), ++found;
                else if (key == "n_along") obs.shape.n_along = std::stoul(value), ++found;
                else if (key == "spacing_m") obs.shape.spacing_m = std::stod(value), ++found;
                else if (key == "noise_sigma") obs.noise_sigma = std::stod(value), ++found;
            } catch (const std::exception&) {
                throw FormatError(path.string() + ": bad header value for " + key);
            }
        }
        if (found != 4) throw FormatError(path.string() + ": incomplete header");
    }
    if (!std::getline(in, line) || line != "node,easting,northing")
        throw FormatError(path.string() + ": expected column line 'node,easting,northing'");
    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b, c;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
        try {
            const std::size_t node = std::stoul(a);
            if (node >= obs.shape.node_count())
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": node index out of range");
            obs.locations.push_back(node);
            obs.easting.push_back(std::stod(b));
            obs.northing.push_back(std::stod(c));
        } catch (const std::logic_error&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unparsable number");
        }
    }
    return obs;
}

namespace {

// Signed curvature per section from the change in tangent heading.
std::vector<double> curvature(const grid::RiverGrid& grid)
{
    const auto t = grid.tangents();
    const auto arc = grid.arc_length();
    const std::size_t n = t.size();
    std::vector<double> k(n, 0.0);
    if (n < 3) return k;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = j == 0 ? 0 : j - 1;
        const std::size_t b = j + 1 == n ? n - 1 : j + 1;
        const double cross = t[a].x * t[b].y - t[a].y * t[b].x;
        const double dot = t[a].x * t[b].x + t[a].y * t[b].y;
        k[j] = std::atan2(cross, dot) / (arc[b] - arc[a]);
    }
    return k;
}

ScalarField channel_bed(const grid::RiverGrid& grid, const ChannelShape& s, bool bend_response)
{
    require(s.bank_z > s.thalweg_z, "bank elevation must exceed thalweg elevation");
    require(s.profile_power > 0.0, "profile_power must be positive");
    require(std::abs(s.thalweg_shift) < 1.0, "thalweg_shift must lie in (-1, 1)");
    const GridShape& shape = grid.shape();
    const auto kappa = curvature(grid);
    double kmax = 0.0;
    for (double k : kappa) kmax = std::max(kmax, std::abs(k));
    const auto arc = grid.arc_length();

    std::vector<double> z(shape.node_count());
    const double half = 0.5 * static_cast<double>(shape.n_across - 1);
    for (std::size_t j = 0; j < shape.n_along; ++j) {
        // Outer bank of a left turn (positive curvature) is the right bank.
        const double eta = bend_response && kmax > 0.0 ? -s.thalweg_shift * kappa[j] / kmax : 0.0;
        const double zt = bend_response ? s.thalweg_z + s.riffle_amplitude *
                                                            std::sin(2.0 * std::numbers::pi * arc[j] / s.riffle_wavelength)
                                        : s.thalweg_z;
        for (std::size_t i = 0; i < shape.n_across; ++i) {
            const double xi = half > 0.0 ? (static_cast<double>(i) - half) / half : 0.0;
            const double d = xi >= eta ? (xi - eta) / (1.0 - eta) : (eta - xi) / (1.0 + eta);
            z[shape.index(i, j)] = zt + (s.bank_z - zt) * std::pow(std::clamp(d, 0.0, 1.0), s.profile_power);
        }
    }
    return ScalarField(shape, std::move(z), grid::FieldKind::bathymetry);
}

} // namespace

ScalarField synthetic_bathymetry(const grid::RiverGrid& grid, const ChannelShape& shape)
{
    return channel_bed(grid, shape, true);
}

ScalarField template_bathymetry(const grid::RiverGrid& grid, const ChannelShape& shape)
{
    return channel_bed(grid, shape, false);
}

} // namespace riverflow::oracle
