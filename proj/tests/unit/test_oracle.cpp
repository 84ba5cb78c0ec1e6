#include "doctest.h"

#include "riverflow/common/error.hpp"
#include "riverflow/geostat/geostat.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/oracle/oracle.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace riverflow;
using namespace riverflow::oracle;
using grid::BoundaryCondition;
using grid::RiverGrid;
using grid::ScalarField;

namespace fs = std::filesystem;

namespace {

RiverGrid straight(std::size_t n_across, std::size_t n_along, double spacing)
{
    std::vector<grid::Point2> c;
    for (std::size_t j = 0; j < n_along; ++j) c.push_back({double(j) * spacing, 0.0});
    return RiverGrid(n_across, c, spacing);
}

ScalarField bed_from(const RiverGrid& g, double (*f)(std::size_t, std::size_t))
{
    std::vector<double> v(g.node_count());
    for (std::size_t j = 0; j < g.n_along(); ++j)
        for (std::size_t i = 0; i < g.n_across(); ++i) v[g.shape().index(i, j)] = f(i, j);
    return ScalarField(g.shape(), v, grid::FieldKind::bathymetry);
}

// Discharge through section j by summing speed * depth * strip width.
double section_discharge(const SteadyState& s, std::size_t j, double dy)
{
    const auto& shape = s.depth.shape();
    double q = 0.0;
    for (std::size_t i = 0; i < shape.n_across; ++i) {
        const std::size_t n = shape.index(i, j);
        q += std::hypot(s.velocity.easting()[n], s.velocity.northing()[n]) * s.depth[n] * dy;
    }
    return q;
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("riverflow_oracle_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("flat rectangular channel at fixed stage")
{
    const auto g = straight(9, 12, 2.0);
    const auto bed = ScalarField::constant(g.shape(), 10.0);
    OracleConfig cfg;
    cfg.mode = StageMode::fixed_stage;
    const auto s = solve_steady(g, bed, {120.0, 14.0}, cfg);
    const double w = 9 * 2.0, h = 4.0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        CHECK(s.depth[n] == doctest::Approx(h).epsilon(1e-14));
        CHECK(s.velocity.easting()[n] == doctest::Approx(120.0 / (w * h)).epsilon(1e-13));
        CHECK(std::abs(s.velocity.northing()[n]) < 1e-15);
    }
}

TEST_CASE("fixed stage: doubling Q doubles every component exactly")
{
    const auto g = RiverGrid::synthetic_bend(41, 64, 2.4);
    const auto bed = synthetic_bathymetry(g);
    OracleConfig cfg;
    cfg.mode = StageMode::fixed_stage;
    const auto a = solve_steady(g, bed, {200.0, 31.0}, cfg);
    const auto b = solve_steady(g, bed, {400.0, 31.0}, cfg);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        CHECK(b.velocity.easting()[n] == 2.0 * a.velocity.easting()[n]);
        CHECK(b.velocity.northing()[n] == 2.0 * a.velocity.northing()[n]);
    }
}

TEST_CASE("every section carries Q")
{
    const auto g = RiverGrid::synthetic_bend(41, 64, 2.4);
    const auto bed = synthetic_bathymetry(g);
    for (auto mode : {StageMode::fixed_stage, StageMode::backwater}) {
        OracleConfig cfg;
        cfg.mode = mode;
        for (double q : {85.0, 410.0, 840.0}) {
            const double zf = 29.5 + 5.5 * (q - 85.0) / 755.0;
            const auto s = solve_steady(g, bed, {q, zf}, cfg);
            for (std::size_t j = 0; j < g.n_along(); ++j)
                CHECK(std::abs(section_discharge(s, j, 2.4) - q) / q < 1e-6);
        }
    }
}

TEST_CASE("mass conservation over random beds and boundary conditions")
{
    const auto g = RiverGrid::synthetic_bend(41, 64, 2.4);
    const auto prior = geostat::apply_cross_river_weighting(
        geostat::build_separable_factors({}, g.shape(), {40, 20, 100}), geostat::WeightProfile::sine_power(41));
    const geostat::LowRankGaussian bed_dist(synthetic_bathymetry(g), prior.factor());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uq(85.0, 840.0), dz(-0.3, 0.3);
    for (std::uint64_t t = 0; t < 100; ++t) {
        const auto bed = geostat::sample_field(bed_dist, t);
        const double q = uq(rng);
        const double zf = -6.666e-6 * q * q + 0.013451 * q + 28.4048 + dz(rng);
        const auto s = solve_steady(g, bed, {q, zf});
        for (std::size_t j = 0; j < g.n_along(); ++j) REQUIRE(std::abs(section_discharge(s, j, 2.4) - q) / q < 1e-3);
    }
}

TEST_CASE("backwater step matches an independent rectangular-channel solve")
{
    // Flat bed, rectangular section: A = W h, K = W h^(5/3) / n.
    const double dy = 2.0, n_manning = 0.03, q = 50.0, g_acc = 9.81;
    const auto g = straight(7, 6, dy);
    const auto bed = ScalarField::constant(g.shape(), 0.0);
    const auto s = solve_steady(g, bed, {q, 2.0});
    const double w = 7 * dy;
    auto head = [&](double h, double sign) {
        const double v = q / (w * h);
        const double sf = q * q * n_manning * n_manning / (w * w * std::pow(h, 10.0 / 3.0));
        return h + v * v / (2 * g_acc) + sign * 0.5 * dy * sf;
    };
    double h_down = 2.0;
    for (std::size_t jj = 5; jj-- > 0;) {
        const double target = head(h_down, +1.0);
        double h = h_down;
        for (int it = 0; it < 100; ++it) { // Newton on the subcritical branch
            const double eps = 1e-7;
            const double f = head(h, -1.0) - target;
            const double df = (head(h + eps, -1.0) - head(h - eps, -1.0)) / (2 * eps);
            h -= f / df;
        }
        CHECK(std::abs(s.surface[jj] - h) < 1e-6);
        h_down = h;
    }
    CHECK(s.surface[0] > s.surface[5]);
}

TEST_CASE("normal depth on a sloping channel is preserved")
{
    // Manning normal depth: Q = W h^(5/3) sqrt(S0) / n with a bed falling S0 per metre.
    const double dy = 2.0, slope = 5e-4, n_manning = 0.03, h_n = 3.0;
    const auto g = straight(11, 30, dy);
    const double w = 11 * dy;
    const double q = w * std::pow(h_n, 5.0 / 3.0) * std::sqrt(slope) / n_manning;
    std::vector<double> z(g.node_count());
    for (std::size_t j = 0; j < 30; ++j)
        for (std::size_t i = 0; i < 11; ++i) z[g.shape().index(i, j)] = 20.0 - slope * dy * double(j);
    const ScalarField bed(g.shape(), z);
    const auto s = solve_steady(g, bed, {q, z.back() + h_n});
    for (std::size_t j = 0; j < 30; ++j) CHECK(std::abs(s.depth[g.shape().index(5, j)] - h_n) < 1e-5);
}

TEST_CASE("deepening one node lowers the section-mean speed and the other nodes' speeds")
{
    const auto g = RiverGrid::synthetic_bend(41, 16, 2.4);
    const auto bed = synthetic_bathymetry(g);
    OracleConfig cfg;
    cfg.mode = StageMode::fixed_stage;
    const BoundaryCondition bc{300.0, 31.8};
    const auto base = solve_steady(g, bed, bc, cfg);
    const std::size_t j = 8;
    std::size_t thalweg = 0;
    for (std::size_t i = 1; i < 41; ++i)
        if (bed.at(i, j) < bed.at(thalweg, j)) thalweg = i;
    std::vector<double> z(bed.values().begin(), bed.values().end());
    z[g.shape().index(thalweg, j)] -= 1.0;
    const auto deeper = solve_steady(g, ScalarField(g.shape(), z), bc, cfg);

    auto area = [&](const SteadyState& s) {
        double a = 0.0;
        for (std::size_t i = 0; i < 41; ++i) a += s.depth.at(i, j) * 2.4;
        return a;
    };
    CHECK(bc.discharge_q / area(deeper) < bc.discharge_q / area(base));
    const auto m0 = grid::velocity_magnitude(base.velocity);
    const auto m1 = grid::velocity_magnitude(deeper.velocity);
    for (std::size_t i = 0; i < 41; ++i)
        if (i != thalweg) CHECK(m1.at(i, j) <= m0.at(i, j));
    // Other sections are untouched at fixed stage.
    CHECK(m1.at(thalweg, j + 1) == m0.at(thalweg, j + 1));
}

TEST_CASE("dry sections and bad configs are rejected")
{
    const auto g = straight(5, 4, 1.0);
    CHECK_THROWS_AS(solve_steady(g, ScalarField::constant(g.shape(), 10.0), {10.0, 9.0}), SolveError);
    // Only two nodes below the surface.
    const auto notch = bed_from(g, [](std::size_t i, std::size_t) { return i < 2 ? 0.0 : 10.0; });
    OracleConfig fixed;
    fixed.mode = StageMode::fixed_stage;
    CHECK_THROWS_AS(solve_steady(g, notch, {10.0, 5.0}, fixed), SolveError);
    OracleConfig bad;
    bad.manning_n = 0.0;
    CHECK_THROWS_AS(solve_steady(g, ScalarField::constant(g.shape(), 0.0), {10.0, 3.0}, bad), InputError);
    CHECK_THROWS_AS(solve_steady(g, ScalarField::constant(g.shape(), 0.0), {-1.0, 3.0}), InputError);
    CHECK(parse_stage_mode("fixed_stage") == StageMode::fixed_stage);
    CHECK_THROWS_AS(parse_stage_mode("dynamic"), InputError);
}

TEST_CASE("dry nodes carry zero depth and velocity")
{
    const auto g = RiverGrid::synthetic_bend(41, 8, 2.4);
    const auto bed = synthetic_bathymetry(g);
    const auto s = solve_steady(g, bed, {85.0, 29.5});
    std::size_t dry = 0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        if (bed[n] >= s.surface[n / 41]) {
            ++dry;
            CHECK(s.depth[n] == 0.0);
            CHECK(s.velocity.easting()[n] == 0.0);
        } else {
            CHECK(s.depth[n] >= 0.05);
        }
    }
    CHECK(dry > 0);
}

TEST_CASE("solves are bit-identical on repeat")
{
    const auto g = RiverGrid::synthetic_bend(41, 32, 2.4);
    const auto bed = synthetic_bathymetry(g);
    const auto a = solve_steady(g, bed, {512.3, 33.1});
    const auto b = solve_steady(g, bed, {512.3, 33.1});
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        CHECK(a.velocity.easting()[n] == b.velocity.easting()[n]);
        CHECK(a.depth[n] == b.depth[n]);
    }
}

TEST_CASE("synthetic beds")
{
    const auto g = RiverGrid::synthetic_bend(41, 64, 2.4);
    const auto truth = synthetic_bathymetry(g);
    const auto guess = template_bathymetry(g);
    CHECK(truth.max() == doctest::Approx(34.0));
    CHECK(guess.min() == doctest::Approx(24.0));
    CHECK(guess.at(20, 10) == doctest::Approx(24.0));
    // The bend pushes the thalweg off the centerline.
    std::size_t thalweg = 0;
    for (std::size_t i = 1; i < 41; ++i)
        if (truth.at(i, 32) < truth.at(thalweg, 32)) thalweg = i;
    CHECK(thalweg < 18);
}

TEST_CASE("observations")
{
    const auto g = RiverGrid::synthetic_bend(41, 64, 2.4);
    const auto s = solve_steady(g, synthetic_bathymetry(g), {400.0, 32.2});

    const auto exact = make_observations(s.velocity, 408, 0.0, 3);
    REQUIRE(exact.size() == 408);
    std::vector<bool> seen(g.node_count(), false);
    for (std::size_t t = 0; t < exact.size(); ++t) {
        const auto n = exact.locations[t];
        CHECK_FALSE(seen[n]);
        seen[n] = true;
        CHECK(exact.easting[t] == s.velocity.easting()[n]);
        CHECK(exact.northing[t] == s.velocity.northing()[n]);
    }
    CHECK(exact.noise_sigma == 0.0);

    const auto noisy = make_observations(s.velocity, 408, 0.10, 3);
    CHECK(noisy.locations == exact.locations);
    CHECK(noisy.noise_sigma == doctest::Approx(0.10 * grid::velocity_magnitude(s.velocity).max()));
    CHECK_THROWS_AS(make_observations(s.velocity, g.node_count() + 1, 0.1, 3), InputError);

    const auto path = fs::temp_directory_path() / "riverflow_obs.csv";
    noisy.save(path);
    const auto back = ObservationSet::load(path);
    CHECK(back.locations == noisy.locations);
    CHECK(back.easting == noisy.easting);
    CHECK(back.northing == noisy.northing);
    CHECK(back.noise_sigma == noisy.noise_sigma);
    CHECK(back.shape == noisy.shape);
}

TEST_CASE("observation noise has the requested standard deviation")
{
    const grid::GridShape shape{100, 1000, 1.0};
    std::vector<double> e(shape.node_count(), 0.6), n(shape.node_count(), 0.8);
    const grid::VectorField v(shape, e, n); // |v| = 1 everywhere
    const auto obs = make_observations(v, shape.node_count(), 0.10, 11);
    double ss = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) {
        ss += (obs.easting[t] - 0.6) * (obs.easting[t] - 0.6);
        ss += (obs.northing[t] - 0.8) * (obs.northing[t] - 0.8);
    }
    const double sd = std::sqrt(ss / (2.0 * double(obs.size())));
    CHECK(std::abs(sd - 0.1) / 0.1 < 0.01);
}

TEST_CASE("dataset unit case and reload")
{
    const auto g = RiverGrid::synthetic_bend(41, 16, 2.4);
    const auto dir = scratch("unit");
    scenario::StageDischargeCurve curve{-6.666e-6, 0.013451, 28.4048};
    DatasetConfig cfg;
    cfg.bcs_per_bathy = 1;
    cfg.validation_fraction = 0.0;
    const auto set = build_dataset(g, {synthetic_bathymetry(g)}, curve, cfg, {}, 42, dir);
    REQUIRE(set.samples().size() == 1);
    std::ifstream manifest(dir / "manifest.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(manifest, line)) ++lines;
    CHECK(lines == 1);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "fields")) files += e.is_regular_file();
    CHECK(files == 3);

    const auto back = SampleSet::load(dir);
    REQUIRE(back.samples().size() == 1);
    const auto& a = set.samples()[0];
    const auto& b = back.samples()[0];
    CHECK(b.bc.discharge_q == a.bc.discharge_q);
    CHECK(b.bc.stage_zf == a.bc.stage_zf);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        CHECK(b.velocity.easting()[n] == a.velocity.easting()[n]);
        CHECK(b.bathy[n] == a.bathy[n]);
        CHECK(b.depth[n] == a.depth[n]);
    }
    CHECK(back.manifest_digest() == set.manifest_digest());
    CHECK(a.bc.discharge_q >= 85.0);
    CHECK(a.bc.discharge_q <= 840.0);
}

TEST_CASE("dataset sizing, splits and determinism")
{
    const auto g = RiverGrid::synthetic_bend(5, 8, 2.4);
    // A 5-wide V channel that stays wet for every stage on the curve.
    const auto bed = bed_from(g, [](std::size_t i, std::size_t) { return 24.0 + 2.0 * std::abs(double(i) - 2.0); });
    std::vector<ScalarField> beds(450, bed);
    scenario::StageDischargeCurve curve{-6.666e-6, 0.013451, 28.4048};
    DatasetConfig cfg;
    cfg.test_bathys = 50;
    const auto a = build_dataset(g, beds, curve, cfg, {}, 7, scratch("seeded_a"));
    CHECK(a.samples().size() == 4500);
    CHECK(a.failures().empty());
    CHECK(a.split(oracle::Split::test).size() == 500);
    CHECK(a.split(oracle::Split::validation).size() == 400);
    CHECK(a.split(oracle::Split::train).size() == 3600);
    const auto b = build_dataset(g, beds, curve, cfg, {}, 7, scratch("seeded_b"));
    CHECK(a.manifest_digest() == b.manifest_digest());
    const auto c = build_dataset(g, beds, curve, cfg, {}, 8, scratch("seeded_c"));
    CHECK(a.manifest_digest() != c.manifest_digest());
}

TEST_CASE("failed solves are recorded, and all-failed is an error")
{
    const auto g = RiverGrid::synthetic_bend(5, 8, 2.4);
    const auto good = bed_from(g, [](std::size_t i, std::size_t) { return 24.0 + 2.0 * std::abs(double(i) - 2.0); });
    const auto high = ScalarField::constant(g.shape(), 50.0);
    scenario::StageDischargeCurve curve{-6.666e-6, 0.013451, 28.4048};
    DatasetConfig cfg;
    cfg.bcs_per_bathy = 3;
    const auto dir = scratch("fail");
    const auto set = build_dataset(g, {good, high}, curve, cfg, {}, 1, dir);
    CHECK(set.samples().size() == 3);
    CHECK(set.failures().size() == 3);
    for (const auto& f : set.failures()) CHECK(f.bathy_index == 1);
    CHECK(SampleSet::load(dir).failures().size() == 3);
    CHECK_THROWS_AS(build_dataset(g, {high}, curve, cfg, {}, 1, scratch("allfail")), SolveError);
}

TEST_CASE("tampered field file fails digest check")
{
    const auto g = RiverGrid::synthetic_bend(5, 8, 2.4);
    const auto bed = bed_from(g, [](std::size_t i, std::size_t) { return 24.0 + 2.0 * std::abs(double(i) - 2.0); });
    scenario::StageDischargeCurve curve{-6.666e-6, 0.013451, 28.4048};
    DatasetConfig cfg;
    cfg.bcs_per_bathy = 1;
    const auto dir = scratch("tamper");
    build_dataset(g, {bed}, curve, cfg, {}, 1, dir);
    grid::save_field(ScalarField::constant(g.shape(), 25.0, grid::FieldKind::bathymetry),
                     dir / "fields" / "bathy_00000.rfs", grid::PayloadType::f32);
    CHECK_THROWS_AS(SampleSet::load(dir), FormatError);
}
