#include "doctest.h"

#include "riverflow/common/error.hpp"
#include "riverflow/grid/field.hpp"
#include "riverflow/grid/field_io.hpp"
#include "riverflow/grid/grid.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

using namespace riverflow;
using namespace riverflow::grid;

namespace {

std::filesystem::path temp_path(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "riverflow_test_grid";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ScalarField random_field(const GridShape& shape, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 3.0);
    std::vector<double> v(shape.node_count());
    for (auto& x : v) x = n(rng);
    return ScalarField(shape, v);
}

} // namespace

TEST_CASE("full-scale grid has 20541 nodes and unit across axes")
{
    const auto grid = RiverGrid::synthetic_bend(41, 501, 2.4);
    CHECK(grid.node_count() == 20541);
    for (std::size_t j = 0; j < grid.n_along(); ++j) {
        CHECK(std::abs(std::hypot(grid.across_axis()[j].x, grid.across_axis()[j].y) - 1.0) < 1e-12);
        if (j > 0) CHECK(grid.arc_length()[j] > grid.arc_length()[j - 1]);
    }
    CHECK(grid.arc_length().back() == doctest::Approx(2.4 * 500).epsilon(1e-9));
}

TEST_CASE("centerline with repeated point is rejected")
{
    std::vector<Point2> pts{{0, 0}, {1, 0}, {1, 0}};
    CHECK_THROWS_AS(RiverGrid(5, pts, 1.0), InputError);
}

TEST_CASE("node index is across-fastest")
{
    GridShape s{3, 4, 1.0};
    CHECK(s.index(0, 0) == 0);
    CHECK(s.index(2, 0) == 2);
    CHECK(s.index(0, 1) == 3);
}

TEST_CASE("field_rmse examples")
{
    GridShape s{2, 1, 1.0};
    ScalarField zero(s, {0.0, 0.0});
    ScalarField other(s, {3.0, 4.0});
    CHECK(field_rmse(zero, zero) == 0.0);
    CHECK(field_rmse(zero, other) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));

    GridShape big{5, 7, 1.0};
    CHECK(field_rmse(ScalarField::constant(big, 2.0), ScalarField::constant(big, -1.5)) == doctest::Approx(3.5));
    CHECK_THROWS_AS(field_rmse(zero, ScalarField::constant(big, 0.0)), InputError);
}

TEST_CASE("field_rmse is symmetric and non-negative")
{
    GridShape s{6, 9, 1.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = random_field(s, seed);
        const auto b = random_field(s, seed + 100);
        CHECK(field_rmse(a, b) == field_rmse(b, a));
        CHECK(field_rmse(a, b) > 0.0);
        CHECK(field_rmse(a, a) == 0.0);
    }
}

TEST_CASE("velocity magnitude examples and rotation invariance")
{
    GridShape s{2, 2, 1.0};
    CHECK(velocity_magnitude(VectorField(s, {3, 3, 3, 3}, {4, 4, 4, 4})).values()[2] == 5.0);
    CHECK(velocity_magnitude(VectorField(s, {0, 0, 0, 0}, {0, 0, 0, 0})).max() == 0.0);
    CHECK(velocity_magnitude(VectorField(s, {-3, -3, -3, -3}, {4, 4, 4, 4})).min() == 5.0);

    GridShape g{7, 5, 1.0};
    const auto e = random_field(g, 1);
    const auto n = random_field(g, 2);
    const auto base = velocity_magnitude(VectorField(g, {e.values().begin(), e.values().end()},
                                                     {n.values().begin(), n.values().end()}));
    for (double angle : {0.3, 1.7, -2.4}) {
        std::vector<double> re(g.node_count()), rn(g.node_count());
        for (std::size_t k = 0; k < re.size(); ++k) {
            re[k] = std::cos(angle) * e[k] - std::sin(angle) * n[k];
            rn[k] = std::sin(angle) * e[k] + std::cos(angle) * n[k];
        }
        const auto rotated = velocity_magnitude(VectorField(g, re, rn));
        CHECK(field_rmse(rotated, base) < 1e-13);
    }
}

TEST_CASE("non-finite values are rejected at construction")
{
    GridShape s{2, 1, 1.0};
    CHECK_THROWS_AS(ScalarField(s, {1.0, std::numeric_limits<double>::quiet_NaN()}), InputError);
    CHECK_THROWS_AS(ScalarField(s, {1.0}), InputError);
}

TEST_CASE("field files round trip bit-exactly")
{
    GridShape s{41, 13, 2.4};
    const auto f = random_field(s, 7);
    const auto path = temp_path("roundtrip.rfs");
    save_field(f, path, PayloadType::f64);
    const auto back = load_scalar_field(path);
    CHECK(back.shape() == s);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(std::bit_cast<std::uint64_t>(back[k]) == std::bit_cast<std::uint64_t>(f[k]));

    // 32-bit payloads store the float-rounded value and reproduce it exactly.
    save_field(f, path, PayloadType::f32);
    const auto back32 = load_scalar_field(path);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(back32[k] == static_cast<double>(static_cast<float>(f[k])));
    save_field(back32, path, PayloadType::f32);
    const auto again = load_scalar_field(path);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(again[k] == back32[k]);

    VectorField v(s, {f.values().begin(), f.values().end()}, std::vector<double>(s.node_count(), 0.25));
    save_field(v, path);
    const auto vb = load_vector_field(path);
    CHECK(vb.northing()[5] == 0.25);
    CHECK(vb.easting()[17] == f[17]);
    CHECK_THROWS_AS(load_scalar_field(path), FormatError);
}

TEST_CASE("field load rejects short payloads, NaN values, and bad headers")
{
    GridShape s41{41, 3, 2.4};
    GridShape s40{40, 3, 2.4};
    const auto path = temp_path("short.rfs");
    // Header declares 41 across but only 40 rows of data follow.
    {
        save_field(ScalarField::constant(s40, 1.0), path);
        std::ifstream in(path, std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        const auto pos = text.find("n_across 40");
        text.replace(pos, 11, "n_across 41");
        std::ofstream(path, std::ios::binary) << text;
        CHECK_THROWS_AS(load_scalar_field(path), FormatError);
    }
    {
        save_field(ScalarField::constant(s41, 1.0), path);
        std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
        io.seekp(-8, std::ios::end);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        io.write(reinterpret_cast<const char*>(&nan), 8);
        io.close();
        CHECK_THROWS_AS(load_scalar_field(path), FormatError);
    }
    {
        std::ofstream(path, std::ios::binary) << "RFS2\nend\n";
        CHECK_THROWS_AS(load_scalar_field(path), FormatError);
    }
}

TEST_CASE("grid geometry file round trip")
{
    const auto grid = RiverGrid::synthetic_bend(9, 20, 2.4);
    const auto path = temp_path("grid.csv");
    grid.save(path);
    const auto back = RiverGrid::load(path);
    CHECK(back.shape() == grid.shape());
    for (std::size_t j = 0; j < grid.n_along(); ++j) {
        CHECK(back.centerline()[j].x == grid.centerline()[j].x);
        CHECK(back.tangents()[j].y == grid.tangents()[j].y);
    }
}
