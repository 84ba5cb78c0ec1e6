#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace riverflow::grid {

struct Point2 {
    double x = 0.0; ///< easting [m]
    double y = 0.0; ///< northing [m]
};

/// Node layout of a structured river domain. Nodes are stored row-major with
/// the across-river index fastest: index = j_along * n_across + i_across.
struct GridShape {
    std::size_t n_across = 0;
    std::size_t n_along = 0;
    double spacing_m = 1.0;

    std::size_t node_count() const { return n_across * n_along; }
    std::size_t index(std::size_t i_across, std::size_t j_along) const { return j_along * n_across + i_across; }
    bool operator==(const GridShape&) const = default;
};

/// Structured across x along river grid laid out around a planar centerline.
class RiverGrid {
public:
    /// Builds the grid from a centerline with one point per cross section.
    /// Throws InputError when consecutive points coincide or n_across == 0.
    RiverGrid(std::size_t n_across, std::vector<Point2> centerline, double spacing_m);

    /// Curved channel with one smooth bend (90 degrees over the middle 80% of
    /// the reach), centerline points spaced exactly spacing_m apart.
    static RiverGrid synthetic_bend(std::size_t n_across, std::size_t n_along, double spacing_m);

    static RiverGrid load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const GridShape& shape() const { return shape_; }
    std::size_t n_across() const { return shape_.n_across; }
    std::size_t n_along() const { return shape_.n_along; }
    double spacing_m() const { return shape_.spacing_m; }
    std::size_t node_count() const { return shape_.node_count(); }

    std::span<const Point2> centerline() const { return centerline_; }
    /// Unit tangent of the centerline at each cross section (downstream direction).
    std::span<const Point2> tangents() const { return tangents_; }
    /// Unit vector pointing from the right bank toward the left bank.
    std::span<const Point2> across_axis() const { return across_; }
    /// Cumulative centerline arc length from the inlet [m].
    std::span<const double> arc_length() const { return arc_length_; }

    Point2 node_position(std::size_t i_across, std::size_t j_along) const;

private:
    GridShape shape_;
    std::vector<Point2> centerline_;
    std::vector<Point2> tangents_;
    std::vector<Point2> across_;
    std::vector<double> arc_length_;
};

} // namespace riverflow::grid
