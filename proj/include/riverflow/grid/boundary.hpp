#pragma once

namespace riverflow::grid {

/// Steady forcing of a reach: inflow discharge and downstream free-surface elevation.
struct BoundaryCondition {
    double discharge_q = 0.0; ///< [m^3/s], positive
    double stage_zf = 0.0;    ///< [m]

    /// Throws InputError unless discharge_q > 0 and both values are finite.
    void validate() const;
};

} // namespace riverflow::grid
