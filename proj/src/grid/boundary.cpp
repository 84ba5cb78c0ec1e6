#include "riverflow/grid/boundary.hpp"

#include "riverflow/common/error.hpp"

#include <cmath>

namespace riverflow::grid {

void BoundaryCondition::validate() const
{
    require(std::isfinite(discharge_q) && std::isfinite(stage_zf), "boundary condition must be finite");
    require(discharge_q > 0.0, "boundary condition discharge must be positive");
}

} // namespace riverflow::grid
