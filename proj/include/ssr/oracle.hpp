#pragma once

// Reference solvers used by the verification suite and the tests.

#include "ssr/ot_core.hpp"

namespace ssr {

inline constexpr Index kOracleMaxDim = 6;

/// Solves the same max-cost entropic OT problem as sinkhorn_maxcost by damped Newton
/// on the convex dual in extended precision, to an L1 marginal residual of 1e-12.
/// Throws std::invalid_argument if either dimension exceeds kOracleMaxDim.
TransportPlan oracle_entropic_ot(const CostMatrix& cost, double xi);

}  // namespace ssr
