#pragma once

#include <vector>

namespace cascade_rl {

/// Outcome of the corrective DC optimal power flow. Vectors are indexed by
/// generator / load record position; out-of-service records hold 0.
struct DispatchResult {
    bool feasible = false;
    std::vector<double> p_gen;         // p.u.
    std::vector<double> p_load_served; // p.u., consumption-positive
    double shed_total = 0.0;           // p.u.
    double objective = 0.0;            // generation cost + shedding penalty
    double alpha_used = 1.0;
};

} // namespace cascade_rl
