#pragma once

#include <cstddef>
#include <vector>

namespace cascade_rl {

/// Observation fed to the agents: [branch loadings | V, theta, P, Q per bus].
struct StateVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    friend bool operator==(const StateVector&, const StateVector&) = default;
};

struct Transition {
    StateVector state;
    std::size_t action_index = 0;
    double reward = 0.0; // cost units, unscaled
    StateVector next_state;
    std::size_t next_action_index = 0; // filled in by on-policy learners
    bool done = false;

    friend bool operator==(const Transition&, const Transition&) = default;
};

} // namespace cascade_rl
