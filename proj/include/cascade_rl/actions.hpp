#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace cascade_rl {

/// Candidate flow-limit scaling factors, strictly increasing.
class ActionSet {
public:
    static constexpr std::size_t size() noexcept { return kAlphas.size(); }
    static constexpr std::span<const double> alphas() noexcept { return kAlphas; }

    /// Throws ConfigError for an index outside [0, size()).
    static double alpha(std::size_t index);

    /// Index of the identity scaling (alpha = 1.0).
    static constexpr std::size_t identity_index() noexcept { return 4; }

private:
    static constexpr std::array<double, 10> kAlphas{0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25};
};

inline double action_to_alpha(std::size_t index) { return ActionSet::alpha(index); }

} // namespace cascade_rl
