#pragma once

#include "cascade_rl/actions.hpp"
#include "cascade_rl/rng.hpp"
#include "cascade_rl/transition.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cascade_rl {

/// Zero-padded square view of a state, row-major.
struct SquareImage {
    std::size_t side = 0;
    std::vector<double> pixels;
};

/// Smallest side with side*side >= dim; zeros appended.
SquareImage pad_to_square(const StateVector& state);
SquareImage pad_to_square(const StateVector& state, std::size_t min_side);

enum class NetKind {
    shallow, // [state, alpha] -> 10 rectifier units -> scalar Q(s, a)
    deep,    // padded image -> conv/pool x2 -> dense 10 (per-action Q)
    linear,  // state -> dense n_actions (per-action Q); tabular / analytic tests
};

std::string_view to_string(NetKind kind) noexcept;
NetKind net_kind_from_string(std::string_view name);

/// Named slice of the flat parameter vector, row-major.
struct ParamBlock {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size() const noexcept;
};

/// Value-function approximator shared by both learners.
///
/// Parameters live in one flat vector so that updates, gradients and
/// checkpoints all see the same layout (`blocks()`).
class ValueNet {
public:
    static constexpr std::size_t kShallowHidden = 10;
    static constexpr std::size_t kConv1Channels = 8;
    static constexpr std::size_t kConv2Channels = 16;
    static constexpr std::size_t kKernel = 3;
    // Two valid 3x3 convolutions and two 2x2 pools need at least this side.
    static constexpr std::size_t kMinDeepSide = 10;

    static ValueNet shallow(std::size_t state_dim, Rng& init);
    static ValueNet deep(std::size_t state_dim, Rng& init);
    static ValueNet linear(std::size_t state_dim, std::size_t n_actions);

    /// Rebuilds a network skeleton (all-zero weights) for a checkpoint.
    static ValueNet skeleton(NetKind kind, std::size_t state_dim, std::size_t n_actions);

    NetKind kind() const noexcept { return kind_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t padded_side() const noexcept { return side_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }
    const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }

    /// Q-values for every action in ActionSet order.
    std::vector<double> q_values(const StateVector& state) const;
    double q_value(const StateVector& state, std::size_t action) const;

    /// Deep nets: fixed sum readout over the per-action head (bookkeeping only).
    double readout(const StateVector& state) const;

    /// td_error * dQ(state, action)/dparams, same layout as params().
    std::vector<double> gradient(const StateVector& state, std::size_t action, double td_error) const;

    friend bool operator==(const ValueNet& a, const ValueNet& b) {
        return a.kind_ == b.kind_ && a.input_dim_ == b.input_dim_ && a.side_ == b.side_ &&
               a.n_actions_ == b.n_actions_ && a.params_ == b.params_;
    }

private:
    ValueNet(NetKind kind, std::size_t input_dim, std::size_t n_actions);
    std::size_t add_block(std::string name, std::vector<std::size_t> shape);
    void init_uniform(Rng& rng);
    void check_state(const StateVector& state) const;

    struct DeepCache;
    void deep_forward(const StateVector& state, DeepCache& cache) const;

    NetKind kind_;
    std::size_t input_dim_ = 0;
    std::size_t side_ = 0;
    std::size_t n_actions_ = 0;
    std::size_t conv1_out_ = 0, pool1_out_ = 0, conv2_out_ = 0, pool2_out_ = 0;
    std::vector<double> params_;
    std::vector<ParamBlock> blocks_;
};

/// forward / backward in the vocabulary of the learning rules.
inline std::vector<double> forward(const ValueNet& net, const StateVector& state) { return net.q_values(state); }
inline std::vector<double> backward(const ValueNet& net, const StateVector& state, std::size_t action,
                                    double td_error) {
    return net.gradient(state, action, td_error);
}

/// With probability 1 - eps the lowest-index argmax, otherwise uniform.
std::size_t epsilon_greedy(std::span<const double> q, double eps, Rng& rng);
std::size_t argmax(std::span<const double> q);

struct TdParams {
    double lr = 1e-4;
    double gamma = 0.7;
    double reward_scale = 1e-3; // rewards enter targets as reward * reward_scale
};

/// Semi-gradient SARSA step using t.next_action_index; returns the TD error.
double sarsa_update(ValueNet& net, const Transition& t, const TdParams& params);

/// Semi-gradient Q-learning step (max over next actions); returns the TD error.
double q_update(ValueNet& net, const Transition& t, const TdParams& params);

void save_checkpoint(const ValueNet& net, const std::string& path);
ValueNet load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const ValueNet& net);
ValueNet checkpoint_from_string(const std::string& text);

} // namespace cascade_rl
