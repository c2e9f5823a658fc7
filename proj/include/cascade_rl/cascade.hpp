#pragma once

#include "cascade_rl/actions.hpp"
#include "cascade_rl/dcopf.hpp"
#include "cascade_rl/network.hpp"
#include "cascade_rl/power_flow.hpp"
#include "cascade_rl/rng.hpp"
#include "cascade_rl/transition.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cascade_rl {

enum class AttackMode { uniform, important };
enum class TripMode { all, worst_first };
enum class Terminal { equilibrium, collapse };

struct RewardRule {
    double collapse = -1000.0;
    double survival_bonus = 1000.0;
};

struct CascadeOptions {
    std::size_t stages = 3;
    std::size_t generation_cap = 20;
    AttackMode attack_mode = AttackMode::uniform;
    TripMode trip_mode = TripMode::all;
    double relay_threshold = 1.0; // loading above which a branch trips
    RewardRule reward;
    AcOptions ac;
};

/// One cascade generation: corrective DCOPF, ACPF check, relay trips.
struct GenerationOutcome {
    bool dcopf_feasible = false;
    bool acpf_converged = false;
    std::size_t overlimit_lines = 0; // meaningful only when acpf_converged
    std::vector<std::size_t> tripped; // branch record positions
};

struct StageOutcome {
    std::optional<std::size_t> attacked; // branch record hit at the start of the stage
    std::size_t action_index = 0;
    double alpha = 1.0;
    std::vector<GenerationOutcome> generations;
    Terminal terminal = Terminal::collapse;
    double stage_cost = 0.0;  // final DCOPF objective, equilibrium only
    double reward = 0.0;
    double island_shed = 0.0; // demand lost to de-energized islands during the stage
};

struct EpisodeResult {
    std::vector<StageOutcome> stages;
    bool won = false;
    double total_reward = 0.0;
    std::vector<Transition> transitions;
    double island_shed = 0.0;
};

struct AttackResult {
    Network net;
    std::size_t attacked = 0;
    double shed_demand = 0.0; // demand de-energized by the resulting islanding
};

/// Switches one in-service branch out of service (uniform draw, or the most
/// loaded one in `important` mode when `loading` is given) and de-energizes
/// everything no longer connected to the slack bus. Record positions are
/// preserved. Throws ConfigError when no branch is in service.
AttackResult apply_attack(const Network& net, Rng& rng, AttackMode mode = AttackMode::uniform,
                          const std::vector<double>* loading = nullptr);

struct GenerationStep {
    GenerationOutcome outcome;
    Network net;                         // after trips and islanding
    std::optional<PfSolution> solution;  // converged ACPF, indexed like `net`
    DispatchResult dispatch;             // indexed like `net`
    double island_shed = 0.0;
};

/// Runs one generation on a network whose dead records are switched out of
/// service (as produced by apply_attack).
GenerationStep run_generation(const Network& net, double alpha, const CascadeOptions& options = {},
                              PtdfCache* cache = nullptr);

struct StageStep {
    StageOutcome outcome;
    Network net;
    std::optional<PfSolution> solution; // last converged ACPF of the stage
    DispatchResult dispatch;            // dispatch behind `solution`
};

StageStep run_stage(const Network& net, double alpha, const CascadeOptions& options = {},
                    PtdfCache* cache = nullptr);

double compute_stage_reward(const StageOutcome& outcome, bool is_last_stage, const RewardRule& rule = {});

/// Fixed-layout observation: one loading entry per branch record, then
/// (V, theta, P, Q) per bus. De-energized positions are zero.
StateVector build_state(const PfSolution& solution, const Network& net);

std::size_t state_dim(const Network& net) noexcept;

/// Power flow over the slack island of `net`, with results scattered back to
/// the record positions of `net`.
PfSolution island_power_flow(const Network& net, const DispatchResult& dispatch, const AcOptions& options = {});

/// DCOPF over the slack island of `net`, scattered back to record positions.
DispatchResult island_dcopf(const Network& net, double alpha, PtdfCache* cache = nullptr);

struct EpisodeHooks {
    /// Chooses an action index for the observation at the start of a stage (1-based).
    std::function<std::size_t(const StateVector&, std::size_t stage)> policy;
    /// Called once per completed transition, in order. Non-terminal
    /// transitions are delivered after the next observation exists and before
    /// the policy is asked for the next action.
    std::function<void(const Transition&)> on_transition;
};

/// MSCF episode environment around an immutable base network.
class Environment {
public:
    /// Throws CaseError when the base-case DCOPF or ACPF fails.
    explicit Environment(Network base, CascadeOptions options = {});

    EpisodeResult run_episode(const EpisodeHooks& hooks, Rng& attack_rng) const;

    const Network& base() const noexcept { return base_; }
    const CascadeOptions& options() const noexcept { return options_; }
    const DispatchResult& base_dispatch() const noexcept { return base_dispatch_; }
    const PfSolution& base_solution() const noexcept { return base_solution_; }
    std::size_t state_dim() const noexcept;

private:
    Network base_;
    CascadeOptions options_;
    DispatchResult base_dispatch_;
    PfSolution base_solution_;
    mutable PtdfCache cache_;
};

/// Convenience wrapper building a one-off Environment.
EpisodeResult run_episode(const Network& net, const EpisodeHooks& hooks, const CascadeOptions& options, Rng& rng);

/// One JSON object per generation (stage, generation, alpha, dcopf_feasible,
/// acpf_converged, overlimit_lines, tripped, result), newline separated.
std::string episode_trace_jsonl(const EpisodeResult& result, std::size_t episode_index = 0);

} // namespace cascade_rl
