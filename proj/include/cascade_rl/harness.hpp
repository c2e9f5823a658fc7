#pragma once

#include "cascade_rl/agent.hpp"
#include "cascade_rl/cascade.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cascade_rl {

enum class AgentKind { shallow, deep, random, fixed };

std::string_view to_string(AgentKind kind) noexcept;
AgentKind agent_kind_from_string(std::string_view name);
std::string_view to_string(AttackMode mode) noexcept;
AttackMode attack_mode_from_string(std::string_view name);

struct RunConfig {
    std::string case_path;
    AgentKind agent_kind = AgentKind::deep;
    std::size_t episodes = 10000;
    double lr = 1e-4;
    double gamma = 0.7;
    double eps_start = 1.0;
    double eps_end = 0.05;
    std::optional<std::size_t> eps_decay_episodes; // default: half of `episodes`
    std::size_t stages = 3;
    std::size_t generation_cap = 20;
    std::uint64_t seed = 1;
    AttackMode attack_mode = AttackMode::uniform;
    std::string output_dir = "run";
    std::size_t ma_window = 1000;
    std::size_t eval_workers = 1;
    bool record_wall_ms = true; // false writes 0 so episodes.csv is byte-reproducible

    void validate() const;
    std::size_t decay_episodes() const noexcept { return eps_decay_episodes.value_or(episodes / 2); }
};

/// Parses the JSON form of RunConfig (field names as in the struct).
/// Unknown keys and out-of-range values are ConfigErrors.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

/// Linear decay from eps_start to eps_end over decay_episodes(), then flat.
double epsilon_at(const RunConfig& config, std::size_t episode);

struct EpisodeRow {
    std::size_t episode = 0;
    bool won = false;
    std::size_t stages_completed = 0; // stages ending in equilibrium
    double total_reward = 0.0;
    double epsilon = 0.0;
    double wall_ms = 0.0;
};

struct RunMetrics {
    std::vector<EpisodeRow> rows;
    double winning_rate = 0.0;
    double avg_reward = 0.0;

    /// Recomputes the aggregates from `rows`.
    void aggregate();
    /// Aggregates over the trailing `n` rows (all rows when fewer).
    double tail_winning_rate(std::size_t n) const;
    double tail_avg_reward(std::size_t n) const;
};

struct TrainResult {
    RunMetrics metrics;
    std::optional<ValueNet> net; // learned weights for shallow/deep agents
    std::string checkpoint_path; // empty for baseline agents
};

/// Online training. SARSA for the shallow agent, Q-learning for the deep
/// agent; random/fixed agents just play. Writes reports and the checkpoint to
/// output_dir unless `write_outputs` is false.
TrainResult train(const RunConfig& config, bool write_outputs = true);

struct EvalResult {
    RunMetrics metrics;
    RunMetrics baseline; // uniform-random policy on the same attack seeds
};

/// Greedy play without learning, fanned out over eval_workers threads.
/// `net` is required for shallow/deep kinds and must match them.
EvalResult evaluate(const RunConfig& config, const ValueNet* net, bool write_outputs = true);

/// Plays `config.episodes` episodes with a uniform-random policy drawn from
/// the baseline stream.
RunMetrics random_baseline(const RunConfig& config);

/// Trailing-window mean; the first window-1 entries average the prefix.
std::vector<double> moving_average(const std::vector<double>& series, std::size_t window);

/// Writes episodes.csv, summary.json and reward_ma.svg into `dir`.
void emit_reports(const RunMetrics& metrics, const RunConfig& config, const std::string& dir,
                  const RunMetrics* baseline = nullptr);

std::string episodes_csv(const RunMetrics& metrics);
std::string summary_json(const RunMetrics& metrics, const RunConfig& config, const RunMetrics* baseline = nullptr);
std::string reward_svg(const RunMetrics& metrics, std::size_t window);

/// Loads the case, builds the environment and checks the state layout.
Environment make_environment(const RunConfig& config);

} // namespace cascade_rl
