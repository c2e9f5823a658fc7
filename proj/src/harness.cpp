#include "cascade_rl/harness.hpp"

#include "cascade_rl/error.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace cascade_rl {

std::string_view to_string(AgentKind kind) noexcept {
    switch (kind) {
    case AgentKind::shallow:
        return "shallow";
    case AgentKind::deep:
        return "deep";
    case AgentKind::random:
        return "random";
    case AgentKind::fixed:
        return "fixed";
    }
    return "unknown";
}

AgentKind agent_kind_from_string(std::string_view name) {
    if (name == "shallow")
        return AgentKind::shallow;
    if (name == "deep")
        return AgentKind::deep;
    if (name == "random")
        return AgentKind::random;
    if (name == "fixed")
        return AgentKind::fixed;
    throw ConfigError("agent_kind must be shallow, deep, random or fixed (got '" + std::string(name) + "')");
}

std::string_view to_string(AttackMode mode) noexcept {
    return mode == AttackMode::important ? "important" : "uniform";
}

AttackMode attack_mode_from_string(std::string_view name) {
    if (name == "uniform")
        return AttackMode::uniform;
    if (name == "important")
        return AttackMode::important;
    throw ConfigError("attack_mode must be uniform or important (got '" + std::string(name) + "')");
}

void RunConfig::validate() const {
    if (case_path.empty())
        throw ConfigError("case_path is required");
    if (episodes < 1)
        throw ConfigError("episodes must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw ConfigError("lr must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ConfigError("gamma must lie in [0, 1]");
    if (!(eps_start >= 0.0 && eps_start <= 1.0) || !(eps_end >= 0.0 && eps_end <= 1.0))
        throw ConfigError("eps_start and eps_end must lie in [0, 1]");
    if (stages < 1)
        throw ConfigError("stages must be at least 1");
    if (generation_cap < 1)
        throw ConfigError("generation_cap must be at least 1");
    if (ma_window < 1)
        throw ConfigError("ma_window must be at least 1");
    if (eval_workers < 1)
        throw ConfigError("eval_workers must be at least 1");
}

RunConfig parse_run_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");

    RunConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "case_path")
                c.case_path = v.get<std::string>();
            else if (key == "agent_kind")
                c.agent_kind = agent_kind_from_string(v.get<std::string>());
            else if (key == "episodes")
                c.episodes = v.get<std::size_t>();
            else if (key == "lr")
                c.lr = v.get<double>();
            else if (key == "gamma")
                c.gamma = v.get<double>();
            else if (key == "eps_start")
                c.eps_start = v.get<double>();
            else if (key == "eps_end")
                c.eps_end = v.get<double>();
            else if (key == "eps_decay_episodes")
                c.eps_decay_episodes = v.get<std::size_t>();
            else if (key == "stages")
                c.stages = v.get<std::size_t>();
            else if (key == "generation_cap")
                c.generation_cap = v.get<std::size_t>();
            else if (key == "seed")
                c.seed = v.get<std::uint64_t>();
            else if (key == "attack_mode")
                c.attack_mode = attack_mode_from_string(v.get<std::string>());
            else if (key == "output_dir")
                c.output_dir = v.get<std::string>();
            else if (key == "ma_window")
                c.ma_window = v.get<std::size_t>();
            else if (key == "eval_workers")
                c.eval_workers = v.get<std::size_t>();
            else if (key == "record_wall_ms")
                c.record_wall_ms = v.get<bool>();
            else
                throw ConfigError("unknown config key '" + key + "'");
            // get<size_t> silently wraps negative numbers.
            if (v.is_number_integer() && !v.is_number_unsigned())
                throw ConfigError("config key '" + key + "' must not be negative");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["case_path"] = c.case_path;
    j["agent_kind"] = std::string(to_string(c.agent_kind));
    j["episodes"] = c.episodes;
    j["lr"] = c.lr;
    j["gamma"] = c.gamma;
    j["eps_start"] = c.eps_start;
    j["eps_end"] = c.eps_end;
    j["eps_decay_episodes"] = c.decay_episodes();
    j["stages"] = c.stages;
    j["generation_cap"] = c.generation_cap;
    j["seed"] = c.seed;
    j["attack_mode"] = std::string(to_string(c.attack_mode));
    j["output_dir"] = c.output_dir;
    j["ma_window"] = c.ma_window;
    j["eval_workers"] = c.eval_workers;
    j["record_wall_ms"] = c.record_wall_ms;
    return j.dump(2) + "\n";
}

double epsilon_at(const RunConfig& config, std::size_t episode) {
    const std::size_t horizon = config.decay_episodes();
    if (horizon == 0 || episode >= horizon)
        return config.eps_end;
    const double frac = static_cast<double>(episode) / static_cast<double>(horizon);
    return config.eps_start + (config.eps_end - config.eps_start) * frac;
}

void RunMetrics::aggregate() {
    winning_rate = tail_winning_rate(rows.size());
    avg_reward = tail_avg_reward(rows.size());
}

double RunMetrics::tail_winning_rate(std::size_t n) const {
    n = std::min(n, rows.size());
    if (n == 0)
        return 0.0;
    std::size_t wins = 0;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i)
        wins += rows[i].won ? 1 : 0;
    return static_cast<double>(wins) / static_cast<double>(n);
}

double RunMetrics::tail_avg_reward(std::size_t n) const {
    n = std::min(n, rows.size());
    if (n == 0)
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i)
        sum += rows[i].total_reward;
    return sum / static_cast<double>(n);
}

Environment make_environment(const RunConfig& config) {
    CascadeOptions options;
    options.stages = config.stages;
    options.generation_cap = config.generation_cap;
    options.attack_mode = config.attack_mode;
    return Environment(load_case_file(config.case_path), options);
}

namespace {

using Clock = std::chrono::steady_clock;

EpisodeRow make_row(std::size_t episode, const EpisodeResult& r, double eps, Clock::time_point start,
                    bool record_wall) {
    EpisodeRow row;
    row.episode = episode;
    row.won = r.won;
    for (const StageOutcome& s : r.stages)
        row.stages_completed += s.terminal == Terminal::equilibrium ? 1 : 0;
    row.total_reward = r.total_reward;
    row.epsilon = eps;
    if (record_wall)
        row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return row;
}

[[noreturn]] void rethrow_with_episode(std::size_t episode, const NumericalError& e) {
    throw NumericalError("episode " + std::to_string(episode) + ": " + e.what());
}

void check_net(const ValueNet& net, AgentKind kind, std::size_t dim) {
    const NetKind want = kind == AgentKind::shallow ? NetKind::shallow : NetKind::deep;
    if (net.kind() != want)
        throw ConfigError("checkpoint holds a " + std::string(to_string(net.kind())) + " network but agent_kind is " +
                          std::string(to_string(kind)));
    if (net.input_dim() != dim)
        throw ConfigError("checkpoint expects " + std::to_string(net.input_dim()) + " state entries, case produces " +
                          std::to_string(dim));
    if (net.n_actions() != ActionSet::size())
        throw ConfigError("checkpoint has the wrong number of actions");
}

// Plays episodes [0, n) with a per-episode policy factory, spread over
// `workers` threads; rows come back in episode order.
template <class PolicyFactory>
std::vector<EpisodeRow> play_parallel(const Environment& env, const RunConfig& config, std::size_t workers,
                                      PolicyFactory&& factory) {
    const std::size_t n = config.episodes;
    std::vector<EpisodeRow> rows(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                const auto start = Clock::now();
                Rng attack_rng(config.seed, Stream::attack, i);
                EpisodeHooks hooks;
                hooks.policy = factory(i);
                const EpisodeResult r = env.run_episode(hooks, attack_rng);
                rows[i] = make_row(i, r, 0.0, start, config.record_wall_ms);
            } catch (const NumericalError& e) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::make_exception_ptr(NumericalError("episode " + std::to_string(i) + ": " + e.what()));
                next = n;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next = n;
            }
        }
    };

    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);
    return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out)
        throw IoError("failed writing '" + path.string() + "'");
}

void prepare_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

} // namespace

TrainResult train(const RunConfig& config, bool write_outputs) {
    config.validate();
    const Environment env = make_environment(config);
    const std::size_t dim = env.state_dim();

    TrainResult result;
    std::optional<ValueNet> net;
    if (config.agent_kind == AgentKind::shallow || config.agent_kind == AgentKind::deep) {
        Rng init(config.seed, Stream::init);
        net = config.agent_kind == AgentKind::shallow ? ValueNet::shallow(dim, init) : ValueNet::deep(dim, init);
    }
    const TdParams td{config.lr, config.gamma, 1e-3};
    if (write_outputs)
        prepare_dir(config.output_dir);

    result.metrics.rows.reserve(config.episodes);
    for (std::size_t i = 0; i < config.episodes; ++i) {
        const auto start = Clock::now();
        const double eps = epsilon_at(config, i);
        Rng attack_rng(config.seed, Stream::attack, i);
        Rng explore(config.seed, Stream::explore, i);
        std::optional<Transition> pending; // SARSA waits for the next action

        EpisodeHooks hooks;
        switch (config.agent_kind) {
        case AgentKind::random:
            hooks.policy = [&](const StateVector&, std::size_t) {
                return static_cast<std::size_t>(explore.index(ActionSet::size()));
            };
            break;
        case AgentKind::fixed:
            hooks.policy = [](const StateVector&, std::size_t) { return ActionSet::identity_index(); };
            break;
        case AgentKind::shallow:
            hooks.policy = [&](const StateVector& s, std::size_t) {
                const std::size_t a = epsilon_greedy(net->q_values(s), eps, explore);
                if (pending) {
                    pending->next_action_index = a;
                    sarsa_update(*net, *pending, td);
                    pending.reset();
                }
                return a;
            };
            hooks.on_transition = [&](const Transition& t) {
                if (t.done)
                    sarsa_update(*net, t, td);
                else
                    pending = t;
            };
            break;
        case AgentKind::deep:
            hooks.policy = [&](const StateVector& s, std::size_t) {
                return epsilon_greedy(net->q_values(s), eps, explore);
            };
            hooks.on_transition = [&](const Transition& t) { q_update(*net, t, td); };
            break;
        }

        try {
            const EpisodeResult r = env.run_episode(hooks, attack_rng);
            const bool learner = config.agent_kind == AgentKind::shallow || config.agent_kind == AgentKind::deep;
            result.metrics.rows.push_back(make_row(i, r, learner ? eps : 0.0, start, config.record_wall_ms));
        } catch (const NumericalError& e) {
            rethrow_with_episode(i, e);
        }
    }
    result.metrics.aggregate();
    result.net = std::move(net);

    if (write_outputs) {
        emit_reports(result.metrics, config, config.output_dir);
        if (result.net) {
            result.checkpoint_path = (std::filesystem::path(config.output_dir) / "weights.json").string();
            save_checkpoint(*result.net, result.checkpoint_path);
        }
    }
    return result;
}

RunMetrics random_baseline(const RunConfig& config) {
    config.validate();
    const Environment env = make_environment(config);
    RunMetrics m;
    m.rows = play_parallel(env, config, config.eval_workers, [&](std::size_t i) {
        auto rng = std::make_shared<Rng>(config.seed, Stream::baseline, i);
        return [rng](const StateVector&, std::size_t) { return static_cast<std::size_t>(rng->index(ActionSet::size())); };
    });
    m.aggregate();
    return m;
}

EvalResult evaluate(const RunConfig& config, const ValueNet* net, bool write_outputs) {
    config.validate();
    const Environment env = make_environment(config);
    const bool learner = config.agent_kind == AgentKind::shallow || config.agent_kind == AgentKind::deep;
    if (learner) {
        if (!net)
            throw ConfigError("evaluating a " + std::string(to_string(config.agent_kind)) + " agent needs a checkpoint");
        check_net(*net, config.agent_kind, env.state_dim());
    }

    using Policy = std::function<std::size_t(const StateVector&, std::size_t)>;
    EvalResult out;
    out.metrics.rows = play_parallel(env, config, config.eval_workers, [&](std::size_t i) -> Policy {
        switch (config.agent_kind) {
        case AgentKind::shallow:
        case AgentKind::deep:
            return [net](const StateVector& s, std::size_t) { return argmax(net->q_values(s)); };
        case AgentKind::fixed:
            return [](const StateVector&, std::size_t) { return ActionSet::identity_index(); };
        case AgentKind::random:
            break;
        }
        auto rng = std::make_shared<Rng>(config.seed, Stream::explore, i);
        return [rng](const StateVector&, std::size_t) { return static_cast<std::size_t>(rng->index(ActionSet::size())); };
    });
    out.metrics.aggregate();

    out.baseline.rows = play_parallel(env, config, config.eval_workers, [&](std::size_t i) -> Policy {
        auto rng = std::make_shared<Rng>(config.seed, Stream::baseline, i);
        return [rng](const StateVector&, std::size_t) { return static_cast<std::size_t>(rng->index(ActionSet::size())); };
    });
    out.baseline.aggregate();

    if (write_outputs) {
        prepare_dir(config.output_dir);
        emit_reports(out.metrics, config, config.output_dir, &out.baseline);
    }
    return out;
}

std::vector<double> moving_average(const std::vector<double>& series, std::size_t window) {
    if (window < 1)
        throw ConfigError("moving-average window must be at least 1");
    if (series.empty())
        throw ConfigError("moving average of an empty series");
    // Direct window sums: no drift from a running total.
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t k = first; k <= i; ++k)
            sum += series[k];
        out[i] = sum / static_cast<double>(i + 1 - first);
    }
    return out;
}

void emit_reports(const RunMetrics& metrics, const RunConfig& config, const std::string& dir,
                  const RunMetrics* baseline) {
    if (metrics.rows.empty())
        throw ConfigError("no episodes to report");
    prepare_dir(dir);
    const std::filesystem::path base(dir);
    write_text(base / "episodes.csv", episodes_csv(metrics));
    write_text(base / "summary.json", summary_json(metrics, config, baseline));
    write_text(base / "reward_ma.svg", reward_svg(metrics, config.ma_window));
}

} // namespace cascade_rl
