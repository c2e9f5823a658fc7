#include "cascade_rl/cascade.hpp"

#include "cascade_rl/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <iostream>

namespace cascade_rl {

namespace {

std::vector<bool> energized_buses(const Network& net) {
    std::vector<bool> mask(net.buses.size(), false);
    const std::size_t slack = net.slack_pos();
    for (const auto& comp : connected_components(net)) {
        if (std::binary_search(comp.begin(), comp.end(), slack)) {
            for (std::size_t b : comp)
                mask[b] = true;
            break;
        }
    }
    return mask;
}

PfSolution scatter(const PfSolution& part, const SlackIsland& island, const Network& full) {
    PfSolution out;
    out.converged = part.converged;
    out.iterations = part.iterations;
    out.max_mismatch = part.max_mismatch;
    const std::size_t n = full.buses.size();
    out.v.assign(n, 0.0);
    out.theta.assign(n, 0.0);
    out.p_inj.assign(n, 0.0);
    out.q_inj.assign(n, 0.0);
    out.q_clamped.assign(n, false);
    for (std::size_t i = 0; i < island.bus_origin.size(); ++i) {
        const std::size_t o = island.bus_origin[i];
        out.v[o] = part.v[i];
        out.theta[o] = part.theta[i];
        out.p_inj[o] = part.p_inj[i];
        out.q_inj[o] = part.q_inj[i];
        out.q_clamped[o] = part.q_clamped[i];
    }
    out.flow_from.assign(full.branches.size(), 0.0);
    out.loading.assign(full.branches.size(), 0.0);
    for (std::size_t k = 0; k < island.branch_origin.size(); ++k) {
        out.flow_from[island.branch_origin[k]] = part.flow_from[k];
        out.loading[island.branch_origin[k]] = part.loading[k];
    }
    return out;
}

DispatchResult gather_dispatch(const DispatchResult& full, const SlackIsland& island) {
    DispatchResult out = full;
    out.p_gen.assign(island.gen_origin.size(), 0.0);
    out.p_load_served.assign(island.load_origin.size(), 0.0);
    for (std::size_t k = 0; k < island.gen_origin.size(); ++k)
        if (island.gen_origin[k] < full.p_gen.size())
            out.p_gen[k] = full.p_gen[island.gen_origin[k]];
    for (std::size_t k = 0; k < island.load_origin.size(); ++k)
        if (island.load_origin[k] < full.p_load_served.size())
            out.p_load_served[k] = full.p_load_served[island.load_origin[k]];
    return out;
}

DispatchResult scatter_dispatch(const DispatchResult& part, const SlackIsland& island, const Network& full) {
    DispatchResult out = part;
    out.p_gen.assign(full.generators.size(), 0.0);
    out.p_load_served.assign(full.loads.size(), 0.0);
    for (std::size_t k = 0; k < island.gen_origin.size(); ++k)
        out.p_gen[island.gen_origin[k]] = part.p_gen[k];
    for (std::size_t k = 0; k < island.load_origin.size(); ++k)
        out.p_load_served[island.load_origin[k]] = part.p_load_served[k];
    return out;
}

void warn_stage_cost(double cost, double scale) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
        std::cerr << "warning: stage cost " << cost << " reaches the collapse penalty magnitude " << scale
                  << "; equilibrium rewards may fall below the collapse reward\n";
}

} // namespace

std::size_t state_dim(const Network& net) noexcept { return net.branches.size() + 4 * net.buses.size(); }

AttackResult apply_attack(const Network& net, Rng& rng, AttackMode mode, const std::vector<double>* loading) {
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < net.branches.size(); ++k)
        if (net.branches[k].in_service)
            live.push_back(k);
    if (live.empty())
        throw ConfigError("cannot attack: no branch is in service");

    std::size_t target = live.front();
    if (mode == AttackMode::important && loading && loading->size() == net.branches.size()) {
        double best = -1.0;
        for (std::size_t k : live) {
            if ((*loading)[k] > best) {
                best = (*loading)[k];
                target = k;
            }
        }
    } else {
        target = live[rng.index(live.size())];
    }

    AttackResult out{net, target, 0.0};
    out.net.branches[target].in_service = false;
    out.shed_demand = deenergize_outside_slack_island(out.net);
    return out;
}

PfSolution island_power_flow(const Network& net, const DispatchResult& dispatch, const AcOptions& options) {
    const SlackIsland island = retain_slack_island(net);
    const PfSolution part = ac_power_flow(island.net, gather_dispatch(dispatch, island), options);
    return scatter(part, island, net);
}

DispatchResult island_dcopf(const Network& net, double alpha, PtdfCache* cache) {
    const SlackIsland island = retain_slack_island(net);
    return scatter_dispatch(run_dcopf(island.net, alpha, cache), island, net);
}

GenerationStep run_generation(const Network& net, double alpha, const CascadeOptions& options, PtdfCache* cache) {
    GenerationStep step;
    step.net = net;
    const SlackIsland island = retain_slack_island(net);

    const DispatchResult part_dispatch = run_dcopf(island.net, alpha, cache);
    step.dispatch = scatter_dispatch(part_dispatch, island, net);
    step.outcome.dcopf_feasible = part_dispatch.feasible;
    if (!part_dispatch.feasible)
        return step;

    const PfSolution part = ac_power_flow(island.net, part_dispatch, options.ac);
    step.outcome.acpf_converged = part.converged;
    if (!part.converged)
        return step;

    PfSolution full = scatter(part, island, net);
    std::vector<std::size_t> over;
    for (std::size_t k = 0; k < net.branches.size(); ++k)
        if (net.branches[k].in_service && full.loading[k] > options.relay_threshold)
            over.push_back(k);
    step.outcome.overlimit_lines = over.size();

    if (!over.empty()) {
        if (options.trip_mode == TripMode::worst_first) {
            const auto worst = std::max_element(over.begin(), over.end(), [&](std::size_t a, std::size_t b) {
                return full.loading[a] < full.loading[b];
            });
            step.outcome.tripped = {*worst};
        } else {
            step.outcome.tripped = over;
        }
        for (std::size_t k : step.outcome.tripped)
            step.net.branches[k].in_service = false;
        step.island_shed = deenergize_outside_slack_island(step.net);
    }
    step.solution = std::move(full);
    return step;
}

StageStep run_stage(const Network& net, double alpha, const CascadeOptions& options, PtdfCache* cache) {
    StageStep stage;
    stage.net = net;
    stage.outcome.alpha = alpha;
    stage.outcome.terminal = Terminal::collapse;

    for (std::size_t g = 0; g < options.generation_cap; ++g) {
        GenerationStep step = run_generation(stage.net, alpha, options, cache);
        stage.outcome.generations.push_back(step.outcome);
        stage.outcome.island_shed += step.island_shed;
        stage.net = std::move(step.net);
        if (step.solution) {
            stage.solution = std::move(step.solution);
            stage.dispatch = step.dispatch;
        }
        const GenerationOutcome& out = stage.outcome.generations.back();
        if (!out.dcopf_feasible || !out.acpf_converged)
            break;
        if (out.overlimit_lines == 0) {
            stage.outcome.terminal = Terminal::equilibrium;
            stage.outcome.stage_cost = step.dispatch.objective;
            break;
        }
    }
    return stage;
}

double compute_stage_reward(const StageOutcome& outcome, bool is_last_stage, const RewardRule& rule) {
    if (outcome.terminal == Terminal::collapse)
        return rule.collapse;
    if (outcome.stage_cost >= -rule.collapse)
        warn_stage_cost(outcome.stage_cost, -rule.collapse);
    return -outcome.stage_cost + (is_last_stage ? rule.survival_bonus : 0.0);
}

StateVector build_state(const PfSolution& solution, const Network& net) {
    const std::size_t nb = net.branches.size();
    const std::size_t n = net.buses.size();
    StateVector s;
    s.values.assign(state_dim(net), 0.0);
    for (std::size_t k = 0; k < nb && k < solution.loading.size(); ++k)
        if (net.branches[k].in_service)
            s.values[k] = solution.loading[k];
    const std::vector<bool> live = energized_buses(net);
    for (std::size_t i = 0; i < n && i < solution.v.size(); ++i) {
        if (!live[i])
            continue;
        double* slot = s.values.data() + nb + 4 * i;
        slot[0] = solution.v[i];
        slot[1] = solution.theta[i];
        slot[2] = solution.p_inj[i];
        slot[3] = solution.q_inj[i];
    }
    return s;
}

Environment::Environment(Network base, CascadeOptions options) : base_(std::move(base)), options_(options) {
    if (options_.stages == 0)
        throw ConfigError("stage count must be at least 1");
    if (options_.generation_cap == 0)
        throw ConfigError("generation cap must be at least 1");
    deenergize_outside_slack_island(base_);
    const SlackIsland island = retain_slack_island(base_);
    const DispatchResult part = run_dcopf(island.net, 1.0, &cache_);
    if (!part.feasible)
        throw CaseError("base-case DCOPF is infeasible");
    base_dispatch_ = scatter_dispatch(part, island, base_);
    base_solution_ = island_power_flow(base_, base_dispatch_, options_.ac);
    if (!base_solution_.converged)
        throw CaseError("base-case ACPF does not converge");
}

std::size_t Environment::state_dim() const noexcept { return cascade_rl::state_dim(base_); }

EpisodeResult Environment::run_episode(const EpisodeHooks& hooks, Rng& attack_rng) const {
    if (!hooks.policy)
        throw ConfigError("episode needs a policy");

    EpisodeResult result;
    Network net = base_;
    DispatchResult dispatch = base_dispatch_;
    PfSolution last = base_solution_;
    std::optional<Transition> pending;

    auto emit = [&](Transition t) {
        if (hooks.on_transition)
            hooks.on_transition(t);
        result.transitions.push_back(std::move(t));
    };

    for (std::size_t k = 1; k <= options_.stages; ++k) {
        std::optional<std::size_t> attacked;
        double attack_shed = 0.0;
        if (net.n_branch() > 0) {
            AttackResult attack = apply_attack(net, attack_rng, options_.attack_mode, &last.loading);
            attacked = attack.attacked;
            attack_shed = attack.shed_demand;
            net = std::move(attack.net);
        }

        // Post-attack observation under the standing dispatch.
        PfSolution observed = island_power_flow(net, dispatch, options_.ac);
        if (observed.converged)
            last = std::move(observed);
        const StateVector state = build_state(last, net);

        if (pending) {
            pending->next_state = state;
            emit(std::move(*pending));
            pending.reset();
        }

        const std::size_t action = hooks.policy(state, k);
        const double alpha = ActionSet::alpha(action);
        StageStep stage = run_stage(net, alpha, options_, &cache_);
        net = std::move(stage.net);
        if (stage.solution)
            last = std::move(*stage.solution);

        StageOutcome so = std::move(stage.outcome);
        so.attacked = attacked;
        so.island_shed += attack_shed;
        so.action_index = action;
        so.alpha = alpha;
        const bool last_stage = k == options_.stages;
        so.reward = compute_stage_reward(so, last_stage, options_.reward);
        result.total_reward += so.reward;
        result.island_shed += so.island_shed;

        const bool collapsed = so.terminal == Terminal::collapse;
        if (!collapsed)
            dispatch = stage.dispatch;

        Transition t;
        t.state = state;
        t.action_index = action;
        t.reward = so.reward;
        t.done = collapsed || last_stage;
        result.stages.push_back(std::move(so));
        if (t.done) {
            t.next_state = build_state(last, net);
            emit(std::move(t));
            break;
        }
        pending = std::move(t);
    }

    result.won = result.stages.size() == options_.stages && result.stages.back().terminal == Terminal::equilibrium;
    return result;
}

EpisodeResult run_episode(const Network& net, const EpisodeHooks& hooks, const CascadeOptions& options, Rng& rng) {
    const Environment env(net, options);
    return env.run_episode(hooks, rng);
}

std::string episode_trace_jsonl(const EpisodeResult& result, std::size_t episode_index) {
    std::string out;
    for (std::size_t s = 0; s < result.stages.size(); ++s) {
        const StageOutcome& stage = result.stages[s];
        for (std::size_t g = 0; g < stage.generations.size(); ++g) {
            const GenerationOutcome& gen = stage.generations[g];
            const bool final_gen = g + 1 == stage.generations.size();
            nlohmann::ordered_json line;
            line["episode"] = episode_index;
            line["stage"] = s + 1;
            line["generation"] = g + 1;
            line["attacked"] = stage.attacked ? nlohmann::ordered_json(*stage.attacked) : nlohmann::ordered_json();
            line["alpha"] = stage.alpha;
            line["dcopf_feasible"] = gen.dcopf_feasible;
            line["acpf_converged"] = gen.acpf_converged;
            line["overlimit_lines"] =
                gen.acpf_converged ? nlohmann::ordered_json(gen.overlimit_lines) : nlohmann::ordered_json();
            line["tripped"] = gen.tripped;
            if (!final_gen)
                line["result"] = "continue";
            else
                line["result"] = stage.terminal == Terminal::equilibrium ? "equilibrium" : "collapse";
            if (final_gen) {
                line["stage_reward"] = stage.reward;
                if (s + 1 == result.stages.size())
                    line["episode_result"] = result.won ? "win" : "lose";
            }
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

} // namespace cascade_rl
