#include "cascade_rl/network.hpp"

#include "cascade_rl/error.hpp"

#include <algorithm>
#include <cmath>

namespace cascade_rl {

std::string_view to_string(BusKind kind) noexcept {
    switch (kind) {
    case BusKind::slack:
        return "slack";
    case BusKind::pv:
        return "pv";
    case BusKind::pq:
        return "pq";
    }
    return "pq";
}

std::size_t Network::n_branch() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(branches.begin(), branches.end(), [](const Branch& b) { return b.in_service; }));
}

std::size_t Network::n_gen() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(generators.begin(), generators.end(), [](const Generator& g) { return g.in_service; }));
}

std::size_t Network::n_load() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(loads.begin(), loads.end(), [](const Load& l) { return l.in_service; }));
}

std::size_t Network::bus_pos(int id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw CaseError("reference to unknown bus " + std::to_string(id));
    return it->second;
}

std::size_t Network::slack_pos() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].kind == BusKind::slack)
            return i;
    throw CaseError("network has no slack bus");
}

void Network::reindex() {
    index_.clear();
    index_.reserve(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!index_.emplace(buses[i].id, i).second)
            throw CaseError("duplicate bus id " + std::to_string(buses[i].id));
    }
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok)
        throw CaseError(what);
}

bool finite(double v) { return std::isfinite(v); }

} // namespace

void validate_network(Network& net) {
    require(finite(net.base_mva) && net.base_mva > 0.0, "base_mva must be positive");
    require(!net.buses.empty(), "network has no buses");
    net.reindex();

    std::size_t slack_count = 0;
    for (const Bus& b : net.buses) {
        if (b.kind == BusKind::slack)
            ++slack_count;
        require(finite(b.v_set) && b.v_set > 0.0, "bus " + std::to_string(b.id) + ": v_set must be positive");
        require(finite(b.v_init) && finite(b.theta_init), "bus " + std::to_string(b.id) + ": non-finite initial state");
    }
    require(slack_count == 1, "network must have exactly one slack bus (found " + std::to_string(slack_count) + ")");

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        const std::string tag = "branch " + std::to_string(k);
        net.bus_pos(br.from_bus);
        net.bus_pos(br.to_bus);
        require(br.from_bus != br.to_bus, tag + ": both ends on bus " + std::to_string(br.from_bus));
        require(finite(br.r) && finite(br.x) && finite(br.b_charge), tag + ": non-finite impedance");
        require(br.x != 0.0, tag + ": zero reactance");
        require(finite(br.rate) && br.rate > 0.0, tag + ": rate must be positive");
    }

    double max_cost = 0.0;
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        const Generator& g = net.generators[k];
        const std::string tag = "generator " + std::to_string(k);
        net.bus_pos(g.bus);
        require(finite(g.p_min) && finite(g.p_max) && g.p_min <= g.p_max, tag + ": p_min > p_max");
        require(finite(g.q_min) && finite(g.q_max) && g.q_min <= g.q_max, tag + ": q_min > q_max");
        require(finite(g.cost) && g.cost >= 0.0, tag + ": negative cost");
        max_cost = std::max(max_cost, g.cost);
    }

    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const Load& l = net.loads[k];
        const std::string tag = "load " + std::to_string(k);
        net.bus_pos(l.bus);
        require(finite(l.p_demand) && l.p_demand > 0.0, tag + ": p_demand must be positive");
        require(finite(l.q_demand), tag + ": non-finite q_demand");
        require(finite(l.shed_cost) && l.shed_cost > max_cost, tag + ": shed_cost must exceed every generator cost");
    }
}

std::vector<std::vector<std::size_t>> connected_components(const Network& net) {
    const std::size_t n = net.buses.size();
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (const Branch& br : net.branches) {
        if (!br.in_service)
            continue;
        const std::size_t f = net.bus_pos(br.from_bus);
        const std::size_t t = net.bus_pos(br.to_bus);
        adjacency[f].push_back(t);
        adjacency[t].push_back(f);
    }

    std::vector<std::vector<std::size_t>> components;
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack;
    for (std::size_t root = 0; root < n; ++root) {
        if (seen[root])
            continue;
        std::vector<std::size_t> members;
        seen[root] = true;
        stack.push_back(root);
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            members.push_back(u);
            for (std::size_t v : adjacency[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    stack.push_back(v);
                }
            }
        }
        std::sort(members.begin(), members.end());
        components.push_back(std::move(members));
    }
    return components;
}

namespace {

std::vector<bool> slack_island_mask(const Network& net) {
    const std::size_t slack = net.slack_pos();
    std::vector<bool> mask(net.buses.size(), false);
    for (const auto& comp : connected_components(net)) {
        if (std::binary_search(comp.begin(), comp.end(), slack)) {
            for (std::size_t b : comp)
                mask[b] = true;
            break;
        }
    }
    return mask;
}

} // namespace

SlackIsland retain_slack_island(const Network& net) {
    const std::vector<bool> mask = slack_island_mask(net);

    SlackIsland out;
    out.net.base_mva = net.base_mva;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
        if (mask[i]) {
            out.net.buses.push_back(net.buses[i]);
            out.bus_origin.push_back(i);
        }
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        if (mask[net.bus_pos(br.from_bus)] && mask[net.bus_pos(br.to_bus)]) {
            out.net.branches.push_back(br);
            out.branch_origin.push_back(k);
        }
    }
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        if (mask[net.bus_pos(net.generators[k].bus)]) {
            out.net.generators.push_back(net.generators[k]);
            out.gen_origin.push_back(k);
        }
    }
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const Load& l = net.loads[k];
        if (mask[net.bus_pos(l.bus)]) {
            out.net.loads.push_back(l);
            out.load_origin.push_back(k);
        } else if (l.in_service) {
            out.shed_demand += l.p_demand;
        }
    }
    out.net.reindex();
    return out;
}

double deenergize_outside_slack_island(Network& net, std::vector<bool>* energized) {
    std::vector<bool> mask = slack_island_mask(net);
    double shed = 0.0;
    for (Branch& br : net.branches) {
        if (!mask[net.bus_pos(br.from_bus)] || !mask[net.bus_pos(br.to_bus)])
            br.in_service = false;
    }
    for (Generator& g : net.generators) {
        if (!mask[net.bus_pos(g.bus)])
            g.in_service = false;
    }
    for (Load& l : net.loads) {
        if (!mask[net.bus_pos(l.bus)] && l.in_service) {
            shed += l.p_demand;
            l.in_service = false;
        }
    }
    if (energized)
        *energized = std::move(mask);
    return shed;
}

} // namespace cascade_rl
