#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cascade_rl {

enum class BusKind { slack, pv, pq };

std::string_view to_string(BusKind kind) noexcept;

struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double v_set = 1.0;      // p.u., used by slack and PV buses
    double v_init = 1.0;     // p.u.
    double theta_init = 0.0; // rad

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charge = 0.0; // total line charging susceptance
    double rate = 0.0;     // thermal limit, p.u. on system base
    bool in_service = true;

    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Generator {
    int bus = 0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double cost = 0.0; // per p.u. of output
    bool in_service = true;

    friend bool operator==(const Generator&, const Generator&) = default;
};

/// Demand is stored consumption-positive; the OPF flips the sign.
struct Load {
    int bus = 0;
    double p_demand = 0.0;
    double q_demand = 0.0;
    double shed_cost = 0.0; // per p.u. of unserved demand
    bool in_service = true;

    friend bool operator==(const Load&, const Load&) = default;
};

/// Grid data in per-unit on `base_mva`.
///
/// Records are addressed by position; buses are additionally addressable by
/// their integer id through `bus_pos`. Call `reindex` after editing the bus
/// list by hand (`validate_network` does it for you).
struct Network {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    std::size_t n_bus() const noexcept { return buses.size(); }
    std::size_t n_branch() const noexcept; // in service only
    std::size_t n_gen() const noexcept;    // in service only
    std::size_t n_load() const noexcept;   // in service only

    /// Position of the bus with the given id; throws CaseError when absent.
    std::size_t bus_pos(int id) const;
    bool has_bus(int id) const noexcept { return index_.contains(id); }

    /// Position of the slack bus; throws CaseError when there is none.
    std::size_t slack_pos() const;

    void reindex();

    friend bool operator==(const Network& a, const Network& b) {
        return a.base_mva == b.base_mva && a.buses == b.buses && a.branches == b.branches &&
               a.generators == b.generators && a.loads == b.loads;
    }

private:
    std::unordered_map<int, std::size_t> index_;
};

/// Checks every structural and physical invariant and rebuilds the bus index.
/// Throws CaseError naming the first violation.
void validate_network(Network& net);

/// Parses the sectioned-CSV case format. Quantities are already per-unit.
Network parse_case(std::string_view text);
Network load_case_file(const std::string& path);

/// Inverse of parse_case; output re-parses to an identical Network.
std::string write_case(const Network& net);

/// Connected components over in-service branches. Each component lists bus
/// positions in ascending order; components are ordered by their smallest
/// member.
std::vector<std::vector<std::size_t>> connected_components(const Network& net);

/// The component of a network that contains the slack bus, plus maps from
/// each retained record back to its position in the source network.
struct SlackIsland {
    Network net;
    double shed_demand = 0.0; // total p_demand of in-service loads outside the island
    std::vector<std::size_t> bus_origin;
    std::vector<std::size_t> branch_origin;
    std::vector<std::size_t> gen_origin;
    std::vector<std::size_t> load_origin;
};

/// Keeps only the records energized from the slack bus. Branches are kept
/// when both ends are in the island (including out-of-service ones).
SlackIsland retain_slack_island(const Network& net);

/// In-place variant used by the cascade engine: records outside the slack
/// island are switched out of service instead of being removed, so positions
/// stay stable. Returns the newly de-energized demand.
double deenergize_outside_slack_island(Network& net, std::vector<bool>* energized = nullptr);

} // namespace cascade_rl
