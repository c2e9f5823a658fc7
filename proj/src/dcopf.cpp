#include "cascade_rl/dcopf.hpp"

#include "cascade_rl/error.hpp"
#include "cascade_rl/rng.hpp"

#include <bit>
#include <cmath>

namespace cascade_rl {

Ptdf build_ptdf(const Network& net, int slack_bus_id) {
    const std::size_t n = net.buses.size();
    const std::size_t slack = net.bus_pos(slack_bus_id);
    if (connected_components(net).size() != 1)
        throw NumericalError("cannot build PTDF: network is disconnected");

    Ptdf out;
    out.slack = slack;
    out.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.branches.size()), static_cast<Eigen::Index>(n));
    if (n < 2)
        return out;

    // Reduced susceptance matrix over non-slack buses.
    std::vector<Eigen::Index> col(n, -1);
    for (std::size_t i = 0, c = 0; i < n; ++i)
        if (i != slack)
            col[i] = static_cast<Eigen::Index>(c++);
    const auto nr = static_cast<Eigen::Index>(n - 1);
    Eigen::MatrixXd bred = Eigen::MatrixXd::Zero(nr, nr);
    for (const Branch& br : net.branches) {
        if (!br.in_service)
            continue;
        const Eigen::Index f = col[net.bus_pos(br.from_bus)];
        const Eigen::Index t = col[net.bus_pos(br.to_bus)];
        const double s = 1.0 / br.x;
        if (f >= 0)
            bred(f, f) += s;
        if (t >= 0)
            bred(t, t) += s;
        if (f >= 0 && t >= 0) {
            bred(f, t) -= s;
            bred(t, f) -= s;
        }
    }
    const Eigen::MatrixXd x = bred.partialPivLu().inverse(); // angle sensitivity to injections

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        if (!br.in_service)
            continue;
        const Eigen::Index f = col[net.bus_pos(br.from_bus)];
        const Eigen::Index t = col[net.bus_pos(br.to_bus)];
        Eigen::VectorXd row = Eigen::VectorXd::Zero(nr);
        if (f >= 0)
            row += x.row(f).transpose();
        if (t >= 0)
            row -= x.row(t).transpose();
        row /= br.x;
        for (std::size_t i = 0; i < n; ++i)
            if (col[i] >= 0)
                out.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = row(col[i]);
    }
    return out;
}

Ptdf build_ptdf(const Network& net) { return build_ptdf(net, net.buses[net.slack_pos()].id); }

std::uint64_t topology_hash(const Network& net) {
    std::uint64_t h = splitmix64(net.buses.size());
    auto mix = [&h](std::uint64_t v) { h = splitmix64(h ^ v); };
    for (const Bus& b : net.buses) {
        mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(b.id)));
        mix(b.kind == BusKind::slack ? 1 : 0);
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        if (!br.in_service)
            continue;
        mix(k);
        mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(br.from_bus)));
        mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(br.to_bus)));
        mix(std::bit_cast<std::uint64_t>(br.x));
    }
    return h;
}

std::shared_ptr<const Ptdf> PtdfCache::get(const Network& net) {
    const std::uint64_t key = topology_hash(net);
    {
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end())
            return it->second;
    }
    auto ptdf = std::make_shared<const Ptdf>(build_ptdf(net));
    std::lock_guard lock(mutex_);
    if (entries_.size() >= capacity_)
        entries_.clear();
    entries_.emplace(key, ptdf);
    return ptdf;
}

std::size_t PtdfCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

DcopfProblem assemble_lp(const Network& net, const Ptdf& ptdf, double alpha) {
    const std::size_t ng = net.generators.size();
    const std::size_t nl = net.loads.size();
    const std::size_t nv = ng + nl;

    DcopfProblem out;
    out.n_gen_vars = ng;
    LpProblem& lp = out.lp;
    lp.cost.assign(nv, 0.0);
    lp.lower.assign(nv, 0.0);
    lp.upper.assign(nv, 0.0);

    std::vector<std::size_t> bus_of(nv);
    for (std::size_t k = 0; k < ng; ++k) {
        const Generator& g = net.generators[k];
        bus_of[k] = net.bus_pos(g.bus);
        lp.cost[k] = g.cost;
        if (g.in_service) {
            lp.lower[k] = g.p_min;
            lp.upper[k] = g.p_max;
        }
    }
    // Load variables are injections in [-P_d, 0]; shedding cost d * (p + P_d).
    for (std::size_t k = 0; k < nl; ++k) {
        const Load& l = net.loads[k];
        const std::size_t v = ng + k;
        bus_of[v] = net.bus_pos(l.bus);
        lp.cost[v] = l.shed_cost;
        if (l.in_service) {
            lp.lower[v] = -l.p_demand;
            lp.offset += l.shed_cost * l.p_demand;
        }
    }

    lp.eq_rows = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(nv));
    lp.eq_rhs = {0.0};

    for (std::size_t k = 0; k < net.branches.size(); ++k)
        if (net.branches[k].in_service)
            out.flow_row_branch.push_back(k);
    const auto nrows = static_cast<Eigen::Index>(out.flow_row_branch.size());
    lp.ineq_rows.resize(nrows, static_cast<Eigen::Index>(nv));
    lp.ineq_lower.resize(static_cast<std::size_t>(nrows));
    lp.ineq_upper.resize(static_cast<std::size_t>(nrows));
    for (Eigen::Index r = 0; r < nrows; ++r) {
        const std::size_t k = out.flow_row_branch[static_cast<std::size_t>(r)];
        for (std::size_t v = 0; v < nv; ++v)
            lp.ineq_rows(r, static_cast<Eigen::Index>(v)) =
                ptdf.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(bus_of[v]));
        const double limit = alpha * net.branches[k].rate;
        lp.ineq_lower[static_cast<std::size_t>(r)] = -limit;
        lp.ineq_upper[static_cast<std::size_t>(r)] = limit;
    }
    return out;
}

namespace {

DispatchResult empty_dispatch(const Network& net, double alpha) {
    DispatchResult d;
    d.alpha_used = alpha;
    d.p_gen.assign(net.generators.size(), 0.0);
    d.p_load_served.assign(net.loads.size(), 0.0);
    return d;
}

} // namespace

DcopfAudit run_dcopf_audited(const Network& net, double alpha, PtdfCache* cache) {
    DcopfAudit audit;
    audit.dispatch = empty_dispatch(net, alpha);
    DispatchResult& d = audit.dispatch;

    double demand = 0.0;
    for (const Load& l : net.loads)
        if (l.in_service)
            demand += l.p_demand;

    if (net.n_gen() == 0) {
        d.feasible = false;
        d.shed_total = demand;
        return audit;
    }
    if (net.n_load() == 0) {
        bool zero_ok = true;
        for (const Generator& g : net.generators)
            if (g.in_service && (g.p_min > 0.0 || g.p_max < 0.0))
                zero_ok = false;
        if (zero_ok) {
            d.feasible = true;
            return audit;
        }
    }

    std::shared_ptr<const Ptdf> ptdf = cache ? cache->get(net) : std::make_shared<const Ptdf>(build_ptdf(net));
    audit.problem = assemble_lp(net, *ptdf, alpha);
    audit.solution = solve_lp(audit.problem.lp);
    if (audit.solution.status != LpStatus::optimal) {
        d.feasible = false;
        d.shed_total = demand;
        return audit;
    }

    const std::size_t ng = net.generators.size();
    d.feasible = true;
    d.objective = audit.solution.objective;
    for (std::size_t k = 0; k < ng; ++k)
        d.p_gen[k] = net.generators[k].in_service ? audit.solution.x[k] : 0.0;
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const Load& l = net.loads[k];
        if (!l.in_service)
            continue;
        d.p_load_served[k] = -audit.solution.x[ng + k];
        d.shed_total += l.p_demand - d.p_load_served[k];
    }
    return audit;
}

DispatchResult run_dcopf(const Network& net, double alpha, PtdfCache* cache) {
    return run_dcopf_audited(net, alpha, cache).dispatch;
}

} // namespace cascade_rl
