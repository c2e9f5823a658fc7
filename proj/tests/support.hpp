#pragma once

// Builders and independent reference computations shared by the test
// binaries. Nothing here calls into the solvers under test.

#include "cascade_rl/network.hpp"
#include "cascade_rl/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#ifndef CRL_CASE_DIR
#define CRL_CASE_DIR "cases"
#endif

namespace test_support {

using namespace cascade_rl;

inline std::string ieee118_path() { return std::string(CRL_CASE_DIR) + "/ieee118.case"; }

// Gaussian elimination with partial pivoting on a dense copy.
inline bool gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x,
                        double pivot_tol = 1e-12) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c]))
                p = r;
        if (std::abs(a[p][c]) < pivot_tol)
            return false;
        std::swap(a[p], a[c]);
        std::swap(b[p], b[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            if (f == 0.0)
                continue;
            for (std::size_t k = c; k < n; ++k)
                a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k)
            s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return true;
}

// Union-find component count over in-service branches.
inline std::size_t union_find_components(const Network& net) {
    std::vector<std::size_t> parent(net.buses.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    };
    for (const Branch& br : net.branches)
        if (br.in_service)
            parent[find(net.bus_pos(br.from_bus))] = find(net.bus_pos(br.to_bus));
    std::size_t roots = 0;
    for (std::size_t i = 0; i < parent.size(); ++i)
        roots += find(i) == i ? 1 : 0;
    return roots;
}

// DC angles by direct solve of the reduced susceptance system; the flows
// follow from the angles. Returns false for a singular (disconnected) system.
inline bool oracle_dc_flow(const Network& net, const std::vector<double>& inj, std::vector<double>& flow) {
    const std::size_t n = net.buses.size();
    const std::size_t slack = net.slack_pos();
    std::vector<std::vector<double>> b(n, std::vector<double>(n, 0.0));
    for (const Branch& br : net.branches) {
        if (!br.in_service)
            continue;
        const std::size_t f = net.bus_pos(br.from_bus), t = net.bus_pos(br.to_bus);
        b[f][f] += 1.0 / br.x;
        b[t][t] += 1.0 / br.x;
        b[f][t] -= 1.0 / br.x;
        b[t][f] -= 1.0 / br.x;
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
        if (i != slack)
            keep.push_back(i);
    std::vector<std::vector<double>> red(keep.size(), std::vector<double>(keep.size()));
    std::vector<double> rhs(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        rhs[i] = inj[keep[i]];
        for (std::size_t j = 0; j < keep.size(); ++j)
            red[i][j] = b[keep[i]][keep[j]];
    }
    std::vector<double> sol;
    if (!keep.empty() && !gauss_solve(red, rhs, sol))
        return false;
    std::vector<double> theta(n, 0.0);
    for (std::size_t i = 0; i < keep.size(); ++i)
        theta[keep[i]] = sol[i];
    flow.assign(net.branches.size(), 0.0);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        if (br.in_service)
            flow[k] = (theta[net.bus_pos(br.from_bus)] - theta[net.bus_pos(br.to_bus)]) / br.x;
    }
    return true;
}

// Column i: flows for a unit injection at bus i withdrawn at the slack.
inline std::vector<std::vector<double>> oracle_ptdf(const Network& net) {
    const std::size_t n = net.buses.size();
    std::vector<std::vector<double>> out(net.branches.size(), std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        if (i == net.slack_pos())
            continue;
        std::vector<double> inj(n, 0.0), flow;
        inj[i] = 1.0;
        inj[net.slack_pos()] = -1.0;
        if (!oracle_dc_flow(net, inj, flow))
            return {};
        for (std::size_t k = 0; k < flow.size(); ++k)
            out[k][i] = flow[k];
    }
    return out;
}

struct OracleOpf {
    bool feasible = false;
    double objective = std::numeric_limits<double>::infinity();
};

// DCOPF by enumerating every vertex of the feasible polytope. Variables are
// generator outputs followed by served loads (consumption-positive); the
// objective charges generation cost plus shedding cost on unserved demand.
inline OracleOpf oracle_dcopf_vertices(const Network& net, double alpha) {
    const std::size_t ng = net.generators.size(), nl = net.loads.size(), nv = ng + nl;
    const auto ptdf = oracle_ptdf(net);

    struct Row {
        std::vector<double> a;
        double rhs;
    };
    std::vector<Row> cons; // candidate active constraints a.x = rhs
    std::vector<std::pair<std::vector<double>, std::pair<double, double>>> ranges; // lo <= a.x <= hi
    std::vector<double> lo(nv), hi(nv), cost(nv);
    double offset = 0.0;
    std::vector<std::size_t> bus_of(nv);
    for (std::size_t k = 0; k < ng; ++k) {
        const Generator& g = net.generators[k];
        lo[k] = g.in_service ? g.p_min : 0.0;
        hi[k] = g.in_service ? g.p_max : 0.0;
        cost[k] = g.cost;
        bus_of[k] = net.bus_pos(g.bus);
    }
    for (std::size_t k = 0; k < nl; ++k) {
        const Load& l = net.loads[k];
        lo[ng + k] = 0.0;
        hi[ng + k] = l.in_service ? l.p_demand : 0.0;
        cost[ng + k] = -l.shed_cost;
        if (l.in_service)
            offset += l.shed_cost * l.p_demand;
        bus_of[ng + k] = net.bus_pos(l.bus);
    }
    for (std::size_t v = 0; v < nv; ++v) {
        std::vector<double> e(nv, 0.0);
        e[v] = 1.0;
        cons.push_back({e, lo[v]});
        cons.push_back({e, hi[v]});
        ranges.push_back({e, {lo[v], hi[v]}});
    }
    for (std::size_t br = 0; br < net.branches.size(); ++br) {
        if (!net.branches[br].in_service)
            continue;
        std::vector<double> a(nv);
        for (std::size_t v = 0; v < nv; ++v)
            a[v] = (v < ng ? 1.0 : -1.0) * ptdf[br][bus_of[v]];
        const double lim = alpha * net.branches[br].rate;
        cons.push_back({a, -lim});
        cons.push_back({a, lim});
        ranges.push_back({a, {-lim, lim}});
    }
    std::vector<double> balance(nv);
    for (std::size_t v = 0; v < nv; ++v)
        balance[v] = v < ng ? 1.0 : -1.0;

    OracleOpf best;
    const std::size_t pick = nv - 1;
    std::vector<std::size_t> idx(pick);
    std::iota(idx.begin(), idx.end(), 0);
    auto evaluate = [&] {
        std::vector<std::vector<double>> a{balance};
        std::vector<double> b{0.0};
        for (std::size_t i : idx) {
            a.push_back(cons[i].a);
            b.push_back(cons[i].rhs);
        }
        std::vector<double> x;
        if (!gauss_solve(a, b, x, 1e-10))
            return;
        for (const auto& [row, bounds] : ranges) {
            double s = 0.0;
            for (std::size_t v = 0; v < nv; ++v)
                s += row[v] * x[v];
            if (s < bounds.first - 1e-9 || s > bounds.second + 1e-9)
                return;
        }
        double obj = offset;
        for (std::size_t v = 0; v < nv; ++v)
            obj += cost[v] * x[v];
        best.feasible = true;
        best.objective = std::min(best.objective, obj);
    };
    if (pick == 0) {
        evaluate();
        return best;
    }
    const std::size_t m = cons.size();
    while (true) {
        evaluate();
        std::size_t i = pick;
        while (i-- > 0) {
            if (idx[i] != i + m - pick)
                break;
            if (i == 0)
                return best;
        }
        if (idx[i] == i + m - pick)
            return best;
        ++idx[i];
        for (std::size_t j = i + 1; j < pick; ++j)
            idx[j] = idx[j - 1] + 1;
    }
}

// Connected network with 2..max_bus buses, at most max_branch branches,
// 1..3 generators and 1..3 loads. Bus 1 is the slack.
inline Network random_small_network(Rng& rng, std::size_t max_bus = 4, std::size_t max_branch = 5) {
    Network net;
    const std::size_t nb = 2 + rng.index(max_bus - 1);
    for (std::size_t i = 0; i < nb; ++i) {
        Bus b;
        b.id = static_cast<int>(i + 1);
        b.kind = i == 0 ? BusKind::slack : BusKind::pq;
        net.buses.push_back(b);
    }
    auto add_branch = [&](int f, int t) {
        Branch br;
        br.from_bus = f;
        br.to_bus = t;
        br.x = rng.uniform(0.05, 0.5);
        br.rate = rng.uniform(0.2, 1.5);
        net.branches.push_back(br);
    };
    for (std::size_t i = 1; i < nb; ++i)
        add_branch(static_cast<int>(rng.index(i) + 1), static_cast<int>(i + 1));
    const std::size_t extra = rng.index(max_branch - (nb - 1) + 1);
    for (std::size_t e = 0; e < extra; ++e) {
        const int f = static_cast<int>(rng.index(nb) + 1);
        int t = static_cast<int>(rng.index(nb) + 1);
        if (t == f)
            t = f % static_cast<int>(nb) + 1;
        add_branch(f, t);
    }
    const std::size_t ng = 1 + rng.index(3), nl = 1 + rng.index(3);
    double max_cost = 0.0;
    for (std::size_t k = 0; k < ng; ++k) {
        Generator g;
        g.bus = static_cast<int>(rng.index(nb) + 1);
        g.p_max = rng.uniform(0.5, 2.0);
        g.p_min = rng.uniform01() < 0.2 ? rng.uniform(0.0, 0.4) : 0.0;
        g.q_min = -1.0;
        g.q_max = 1.0;
        g.cost = rng.uniform(1.0, 10.0);
        max_cost = std::max(max_cost, g.cost);
        net.generators.push_back(g);
    }
    for (std::size_t k = 0; k < nl; ++k) {
        Load l;
        l.bus = static_cast<int>(rng.index(nb) + 1);
        l.p_demand = rng.uniform(0.1, 1.2);
        l.shed_cost = max_cost + rng.uniform(10.0, 40.0);
        net.loads.push_back(l);
    }
    validate_network(net);
    return net;
}

// Independent AC mismatch: builds its own admittance matrix (pi model) and
// evaluates S = V conj(Y V) against the specified injections.
inline double oracle_ac_mismatch(const Network& net, const std::vector<double>& v, const std::vector<double>& theta,
                                 const std::vector<double>& p_spec, const std::vector<double>& q_spec,
                                 const std::vector<bool>& q_free) {
    using C = std::complex<double>;
    const std::size_t n = net.buses.size();
    std::vector<std::vector<C>> y(n, std::vector<C>(n, C(0.0, 0.0)));
    for (const Branch& br : net.branches) {
        if (!br.in_service)
            continue;
        const std::size_t f = net.bus_pos(br.from_bus), t = net.bus_pos(br.to_bus);
        const C ys = C(1.0, 0.0) / C(br.r, br.x);
        const C sh(0.0, br.b_charge / 2.0);
        y[f][f] += ys + sh;
        y[t][t] += ys + sh;
        y[f][t] -= ys;
        y[t][f] -= ys;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        C cur(0.0, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            cur += y[i][k] * std::polar(v[k], theta[k]);
        const C s = std::polar(v[i], theta[i]) * std::conj(cur);
        if (i == net.slack_pos())
            continue;
        worst = std::max(worst, std::abs(s.real() - p_spec[i]));
        if (!q_free[i])
            worst = std::max(worst, std::abs(s.imag() - q_spec[i]));
    }
    return worst;
}

} // namespace test_support
