#include "cascade_rl/power_flow.hpp"

#include "cascade_rl/error.hpp"

#include <algorithm>
#include <cmath>

namespace cascade_rl {

using Complex = std::complex<double>;

ComplexMatrix build_ybus(const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (const Branch& br : net.branches) {
        if (!br.in_service)
            continue;
        if (br.r == 0.0 && br.x == 0.0)
            throw CaseError("zero-impedance branch between buses " + std::to_string(br.from_bus) + " and " +
                            std::to_string(br.to_bus));
        const auto f = static_cast<Eigen::Index>(net.bus_pos(br.from_bus));
        const auto t = static_cast<Eigen::Index>(net.bus_pos(br.to_bus));
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b_charge / 2.0);
        y(f, f) += ys + ysh;
        y(t, t) += ys + ysh;
        y(f, t) -= ys;
        y(t, f) -= ys;
    }
    return y;
}

namespace {

Eigen::MatrixXd reduced_susceptance(const Network& net, std::size_t slack) {
    const auto n = static_cast<Eigen::Index>(net.buses.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const Branch& br : net.branches) {
        if (!br.in_service)
            continue;
        const auto f = static_cast<Eigen::Index>(net.bus_pos(br.from_bus));
        const auto t = static_cast<Eigen::Index>(net.bus_pos(br.to_bus));
        const double s = 1.0 / br.x;
        b(f, f) += s;
        b(t, t) += s;
        b(f, t) -= s;
        b(t, f) -= s;
    }
    const auto k = static_cast<Eigen::Index>(slack);
    Eigen::MatrixXd reduced(n - 1, n - 1);
    for (Eigen::Index i = 0, ri = 0; i < n; ++i) {
        if (i == k)
            continue;
        for (Eigen::Index j = 0, rj = 0; j < n; ++j) {
            if (j == k)
                continue;
            reduced(ri, rj++) = b(i, j);
        }
        ++ri;
    }
    return reduced;
}

} // namespace

DcFlowResult dc_power_flow(const Network& net, const InjectionVector& inj) {
    const std::size_t n = net.buses.size();
    if (inj.p.size() != n)
        throw ConfigError("injection vector has " + std::to_string(inj.p.size()) + " entries for " +
                          std::to_string(n) + " buses");
    if (connected_components(net).size() != 1)
        throw NumericalError("singular susceptance matrix: network is disconnected "
                             "(reduce it with retain_slack_island first)");

    const std::size_t slack = net.slack_pos();
    DcFlowResult out;
    out.theta.assign(n, 0.0);
    out.flow.assign(net.branches.size(), 0.0);
    if (n > 1) {
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(n - 1));
        for (std::size_t i = 0, r = 0; i < n; ++i)
            if (i != slack)
                rhs(static_cast<Eigen::Index>(r++)) = inj.p[i];
        const Eigen::VectorXd th = reduced_susceptance(net, slack).partialPivLu().solve(rhs);
        for (std::size_t i = 0, r = 0; i < n; ++i)
            if (i != slack)
                out.theta[i] = th(static_cast<Eigen::Index>(r++));
    }
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        if (br.in_service)
            out.flow[k] = (out.theta[net.bus_pos(br.from_bus)] - out.theta[net.bus_pos(br.to_bus)]) / br.x;
    }
    return out;
}

BusInjections dispatch_injections(const Network& net, const DispatchResult& dispatch) {
    BusInjections inj;
    inj.p.assign(net.buses.size(), 0.0);
    inj.q.assign(net.buses.size(), 0.0);
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        const Generator& g = net.generators[k];
        if (g.in_service && k < dispatch.p_gen.size())
            inj.p[net.bus_pos(g.bus)] += dispatch.p_gen[k];
    }
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        const Load& l = net.loads[k];
        if (!l.in_service)
            continue;
        const double served = k < dispatch.p_load_served.size() ? dispatch.p_load_served[k] : l.p_demand;
        const std::size_t b = net.bus_pos(l.bus);
        inj.p[b] -= served;
        inj.q[b] -= l.q_demand * (served / l.p_demand);
    }
    return inj;
}

namespace {

enum class NodeType { slack, pv, pq };

void compute_injections(const ComplexMatrix& y, const std::vector<double>& v, const std::vector<double>& th,
                        Eigen::VectorXd& p, Eigen::VectorXd& q) {
    const Eigen::Index n = y.rows();
    p.setZero(n);
    q.setZero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double pi = 0.0;
        double qi = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const Complex yik = y(i, k);
            if (yik == Complex(0.0, 0.0))
                continue;
            const double d = th[static_cast<std::size_t>(i)] - th[static_cast<std::size_t>(k)];
            const double c = std::cos(d);
            const double s = std::sin(d);
            pi += v[static_cast<std::size_t>(k)] * (yik.real() * c + yik.imag() * s);
            qi += v[static_cast<std::size_t>(k)] * (yik.real() * s - yik.imag() * c);
        }
        p(i) = v[static_cast<std::size_t>(i)] * pi;
        q(i) = v[static_cast<std::size_t>(i)] * qi;
    }
}

} // namespace

PfSolution ac_power_flow(const Network& net, const DispatchResult& dispatch, const AcOptions& options) {
    const std::size_t n = net.buses.size();
    const std::size_t slack = net.slack_pos();
    const ComplexMatrix y = build_ybus(net);
    const BusInjections spec = dispatch_injections(net, dispatch);

    std::vector<NodeType> type(n, NodeType::pq);
    std::vector<double> q_lo(n, 0.0);
    std::vector<double> q_hi(n, 0.0);
    std::vector<bool> has_gen(n, false);
    for (const Generator& g : net.generators) {
        if (!g.in_service)
            continue;
        const std::size_t b = net.bus_pos(g.bus);
        has_gen[b] = true;
        q_lo[b] += g.q_min;
        q_hi[b] += g.q_max;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (i == slack)
            type[i] = NodeType::slack;
        else if (net.buses[i].kind == BusKind::pv && has_gen[i])
            type[i] = NodeType::pv;
    }
    std::vector<double> q_spec = spec.q;
    // Reactive demand at each bus, needed to translate between net and generator Q.
    std::vector<double> q_load(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        q_load[i] = -spec.q[i];

    PfSolution sol;
    sol.v.assign(n, 1.0);
    sol.theta.assign(n, 0.0);
    sol.q_clamped.assign(n, false);
    for (std::size_t i = 0; i < n; ++i)
        if (type[i] != NodeType::pq)
            sol.v[i] = net.buses[i].v_set;

    Eigen::VectorXd p_calc;
    Eigen::VectorXd q_calc;
    bool diverged = false;

    for (int pass = 0; pass <= options.max_retype_passes && !diverged; ++pass) {
        // Unknown ordering: angles of all non-slack buses, then magnitudes of PQ buses.
        std::vector<std::size_t> ang;
        std::vector<std::size_t> mag;
        for (std::size_t i = 0; i < n; ++i) {
            if (type[i] != NodeType::slack)
                ang.push_back(i);
            if (type[i] == NodeType::pq)
                mag.push_back(i);
        }
        const auto na = static_cast<Eigen::Index>(ang.size());
        const auto nm = static_cast<Eigen::Index>(mag.size());
        std::vector<Eigen::Index> ang_col(n, -1);
        std::vector<Eigen::Index> mag_col(n, -1);
        for (Eigen::Index a = 0; a < na; ++a)
            ang_col[ang[static_cast<std::size_t>(a)]] = a;
        for (Eigen::Index m = 0; m < nm; ++m)
            mag_col[mag[static_cast<std::size_t>(m)]] = na + m;

        bool pass_converged = false;
        for (int it = 0;; ++it) {
            compute_injections(y, sol.v, sol.theta, p_calc, q_calc);
            Eigen::VectorXd mis(na + nm);
            for (Eigen::Index a = 0; a < na; ++a) {
                const std::size_t i = ang[static_cast<std::size_t>(a)];
                mis(a) = spec.p[i] - p_calc(static_cast<Eigen::Index>(i));
            }
            for (Eigen::Index m = 0; m < nm; ++m) {
                const std::size_t i = mag[static_cast<std::size_t>(m)];
                mis(na + m) = q_spec[i] - q_calc(static_cast<Eigen::Index>(i));
            }
            sol.max_mismatch = mis.size() > 0 ? mis.cwiseAbs().maxCoeff() : 0.0;
            if (!std::isfinite(sol.max_mismatch)) {
                diverged = true;
                break;
            }
            if (sol.max_mismatch < options.tolerance) {
                pass_converged = true;
                break;
            }
            if (it >= options.max_iterations) {
                diverged = true;
                break;
            }

            Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(na + nm, na + nm);
            for (std::size_t i = 0; i < n; ++i) {
                if (type[i] == NodeType::slack)
                    continue;
                const Eigen::Index rp = ang_col[i];
                const Eigen::Index rq = mag_col[i];
                const auto ii = static_cast<Eigen::Index>(i);
                for (std::size_t k = 0; k < n; ++k) {
                    const auto kk = static_cast<Eigen::Index>(k);
                    const Complex yik = y(ii, kk);
                    if (yik == Complex(0.0, 0.0))
                        continue;
                    const double g = yik.real();
                    const double b = yik.imag();
                    const double vi = sol.v[i];
                    const double vk = sol.v[k];
                    if (k == i) {
                        const double pi = p_calc(ii);
                        const double qi = q_calc(ii);
                        jac(rp, rp) = -qi - b * vi * vi;
                        if (rq >= 0) {
                            jac(rp, rq) = pi / vi + g * vi;
                            jac(rq, rp) = pi - g * vi * vi;
                            jac(rq, rq) = qi / vi - b * vi;
                        }
                        continue;
                    }
                    const double d = sol.theta[i] - sol.theta[k];
                    const double c = std::cos(d);
                    const double s = std::sin(d);
                    const Eigen::Index cp = ang_col[k];
                    const Eigen::Index cq = mag_col[k];
                    if (cp >= 0) {
                        jac(rp, cp) = vi * vk * (g * s - b * c);
                        if (rq >= 0)
                            jac(rq, cp) = -vi * vk * (g * c + b * s);
                    }
                    if (cq >= 0) {
                        jac(rp, cq) = vi * (g * c + b * s);
                        if (rq >= 0)
                            jac(rq, cq) = vi * (g * s - b * c);
                    }
                }
            }
            const Eigen::VectorXd dx = jac.partialPivLu().solve(mis);
            if (!dx.allFinite()) {
                diverged = true;
                break;
            }
            for (Eigen::Index a = 0; a < na; ++a)
                sol.theta[ang[static_cast<std::size_t>(a)]] += dx(a);
            for (Eigen::Index m = 0; m < nm; ++m) {
                double& vm = sol.v[mag[static_cast<std::size_t>(m)]];
                vm += dx(na + m);
                if (!(vm > 0.0))
                    diverged = true;
            }
            ++sol.iterations;
            if (diverged)
                break;
        }
        if (!pass_converged)
            break;

        // Reactive limits: switch violating PV buses to PQ at the violated limit.
        bool retyped = false;
        if (pass < options.max_retype_passes) {
            for (std::size_t i = 0; i < n; ++i) {
                if (type[i] != NodeType::pv)
                    continue;
                const double q_gen = q_calc(static_cast<Eigen::Index>(i)) + q_load[i];
                double limit = 0.0;
                if (q_gen > q_hi[i] + options.tolerance)
                    limit = q_hi[i];
                else if (q_gen < q_lo[i] - options.tolerance)
                    limit = q_lo[i];
                else
                    continue;
                type[i] = NodeType::pq;
                q_spec[i] = limit - q_load[i];
                sol.q_clamped[i] = true;
                retyped = true;
            }
        }
        if (!retyped) {
            sol.converged = true;
            break;
        }
    }

    compute_injections(y, sol.v, sol.theta, p_calc, q_calc);
    sol.p_inj.assign(p_calc.data(), p_calc.data() + p_calc.size());
    sol.q_inj.assign(q_calc.data(), q_calc.data() + q_calc.size());

    sol.flow_from.assign(net.branches.size(), 0.0);
    sol.loading.assign(net.branches.size(), 0.0);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        const Branch& br = net.branches[k];
        if (!br.in_service)
            continue;
        const std::size_t f = net.bus_pos(br.from_bus);
        const std::size_t t = net.bus_pos(br.to_bus);
        const Complex vf = std::polar(sol.v[f], sol.theta[f]);
        const Complex vt = std::polar(sol.v[t], sol.theta[t]);
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex i_f = (ys + Complex(0.0, br.b_charge / 2.0)) * vf - ys * vt;
        sol.flow_from[k] = (vf * std::conj(i_f)).real();
        sol.loading[k] = std::abs(sol.flow_from[k]) / br.rate;
    }
    return sol;
}

} // namespace cascade_rl
