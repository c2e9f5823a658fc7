#pragma once

// Hand-built grids with known cascade behaviour, the two-state toy MDP and a
// finite-difference gradient audit. Used by the unit tests and by the
// acceptance runner.

#include "support.hpp"

#include "cascade_rl/agent.hpp"
#include "cascade_rl/cascade.hpp"

#include <chrono>

namespace test_support {

// Two buses joined by `lines` identical lossless lines; generator at the
// slack, one load at bus 2.
inline Network parallel_corridor(std::size_t lines, double x, double rate, double load, double gen_cost) {
    Network net;
    net.buses = {{1, BusKind::slack, 1, 1, 0}, {2, BusKind::pq, 1, 1, 0}};
    for (std::size_t k = 0; k < lines; ++k)
        net.branches.push_back({1, 2, 0.0, x, 0.0, rate, true});
    net.generators = {{1, 0.0, 10.0, -10.0, 10.0, gen_cost, true}};
    net.loads = {{2, load, 0.0, 100.0 * gen_cost, true}};
    validate_network(net);
    return net;
}

// Every stage: one line lost, redispatch clean in a single generation.
inline Network clean_corridor() { return parallel_corridor(4, 0.1, 5.0, 0.5, 2.0); }

// Healthy base case; losing any of the three lines leaves a transfer past
// the nose of the PV curve (P x > 1/2), so the first generation diverges.
inline Network fragile_corridor() { return parallel_corridor(3, 0.6, 5.0, 2.0, 1.0); }

// Survives two attacks, diverges once a single line is left.
inline Network wearing_corridor() { return parallel_corridor(4, 0.6, 5.0, 1.0, 2.0); }

// Two stiff lines rated 0.7 plus one weak line. At alpha = 1.25 the DCOPF
// loads the stiff lines to 0.727 (over their AC rating), both trip, and the
// weak line alone cannot carry the transfer: converge-trip-diverge.
inline Network tripping_corridor() {
    Network net;
    net.buses = {{1, BusKind::slack, 1, 1, 0}, {2, BusKind::pq, 1, 1, 0}};
    net.branches = {{1, 2, 0.0, 0.2, 0.0, 0.7, true}, {1, 2, 0.0, 0.2, 0.0, 0.7, true}, {1, 2, 0.0, 1.0, 0.0, 5.0, true}};
    net.generators = {{1, 0.0, 10.0, -10.0, 10.0, 1.0, true}};
    net.loads = {{2, 1.6, 0.0, 100.0, true}};
    validate_network(net);
    return net;
}

inline EpisodeHooks fixed_policy(std::size_t action) {
    EpisodeHooks h;
    h.policy = [action](const StateVector&, std::size_t) { return action; };
    return h;
}

// ---------------------------------------------------------------------------
// Toy MDP. States A, B (one-hot), actions 0, 1.
//   A,0 -> B, r 0     A,1 -> A, r 1
//   B,0 -> end, r 2   B,1 -> A, r 0

struct ToyStep {
    std::size_t next;
    double reward;
    bool done;
};

inline ToyStep toy_step(std::size_t s, std::size_t a) {
    if (s == 0)
        return a == 0 ? ToyStep{1, 0.0, false} : ToyStep{0, 1.0, false};
    return a == 0 ? ToyStep{0, 2.0, true} : ToyStep{0, 0.0, false};
}

inline StateVector toy_state(std::size_t s) {
    StateVector v;
    v.values = {s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0};
    return v;
}

using ToyQ = std::array<std::array<double, 2>, 2>;

// Optimal action values by value iteration.
inline ToyQ toy_q_star(double gamma) {
    ToyQ q{};
    for (int it = 0; it < 5000; ++it) {
        ToyQ n{};
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t a = 0; a < 2; ++a) {
                const ToyStep st = toy_step(s, a);
                n[s][a] = st.reward + (st.done ? 0.0 : gamma * std::max(q[st.next][0], q[st.next][1]));
            }
        q = n;
    }
    return q;
}

// Action values of the uniform-random policy: (I - gamma P) q = r.
inline ToyQ toy_q_uniform(double gamma) {
    std::vector<std::vector<double>> a(4, std::vector<double>(4, 0.0));
    std::vector<double> b(4), x;
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t u = 0; u < 2; ++u) {
            const std::size_t row = 2 * s + u;
            const ToyStep st = toy_step(s, u);
            a[row][row] += 1.0;
            b[row] = st.reward;
            if (!st.done)
                for (std::size_t v = 0; v < 2; ++v)
                    a[row][2 * st.next + v] -= 0.5 * gamma;
        }
    gauss_solve(a, b, x);
    return {{{x[0], x[1]}, {x[2], x[3]}}};
}

struct ToyRun {
    ToyQ learned{};
    std::size_t updates = 0;
    double seconds = 0.0;
};

// Uniform behaviour policy, linear net on one-hot states (tabular), a
// stepped learning-rate schedule. `on_policy` selects SARSA.
inline ToyRun toy_train(bool on_policy, std::size_t updates, std::uint64_t seed, double gamma = 0.7) {
    const auto t0 = std::chrono::steady_clock::now();
    ValueNet net = ValueNet::linear(2, 2);
    Rng rng(seed);
    TdParams p;
    p.gamma = gamma;
    p.reward_scale = 1.0;
    const std::array<double, 5> schedule{0.2, 0.05, 0.01, 0.002, 0.0004};

    ToyRun run;
    std::size_t s = 0, a = rng.index(2);
    for (std::size_t u = 0; u < updates; ++u) {
        p.lr = schedule[std::min<std::size_t>(schedule.size() - 1, u * schedule.size() / updates)];
        const ToyStep st = toy_step(s, a);
        Transition t;
        t.state = toy_state(s);
        t.action_index = a;
        t.reward = st.reward;
        t.next_state = toy_state(st.next);
        t.done = st.done;
        const std::size_t next_a = rng.index(2);
        t.next_action_index = next_a;
        if (on_policy)
            sarsa_update(net, t, p);
        else
            q_update(net, t, p);
        s = st.done ? 0 : st.next;
        a = next_a;
        ++run.updates;
    }
    for (std::size_t st = 0; st < 2; ++st)
        for (std::size_t u = 0; u < 2; ++u)
            run.learned[st][u] = net.q_value(toy_state(st), u);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

inline double toy_max_error(const ToyQ& a, const ToyQ& b) {
    double worst = 0.0;
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t u = 0; u < 2; ++u)
            worst = std::max(worst, std::abs(a[s][u] - b[s][u]));
    return worst;
}

// ---------------------------------------------------------------------------
// Central-difference audit of ValueNet::gradient.

struct GradAudit {
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::size_t kinks = 0; // weights whose +-h probe crosses a rectifier or pool switch
    double worst_rel = 0.0; // among differences above abs_floor
    double worst_abs = 0.0;
};

// Along a single weight both net kinds are piecewise linear, so away from a
// kink the forward and backward one-sided slopes agree to rounding. When they
// do not, the central difference straddles a kink and is no oracle for the
// derivative; such weights are counted in `kinks` instead of being judged.
inline GradAudit gradient_audit(ValueNet& net, const StateVector& s, std::size_t action, double h = 1e-5,
                                double rel_tol = 1e-4, double abs_floor = 1e-8, double kink_tol = 1e-6) {
    GradAudit out;
    const std::vector<double> g = net.gradient(s, action, 1.0);
    const double mid = net.q_value(s, action);
    std::span<double> w = net.params();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + h;
        const double up = net.q_value(s, action);
        w[i] = keep - h;
        const double down = net.q_value(s, action);
        w[i] = keep;
        ++out.checked;
        const double fwd = (up - mid) / h, bwd = (mid - down) / h;
        if (std::abs(fwd - bwd) > kink_tol * std::max({1.0, std::abs(fwd), std::abs(bwd)})) {
            ++out.kinks;
            continue;
        }
        const double numeric = (up - down) / (2.0 * h);
        const double diff = std::abs(numeric - g[i]);
        out.worst_abs = std::max(out.worst_abs, diff);
        if (diff <= abs_floor)
            continue;
        const double rel = diff / std::max(std::abs(numeric), std::abs(g[i]));
        out.worst_rel = std::max(out.worst_rel, rel);
        if (rel >= rel_tol)
            ++out.failed;
    }
    return out;
}

// Randomises every bias so that no unit sits exactly on a rectifier kink
// (zero padding with zero biases would put whole feature maps there).
inline void jitter_biases(ValueNet& net, Rng& rng) {
    for (const ParamBlock& b : net.blocks())
        if (b.name.find("bias") != std::string::npos)
            for (std::size_t i = 0; i < b.size(); ++i)
                net.params()[b.offset + i] = rng.uniform(0.05, 0.3);
}

inline StateVector random_state(std::size_t dim, Rng& rng) {
    StateVector s;
    for (std::size_t i = 0; i < dim; ++i)
        s.values.push_back(rng.uniform(-1.0, 1.0));
    return s;
}

} // namespace test_support
