#include "support.hpp"

#include "cascade_rl/cascade.hpp"
#include "cascade_rl/error.hpp"
#include "cascade_rl/power_flow.hpp"

#include <doctest.h>

using namespace cascade_rl;
using namespace test_support;

namespace {

Network two_bus(double x, double r = 0.0, double b = 0.0) {
    Network net;
    net.buses = {{1, BusKind::slack, 1.0, 1.0, 0.0}, {2, BusKind::pq, 1.0, 1.0, 0.0}};
    net.branches = {{1, 2, r, x, b, 5.0, true}};
    net.generators = {{1, 0.0, 5.0, -5.0, 5.0, 1.0, true}};
    net.loads = {{2, 1.0, 0.0, 100.0, true}};
    validate_network(net);
    return net;
}

Network triangle() {
    Network net;
    net.buses = {{1, BusKind::pq, 1, 1, 0}, {2, BusKind::pq, 1, 1, 0}, {3, BusKind::slack, 1, 1, 0}};
    net.branches = {{1, 2, 0, 0.1, 0, 1, true}, {1, 3, 0, 0.1, 0, 1, true}, {3, 2, 0, 0.1, 0, 1, true}};
    validate_network(net);
    return net;
}

DispatchResult full_service(const Network& net, std::vector<double> p_gen) {
    DispatchResult d;
    d.feasible = true;
    d.p_gen = std::move(p_gen);
    for (const Load& l : net.loads)
        d.p_load_served.push_back(l.in_service ? l.p_demand : 0.0);
    return d;
}

// Upper root of V^4 - V^2 + (P x)^2 = 0 by a fine scan followed by bisection.
double receiving_voltage_oracle(double p, double x) {
    auto f = [&](double v) { return v * v * (1.0 - v * v) - (p * x) * (p * x); };
    double lo = std::sqrt(0.5), hi = 1.0;
    for (int i = 0; i < 10000; ++i) {
        const double a = hi - (hi - lo) * (i + 1) / 10000.0;
        if (f(a) > 0.0) {
            lo = a;
            break;
        }
    }
    double a = lo, b = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        (f(m) > 0.0 ? a : b) = m;
    }
    return 0.5 * (a + b);
}

} // namespace

TEST_CASE("ybus entries for a single lossless line") {
    const ComplexMatrix y = build_ybus(two_bus(0.1));
    CHECK(y(0, 1).real() == doctest::Approx(0.0));
    CHECK(y(0, 1).imag() == doctest::Approx(10.0));
    CHECK(y(0, 0).imag() == doctest::Approx(-10.0));
    CHECK(y(1, 1).imag() == doctest::Approx(-10.0));
}

TEST_CASE("ybus ignores out-of-service branches and doubles for parallel lines") {
    Network net = two_bus(0.1);
    net.branches.push_back(net.branches[0]);
    const ComplexMatrix both = build_ybus(net);
    CHECK(both(0, 1).imag() == doctest::Approx(20.0));
    net.branches[1].in_service = false;
    const ComplexMatrix one = build_ybus(net);
    CHECK(one(0, 1).imag() == doctest::Approx(10.0));
}

TEST_CASE("ybus row sums equal charging shunts") {
    const ComplexMatrix y = build_ybus(two_bus(0.1, 0.02, 0.3));
    CHECK(std::abs((y(0, 0) + y(0, 1)).imag() - 0.15) < 1e-12);
    CHECK(std::abs((y(0, 0) + y(0, 1)).real()) < 1e-12);
}

TEST_CASE("dc power flow") {
    SUBCASE("zero injections give zero angles and flows") {
        const DcFlowResult r = dc_power_flow(triangle(), {{0.0, 0.0, 0.0}});
        for (double t : r.theta)
            CHECK(t == 0.0);
        for (double f : r.flow)
            CHECK(f == 0.0);
    }
    SUBCASE("triangle splits two thirds and one third") {
        const Network net = triangle();
        const std::vector<double> inj{1.0, -1.0, 0.0};
        const DcFlowResult r = dc_power_flow(net, {inj});
        std::vector<double> oracle;
        REQUIRE(oracle_dc_flow(net, inj, oracle));
        CHECK(r.flow[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(r.flow[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(r.flow[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(std::abs(r.flow[k] - oracle[k]) < 1e-12);
        CHECK(r.theta[2] == 0.0);
    }
    SUBCASE("doubling the injections doubles every flow") {
        const Network net = triangle();
        const DcFlowResult a = dc_power_flow(net, {{0.3, -0.8, 0.5}});
        const DcFlowResult b = dc_power_flow(net, {{0.6, -1.6, 1.0}});
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(std::abs(b.flow[k] - 2.0 * a.flow[k]) < 1e-12);
    }
    SUBCASE("disconnected network is refused") {
        Network net = triangle();
        net.branches[0].in_service = false;
        net.branches[1].in_service = false;
        CHECK_THROWS_AS(dc_power_flow(net, {{0.0, 0.0, 0.0}}), NumericalError);
    }
    SUBCASE("random networks agree with a direct solve") {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            const Network net = random_small_network(rng, 8, 12);
            std::vector<double> inj(net.buses.size());
            double sum = 0.0;
            for (std::size_t i = 1; i < inj.size(); ++i) {
                inj[i] = rng.uniform(-1.0, 1.0);
                sum += inj[i];
            }
            inj[0] = -sum;
            const DcFlowResult r = dc_power_flow(net, {inj});
            std::vector<double> oracle;
            REQUIRE(oracle_dc_flow(net, inj, oracle));
            for (std::size_t k = 0; k < oracle.size(); ++k)
                CHECK(std::abs(r.flow[k] - oracle[k]) < 1e-9);
        }
    }
}

TEST_CASE("ac power flow: unloaded network is already solved") {
    Network net = two_bus(0.1);
    net.loads[0].in_service = false;
    const PfSolution s = ac_power_flow(net, full_service(net, {0.0}));
    CHECK(s.converged);
    CHECK(s.iterations == 0);
    CHECK(s.v[1] == doctest::Approx(1.0));
    CHECK(s.theta[1] == doctest::Approx(0.0));
}

TEST_CASE("ac power flow: two-bus receiving voltage matches the transfer equation") {
    const Network net = two_bus(0.1);
    const PfSolution s = ac_power_flow(net, full_service(net, {1.0}));
    REQUIRE(s.converged);
    const double v = receiving_voltage_oracle(1.0, 0.1);
    CHECK(std::abs(v * v * v * v - v * v + 0.01) < 1e-12);
    CHECK(std::abs(s.v[1] - v) < 1e-6);
    CHECK(s.max_mismatch < 1e-6);
    CHECK(s.theta[0] == 0.0);
    CHECK(s.loading[0] == doctest::Approx(std::abs(s.flow_from[0]) / 5.0));
}

TEST_CASE("ac power flow: transfer beyond the nose point diverges without throwing") {
    Network net = two_bus(0.1);
    net.loads[0].p_demand = 6.0;
    net.generators[0].p_max = 10.0;
    const PfSolution s = ac_power_flow(net, full_service(net, {6.0}));
    CHECK_FALSE(s.converged);
}

TEST_CASE("ac power flow on intact ieee118") {
    const Network net = load_case_file(ieee118_path());
    const DispatchResult d = island_dcopf(net, 1.0);
    REQUIRE(d.feasible);
    const PfSolution s = ac_power_flow(net, d);
    REQUIRE(s.converged);
    CHECK(s.iterations <= 10);
    CHECK(s.max_mismatch < 1e-6);
    CHECK(s.theta[net.slack_pos()] == 0.0);

    // Specified injections rebuilt by hand; buses with a generator are
    // checked for P only (their Q is either free or pinned at a limit).
    const std::size_t n = net.buses.size();
    std::vector<double> p(n, 0.0), q(n, 0.0);
    std::vector<bool> q_free(n, false);
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        p[net.bus_pos(net.generators[k].bus)] += d.p_gen[k];
        q_free[net.bus_pos(net.generators[k].bus)] = true;
    }
    for (std::size_t k = 0; k < net.loads.size(); ++k) {
        p[net.bus_pos(net.loads[k].bus)] -= d.p_load_served[k];
        q[net.bus_pos(net.loads[k].bus)] -= net.loads[k].q_demand;
    }
    CHECK(oracle_ac_mismatch(net, s.v, s.theta, p, q, q_free) < 1e-6);

    for (std::size_t i = 0; i < n; ++i)
        if (net.buses[i].kind != BusKind::pq && !s.q_clamped[i])
            CHECK(s.v[i] == doctest::Approx(net.buses[i].v_set).epsilon(1e-12));
    for (std::size_t k = 0; k < net.branches.size(); ++k)
        CHECK(s.loading[k] == doctest::Approx(std::abs(s.flow_from[k]) / net.branches[k].rate).epsilon(1e-12));
}

TEST_CASE("loading field is consistent on random networks") {
    Rng rng(31);
    int converged = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Network net = random_small_network(rng, 6, 8);
        for (Branch& br : net.branches)
            br.r = 0.1 * br.x;
        std::vector<double> pg(net.generators.size(), 0.0);
        double demand = 0.0;
        for (const Load& l : net.loads)
            demand += l.p_demand;
        pg[0] = demand;
        const PfSolution s = ac_power_flow(net, full_service(net, pg));
        if (!s.converged)
            continue;
        ++converged;
        for (std::size_t k = 0; k < net.branches.size(); ++k)
            CHECK(s.loading[k] == doctest::Approx(std::abs(s.flow_from[k]) / net.branches[k].rate).epsilon(1e-12));
    }
    CHECK(converged > 20);
}
