#include "scenarios.hpp"

#include "cascade_rl/agent.hpp"
#include "cascade_rl/error.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>

using namespace cascade_rl;
using namespace test_support;

namespace {

StateVector sv(std::vector<double> v) { return StateVector{std::move(v)}; }

void set_block(ValueNet& net, const std::string& name, const std::vector<double>& values) {
    for (const ParamBlock& b : net.blocks())
        if (b.name == name) {
            REQUIRE(values.size() == b.size());
            std::copy(values.begin(), values.end(), net.params().begin() + static_cast<std::ptrdiff_t>(b.offset));
            return;
        }
    FAIL("no block " << name);
}

} // namespace

TEST_CASE("pad_to_square") {
    SUBCASE("753 entries") {
        const SquareImage img = pad_to_square(StateVector{std::vector<double>(753, 1.0)});
        CHECK(img.side == 28);
        CHECK(std::count(img.pixels.begin(), img.pixels.end(), 0.0) == 31);
    }
    SUBCASE("ieee118 state") {
        const SquareImage img = pad_to_square(StateVector{std::vector<double>(658, 1.0)});
        CHECK(img.side == 26);
        CHECK(std::count(img.pixels.begin(), img.pixels.end(), 0.0) == 18);
    }
    SUBCASE("perfect square, row-major") {
        const SquareImage img = pad_to_square(sv({1, 2, 3, 4}));
        CHECK(img.side == 2);
        CHECK(img.pixels == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("minimum side") {
        const SquareImage img = pad_to_square(sv({1, 2, 3, 4}), 10);
        CHECK(img.side == 10);
        CHECK(img.pixels[1] == 2.0);
        CHECK(img.pixels[4] == 0.0);
    }
}

TEST_CASE("net kinds by name") {
    CHECK(net_kind_from_string("deep") == NetKind::deep);
    CHECK(to_string(NetKind::shallow) == "shallow");
    CHECK_THROWS_AS(net_kind_from_string("cnn"), ConfigError);
}

TEST_CASE("linear net with hand weights") {
    ValueNet net = ValueNet::linear(2, 1);
    set_block(net, "dense.weight", {0.5, -2.0});
    set_block(net, "dense.bias", {0.25});
    // 0.5 * 3 - 2 * 1 + 0.25
    CHECK(net.q_value(sv({3.0, 1.0}), 0) == doctest::Approx(-0.25).epsilon(1e-15));
    const std::vector<double> g = backward(net, sv({3.0, 1.0}), 0, 2.0);
    CHECK(g == std::vector<double>{6.0, 2.0, 2.0});
    const std::vector<double> zero = backward(net, sv({3.0, 1.0}), 0, 0.0);
    CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("zero weights give zero outputs") {
    const StateVector s = sv(std::vector<double>(40, 0.7));
    for (NetKind k : {NetKind::shallow, NetKind::deep}) {
        const ValueNet net = ValueNet::skeleton(k, 40, 10);
        const std::vector<double> q = forward(net, s);
        CHECK(q.size() == 10);
        CHECK(std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; }));
    }
}

TEST_CASE("deep net on the ieee118 layout") {
    Rng rng(1);
    const ValueNet net = ValueNet::deep(658, rng);
    CHECK(net.padded_side() == 26);
    CHECK(net.n_actions() == 10);
    const std::vector<double> q = net.q_values(StateVector{std::vector<double>(658, 0.5)});
    CHECK(q.size() == 10);
    CHECK(net.readout(StateVector{std::vector<double>(658, 0.5)}) ==
          doctest::Approx(std::accumulate(q.begin(), q.end(), 0.0)));
    CHECK_THROWS_AS(net.q_values(StateVector{std::vector<double>(657, 0.5)}), ConfigError);
}

TEST_CASE("shallow net scores each alpha by appending it to the input") {
    Rng rng(2);
    ValueNet net = ValueNet::shallow(3, rng);
    const StateVector s = sv({0.1, -0.4, 0.9});
    const std::vector<double> q = net.q_values(s);
    REQUIRE(q.size() == 10);
    // Recompute by hand from the parameter blocks.
    const auto p = net.params();
    const auto& b = net.blocks();
    for (std::size_t a = 0; a < 10; ++a) {
        const std::vector<double> x{0.1, -0.4, 0.9, ActionSet::alpha(a)};
        double out = p[b[3].offset];
        for (std::size_t h = 0; h < 10; ++h) {
            double z = p[b[1].offset + h];
            for (std::size_t i = 0; i < 4; ++i)
                z += p[b[0].offset + h * 4 + i] * x[i];
            out += p[b[2].offset + h] * std::max(z, 0.0);
        }
        CHECK(q[a] == doctest::Approx(out).epsilon(1e-13));
    }
}

TEST_CASE("gradients match central differences") {
    Rng rng(12);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t dim = 30 + rng.index(100);
        ValueNet deep = ValueNet::deep(dim, rng);
        ValueNet shallow = ValueNet::shallow(dim, rng);
        jitter_biases(deep, rng);
        jitter_biases(shallow, rng);
        const StateVector s = random_state(dim, rng);
        const std::size_t a = rng.index(10);
        const GradAudit gd = gradient_audit(deep, s, a);
        const GradAudit gs = gradient_audit(shallow, s, a);
        CHECK(gd.failed == 0);
        CHECK(gs.failed == 0);
        CHECK(gd.checked == deep.params().size());
        CHECK(gd.kinks + gs.kinks <= 5);
    }
}

TEST_CASE("argmax and epsilon-greedy") {
    const std::vector<double> q{0.0, 3.0, 1.0, 3.0, 0, 0, 0, 0, 0, 0};
    CHECK(argmax(q) == 1);
    Rng rng(5);
    for (int i = 0; i < 100; ++i)
        CHECK(epsilon_greedy(q, 0.0, rng) == 1);

    const int n = 100000;
    std::vector<double> counts(10, 0.0);
    for (int i = 0; i < n; ++i)
        counts[epsilon_greedy(q, 1.0, rng)] += 1.0;
    double chi2 = 0.0;
    for (double c : counts)
        chi2 += (c - n / 10.0) * (c - n / 10.0) / (n / 10.0);
    CHECK(chi2 < 27.88); // 9 dof, p = 0.001

    int greedy = 0;
    for (int i = 0; i < n; ++i)
        greedy += epsilon_greedy(q, 0.5, rng) == 1 ? 1 : 0;
    // 0.55 expected; sd = sqrt(0.55 * 0.45 / n) ~ 0.0016.
    CHECK(std::abs(greedy / static_cast<double>(n) - 0.55) < 0.008);
}

TEST_CASE("tabular arithmetic of the update rules") {
    TdParams p;
    p.lr = 0.1;
    p.reward_scale = 1.0;
    // State [0] reaches only the bias, so the selected Q moves by lr * delta.
    const StateVector here = sv({0.0}), there = sv({1.0});

    SUBCASE("terminal SARSA step towards -1") {
        ValueNet net = ValueNet::linear(1, 2);
        Transition t{here, 0, -1.0, there, 1, true};
        set_block(net, "dense.weight", {50.0, 50.0}); // ignored because done
        sarsa_update(net, t, p);
        CHECK(net.q_value(here, 0) == doctest::Approx(-0.1).epsilon(1e-15));
    }
    SUBCASE("Q-learning bootstraps from the best next action") {
        ValueNet net = ValueNet::linear(1, 2);
        set_block(net, "dense.weight", {-1.0, 2.0});
        p.gamma = 0.7;
        Transition t{here, 0, 1.0, there, 0, false};
        q_update(net, t, p);
        CHECK(net.q_value(here, 0) == doctest::Approx(0.24).epsilon(1e-15));
    }
    SUBCASE("SARSA bootstraps from the chosen next action") {
        ValueNet net = ValueNet::linear(1, 2);
        set_block(net, "dense.weight", {-1.0, 2.0});
        p.gamma = 0.7;
        Transition t{here, 0, 1.0, there, 0, false};
        sarsa_update(net, t, p);
        CHECK(net.q_value(here, 0) == doctest::Approx(0.1 * (1.0 - 0.7)).epsilon(1e-15));
    }
    SUBCASE("zero TD error leaves the weights alone") {
        ValueNet net = ValueNet::linear(1, 2);
        set_block(net, "dense.bias", {0.3, 0.0});
        p.gamma = 0.0;
        const std::vector<double> before(net.params().begin(), net.params().end());
        Transition t{here, 0, 0.3, there, 0, false};
        CHECK(q_update(net, t, p) == 0.0);
        CHECK(std::vector<double>(net.params().begin(), net.params().end()) == before);
    }
    SUBCASE("reward scale applies to the reward only") {
        ValueNet net = ValueNet::linear(1, 2);
        p.reward_scale = 1e-3;
        Transition t{here, 1, -1000.0, there, 0, true};
        CHECK(q_update(net, t, p) == doctest::Approx(-1.0));
    }
}

TEST_CASE("a TD step moves Q(s, a) towards the target on nonlinear nets") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        ValueNet net = trial % 2 ? ValueNet::deep(60, rng) : ValueNet::shallow(60, rng);
        jitter_biases(net, rng);
        const StateVector s = random_state(60, rng);
        const std::size_t a = rng.index(10);
        TdParams p;
        p.lr = 1e-3;
        p.reward_scale = 1.0;
        const double before = net.q_value(s, a);
        Transition t{s, a, before + 1.0, s, 0, true};
        q_update(net, t, p);
        CHECK(net.q_value(s, a) > before);
    }
}

TEST_CASE("toy MDP: analytic fixed points") {
    const ToyQ star = toy_q_star(0.7);
    CHECK(star[0][1] == doctest::Approx(1.0 / 0.3));
    CHECK(star[1][0] == doctest::Approx(2.0));
    CHECK(star[1][1] == doctest::Approx(0.7 / 0.3));
    CHECK(star[0][0] == doctest::Approx(0.7 * 0.7 / 0.3));

    const ToyRun q = toy_train(false, 60000, 1);
    CHECK(toy_max_error(q.learned, star) < 1e-2);
    const ToyRun sarsa = toy_train(true, 60000, 1);
    CHECK(toy_max_error(sarsa.learned, toy_q_uniform(0.7)) < 1e-2);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(6);
    for (const ValueNet& net : {ValueNet::deep(100, rng), ValueNet::shallow(20, rng)}) {
        const std::string text = checkpoint_to_string(net);
        const ValueNet back = checkpoint_from_string(text);
        CHECK(back == net);
        CHECK(checkpoint_to_string(back) == text);
    }
    const auto path = std::filesystem::temp_directory_path() / "crl_ckpt_test.json";
    const ValueNet net = ValueNet::deep(50, rng);
    save_checkpoint(net, path.string());
    CHECK(load_checkpoint(path.string()) == net);
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
    Rng rng(6);
    std::string text = checkpoint_to_string(ValueNet::shallow(5, rng));
    CHECK_THROWS_AS(checkpoint_from_string("{}"), IoError);
    CHECK_THROWS_AS(checkpoint_from_string("not json"), IoError);
    text.replace(text.find("\"shallow\""), 9, "\"deep\"");
    CHECK_THROWS_AS(checkpoint_from_string(text), IoError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/w.json"), IoError);
}
