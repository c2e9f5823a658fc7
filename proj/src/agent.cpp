#include "cascade_rl/agent.hpp"

#include "cascade_rl/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace cascade_rl {

double ActionSet::alpha(std::size_t index) {
    if (index >= kAlphas.size())
        throw ConfigError("action index " + std::to_string(index) + " out of range");
    return kAlphas[index];
}

SquareImage pad_to_square(const StateVector& state, std::size_t min_side) {
    const std::size_t dim = state.dim();
    std::size_t side = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim)));
    while (side * side < dim)
        ++side;
    while (side > 0 && (side - 1) * (side - 1) >= dim)
        --side;
    side = std::max(side, min_side);
    SquareImage img;
    img.side = side;
    img.pixels.assign(side * side, 0.0);
    std::copy(state.values.begin(), state.values.end(), img.pixels.begin());
    return img;
}

SquareImage pad_to_square(const StateVector& state) { return pad_to_square(state, 0); }

std::string_view to_string(NetKind kind) noexcept {
    switch (kind) {
    case NetKind::shallow:
        return "shallow";
    case NetKind::deep:
        return "deep";
    case NetKind::linear:
        return "linear";
    }
    return "unknown";
}

NetKind net_kind_from_string(std::string_view name) {
    if (name == "shallow")
        return NetKind::shallow;
    if (name == "deep")
        return NetKind::deep;
    if (name == "linear")
        return NetKind::linear;
    throw ConfigError("unknown network kind '" + std::string(name) + "'");
}

std::size_t ParamBlock::size() const noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ValueNet::ValueNet(NetKind kind, std::size_t input_dim, std::size_t n_actions)
    : kind_(kind), input_dim_(input_dim), n_actions_(n_actions) {
    if (input_dim == 0)
        throw ConfigError("value network needs a non-empty input");
    if (n_actions == 0)
        throw ConfigError("value network needs at least one action");

    switch (kind) {
    case NetKind::shallow:
        add_block("hidden.weight", {kShallowHidden, input_dim + 1});
        add_block("hidden.bias", {kShallowHidden});
        add_block("out.weight", {1, kShallowHidden});
        add_block("out.bias", {1});
        break;
    case NetKind::deep: {
        side_ = pad_to_square(StateVector{std::vector<double>(input_dim)}, kMinDeepSide).side;
        conv1_out_ = side_ - (kKernel - 1);
        pool1_out_ = conv1_out_ / 2;
        conv2_out_ = pool1_out_ - (kKernel - 1);
        pool2_out_ = conv2_out_ / 2;
        add_block("conv1.weight", {kConv1Channels, 1, kKernel, kKernel});
        add_block("conv1.bias", {kConv1Channels});
        add_block("conv2.weight", {kConv2Channels, kConv1Channels, kKernel, kKernel});
        add_block("conv2.bias", {kConv2Channels});
        add_block("dense.weight", {n_actions, kConv2Channels * pool2_out_ * pool2_out_});
        add_block("dense.bias", {n_actions});
        break;
    }
    case NetKind::linear:
        add_block("dense.weight", {n_actions, input_dim});
        add_block("dense.bias", {n_actions});
        break;
    }
}

std::size_t ValueNet::add_block(std::string name, std::vector<std::size_t> shape) {
    ParamBlock b{std::move(name), std::move(shape), params_.size()};
    params_.resize(params_.size() + b.size(), 0.0);
    blocks_.push_back(std::move(b));
    return blocks_.back().offset;
}

// Glorot-uniform weights, zero biases.
void ValueNet::init_uniform(Rng& rng) {
    for (const ParamBlock& b : blocks_) {
        if (b.shape.size() < 2)
            continue;
        std::size_t receptive = 1;
        for (std::size_t i = 2; i < b.shape.size(); ++i)
            receptive *= b.shape[i];
        const double fan_out = static_cast<double>(b.shape[0] * receptive);
        const double fan_in = static_cast<double>(b.shape[1] * receptive);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < b.size(); ++i)
            params_[b.offset + i] = rng.uniform(-limit, limit);
    }
}

ValueNet ValueNet::shallow(std::size_t state_dim, Rng& init) {
    ValueNet net(NetKind::shallow, state_dim, ActionSet::size());
    net.init_uniform(init);
    return net;
}

ValueNet ValueNet::deep(std::size_t state_dim, Rng& init) {
    ValueNet net(NetKind::deep, state_dim, ActionSet::size());
    net.init_uniform(init);
    return net;
}

ValueNet ValueNet::linear(std::size_t state_dim, std::size_t n_actions) {
    return ValueNet(NetKind::linear, state_dim, n_actions);
}

ValueNet ValueNet::skeleton(NetKind kind, std::size_t state_dim, std::size_t n_actions) {
    if (kind != NetKind::linear && n_actions != ActionSet::size())
        throw ConfigError("shallow and deep networks use " + std::to_string(ActionSet::size()) + " actions");
    return ValueNet(kind, state_dim, n_actions);
}

void ValueNet::check_state(const StateVector& state) const {
    if (state.dim() != input_dim_)
        throw ConfigError("state has " + std::to_string(state.dim()) + " entries, network expects " +
                          std::to_string(input_dim_));
}

struct ValueNet::DeepCache {
    std::vector<double> image;
    std::vector<double> a1;   // conv1 after rectifier, [c][y][x]
    std::vector<double> p1;   // pool1
    std::vector<std::size_t> p1_arg;
    std::vector<double> a2;
    std::vector<double> p2;   // flattened dense input
    std::vector<std::size_t> p2_arg;
    std::vector<double> q;
};

namespace {

// Valid 3x3 convolution followed by a rectifier.
void conv_relu(const double* in, std::size_t in_ch, std::size_t in_side, const double* w, const double* bias,
               std::size_t out_ch, std::size_t k, std::vector<double>& out) {
    const std::size_t os = in_side - (k - 1);
    out.assign(out_ch * os * os, 0.0);
    for (std::size_t o = 0; o < out_ch; ++o) {
        double* dst = out.data() + o * os * os;
        std::fill(dst, dst + os * os, bias[o]);
        for (std::size_t c = 0; c < in_ch; ++c) {
            const double* src = in + c * in_side * in_side;
            const double* kw = w + (o * in_ch + c) * k * k;
            for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double wv = kw[ky * k + kx];
                    for (std::size_t y = 0; y < os; ++y) {
                        const double* row = src + (y + ky) * in_side + kx;
                        double* orow = dst + y * os;
                        for (std::size_t x = 0; x < os; ++x)
                            orow[x] += wv * row[x];
                    }
                }
        }
        for (std::size_t i = 0; i < os * os; ++i)
            dst[i] = std::max(dst[i], 0.0);
    }
}

// 2x2 max pool with stride 2 (trailing row/column dropped); records argmax.
void maxpool(const std::vector<double>& in, std::size_t ch, std::size_t in_side, std::vector<double>& out,
             std::vector<std::size_t>& arg) {
    const std::size_t os = in_side / 2;
    out.assign(ch * os * os, 0.0);
    arg.assign(ch * os * os, 0);
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t y = 0; y < os; ++y)
            for (std::size_t x = 0; x < os; ++x) {
                std::size_t best = c * in_side * in_side + (2 * y) * in_side + 2 * x;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t i = c * in_side * in_side + (2 * y + dy) * in_side + 2 * x + dx;
                        if (in[i] > in[best])
                            best = i;
                    }
                const std::size_t o = c * os * os + y * os + x;
                out[o] = in[best];
                arg[o] = best;
            }
}

} // namespace

void ValueNet::deep_forward(const StateVector& state, DeepCache& cache) const {
    cache.image = pad_to_square(state, kMinDeepSide).pixels;
    const double* p = params_.data();
    const double* w1 = p + blocks_[0].offset;
    const double* b1 = p + blocks_[1].offset;
    const double* w2 = p + blocks_[2].offset;
    const double* b2 = p + blocks_[3].offset;
    const double* wd = p + blocks_[4].offset;
    const double* bd = p + blocks_[5].offset;

    conv_relu(cache.image.data(), 1, side_, w1, b1, kConv1Channels, kKernel, cache.a1);
    maxpool(cache.a1, kConv1Channels, conv1_out_, cache.p1, cache.p1_arg);
    conv_relu(cache.p1.data(), kConv1Channels, pool1_out_, w2, b2, kConv2Channels, kKernel, cache.a2);
    maxpool(cache.a2, kConv2Channels, conv2_out_, cache.p2, cache.p2_arg);

    const std::size_t flat = cache.p2.size();
    cache.q.assign(n_actions_, 0.0);
    for (std::size_t a = 0; a < n_actions_; ++a) {
        const double* row = wd + a * flat;
        double s = bd[a];
        for (std::size_t i = 0; i < flat; ++i)
            s += row[i] * cache.p2[i];
        cache.q[a] = s;
    }
}

std::vector<double> ValueNet::q_values(const StateVector& state) const {
    check_state(state);
    const double* p = params_.data();
    std::vector<double> q(n_actions_, 0.0);
    switch (kind_) {
    case NetKind::shallow: {
        const std::size_t cols = input_dim_ + 1;
        const double* w1 = p + blocks_[0].offset;
        const double* b1 = p + blocks_[1].offset;
        const double* w2 = p + blocks_[2].offset;
        const double b2 = p[blocks_[3].offset];
        // The state part of the pre-activation is shared by all actions.
        std::array<double, kShallowHidden> base{};
        for (std::size_t h = 0; h < kShallowHidden; ++h) {
            double s = b1[h];
            const double* row = w1 + h * cols;
            for (std::size_t i = 0; i < input_dim_; ++i)
                s += row[i] * state.values[i];
            base[h] = s;
        }
        for (std::size_t a = 0; a < n_actions_; ++a) {
            const double alpha = ActionSet::alpha(a);
            double s = b2;
            for (std::size_t h = 0; h < kShallowHidden; ++h)
                s += w2[h] * std::max(base[h] + w1[h * cols + input_dim_] * alpha, 0.0);
            q[a] = s;
        }
        break;
    }
    case NetKind::deep: {
        DeepCache cache;
        deep_forward(state, cache);
        q = std::move(cache.q);
        break;
    }
    case NetKind::linear: {
        const double* w = p + blocks_[0].offset;
        const double* b = p + blocks_[1].offset;
        for (std::size_t a = 0; a < n_actions_; ++a) {
            double s = b[a];
            for (std::size_t i = 0; i < input_dim_; ++i)
                s += w[a * input_dim_ + i] * state.values[i];
            q[a] = s;
        }
        break;
    }
    }
    return q;
}

double ValueNet::q_value(const StateVector& state, std::size_t action) const {
    if (action >= n_actions_)
        throw ConfigError("action index " + std::to_string(action) + " out of range");
    return q_values(state)[action];
}

double ValueNet::readout(const StateVector& state) const {
    const std::vector<double> q = q_values(state);
    return std::accumulate(q.begin(), q.end(), 0.0);
}

std::vector<double> ValueNet::gradient(const StateVector& state, std::size_t action, double td_error) const {
    check_state(state);
    if (action >= n_actions_)
        throw ConfigError("action index " + std::to_string(action) + " out of range");
    std::vector<double> g(params_.size(), 0.0);
    const double* p = params_.data();

    switch (kind_) {
    case NetKind::shallow: {
        const std::size_t cols = input_dim_ + 1;
        const double* w1 = p + blocks_[0].offset;
        const double* b1 = p + blocks_[1].offset;
        const double* w2 = p + blocks_[2].offset;
        double* gw1 = g.data() + blocks_[0].offset;
        double* gb1 = g.data() + blocks_[1].offset;
        double* gw2 = g.data() + blocks_[2].offset;
        const double alpha = ActionSet::alpha(action);
        for (std::size_t h = 0; h < kShallowHidden; ++h) {
            const double* row = w1 + h * cols;
            double z = b1[h] + row[input_dim_] * alpha;
            for (std::size_t i = 0; i < input_dim_; ++i)
                z += row[i] * state.values[i];
            gw2[h] = td_error * std::max(z, 0.0);
            if (z <= 0.0)
                continue;
            const double d = td_error * w2[h];
            gb1[h] = d;
            double* grow = gw1 + h * cols;
            for (std::size_t i = 0; i < input_dim_; ++i)
                grow[i] = d * state.values[i];
            grow[input_dim_] = d * alpha;
        }
        g[blocks_[3].offset] = td_error;
        break;
    }
    case NetKind::deep: {
        DeepCache c;
        deep_forward(state, c);
        const double* w2 = p + blocks_[2].offset;
        const double* wd = p + blocks_[4].offset;
        double* gw1 = g.data() + blocks_[0].offset;
        double* gb1 = g.data() + blocks_[1].offset;
        double* gw2 = g.data() + blocks_[2].offset;
        double* gb2 = g.data() + blocks_[3].offset;
        double* gwd = g.data() + blocks_[4].offset;
        double* gbd = g.data() + blocks_[5].offset;

        const std::size_t flat = c.p2.size();
        for (std::size_t i = 0; i < flat; ++i)
            gwd[action * flat + i] = td_error * c.p2[i];
        gbd[action] = td_error;

        // Back through pool2 and the second rectifier.
        std::vector<double> d_a2(c.a2.size(), 0.0);
        for (std::size_t i = 0; i < flat; ++i)
            if (c.p2[i] > 0.0)
                d_a2[c.p2_arg[i]] += td_error * wd[action * flat + i];

        const std::size_t k = kKernel;
        const std::size_t s2 = conv2_out_, s1p = pool1_out_;
        std::vector<double> d_p1(c.p1.size(), 0.0);
        for (std::size_t o = 0; o < kConv2Channels; ++o) {
            const double* dout = d_a2.data() + o * s2 * s2;
            double bias_sum = 0.0;
            for (std::size_t i = 0; i < s2 * s2; ++i)
                bias_sum += dout[i];
            gb2[o] = bias_sum;
            for (std::size_t ch = 0; ch < kConv1Channels; ++ch) {
                const double* src = c.p1.data() + ch * s1p * s1p;
                double* dsrc = d_p1.data() + ch * s1p * s1p;
                const std::size_t wbase = (o * kConv1Channels + ch) * k * k;
                for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const double wv = w2[wbase + ky * k + kx];
                        double acc = 0.0;
                        for (std::size_t y = 0; y < s2; ++y)
                            for (std::size_t x = 0; x < s2; ++x) {
                                const double dv = dout[y * s2 + x];
                                if (dv == 0.0)
                                    continue;
                                const std::size_t si = (y + ky) * s1p + x + kx;
                                acc += dv * src[si];
                                dsrc[si] += dv * wv;
                            }
                        gw2[wbase + ky * k + kx] = acc;
                    }
            }
        }

        // Back through pool1 and the first rectifier.
        std::vector<double> d_a1(c.a1.size(), 0.0);
        for (std::size_t i = 0; i < c.p1.size(); ++i)
            if (c.p1[i] > 0.0)
                d_a1[c.p1_arg[i]] += d_p1[i];

        const std::size_t s1 = conv1_out_;
        for (std::size_t o = 0; o < kConv1Channels; ++o) {
            const double* dout = d_a1.data() + o * s1 * s1;
            double bias_sum = 0.0;
            for (std::size_t i = 0; i < s1 * s1; ++i)
                bias_sum += dout[i];
            gb1[o] = bias_sum;
            for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                    double acc = 0.0;
                    for (std::size_t y = 0; y < s1; ++y)
                        for (std::size_t x = 0; x < s1; ++x)
                            acc += dout[y * s1 + x] * c.image[(y + ky) * side_ + x + kx];
                    gw1[o * k * k + ky * k + kx] = acc;
                }
        }
        break;
    }
    case NetKind::linear: {
        double* gw = g.data() + blocks_[0].offset;
        for (std::size_t i = 0; i < input_dim_; ++i)
            gw[action * input_dim_ + i] = td_error * state.values[i];
        g[blocks_[1].offset + action] = td_error;
        break;
    }
    }
    return g;
}

std::size_t argmax(std::span<const double> q) {
    if (q.empty())
        throw ConfigError("argmax over an empty action set");
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best])
            best = a;
    return best;
}

std::size_t epsilon_greedy(std::span<const double> q, double eps, Rng& rng) {
    if (q.empty())
        throw ConfigError("epsilon-greedy over an empty action set");
    if (rng.uniform01() < eps)
        return static_cast<std::size_t>(rng.index(q.size()));
    return argmax(q);
}

namespace {

double td_step(ValueNet& net, const Transition& t, const TdParams& params, double bootstrap) {
    const double target = params.reward_scale * t.reward + (t.done ? 0.0 : params.gamma * bootstrap);
    const double delta = target - net.q_value(t.state, t.action_index);
    if (!std::isfinite(delta))
        throw NumericalError("non-finite temporal-difference error");
    const std::vector<double> g = net.gradient(t.state, t.action_index, delta);
    std::span<double> w = net.params();
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] += params.lr * g[i];
    return delta;
}

} // namespace

double sarsa_update(ValueNet& net, const Transition& t, const TdParams& params) {
    const double next = t.done ? 0.0 : net.q_value(t.next_state, t.next_action_index);
    return td_step(net, t, params, next);
}

double q_update(ValueNet& net, const Transition& t, const TdParams& params) {
    double next = 0.0;
    if (!t.done) {
        const std::vector<double> q = net.q_values(t.next_state);
        next = *std::max_element(q.begin(), q.end());
    }
    return td_step(net, t, params, next);
}

} // namespace cascade_rl
