#include "fallmdp/mace_net.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace fallmdp {

void NetworkTopology::validate() const {
    if (n_pairs < 2) throw ConfigInvalid("n_pairs must be at least 2");
    if (critic_shared < 1 || critic_hidden < 1 || actor_hidden < 1 || actor_layers < 1)
        throw ConfigInvalid("layer sizes must be positive");
}

MaceLayout::MaceLayout(const NetworkTopology& topo) : topology(topo) {
    topo.validate();
    size_t offset = 0;
    const auto add = [&](Subnet subnet, int pair, int layer, bool bias, int rows, int cols) {
        blocks.push_back({subnet, pair, layer, bias, offset, rows, cols});
        offset += blocks.back().size();
    };

    add(Subnet::critic_shared, -1, 0, false, topo.critic_shared, topo.input_dim());
    add(Subnet::critic_shared, -1, 0, true, topo.critic_shared, 1);
    for (int i = 0; i < topo.n_pairs; ++i) {
        add(Subnet::critic_head, i, 0, false, topo.critic_hidden, topo.critic_shared);
        add(Subnet::critic_head, i, 0, true, topo.critic_hidden, 1);
        add(Subnet::critic_head, i, 1, false, 1, topo.critic_hidden);
        add(Subnet::critic_head, i, 1, true, 1, 1);
    }
    for (int i = 0; i < topo.n_pairs; ++i) {
        for (int l = 0; l < topo.actor_layers; ++l) {
            const int in = l == 0 ? topo.input_dim() : topo.actor_hidden;
            add(Subnet::actor, i, l, false, topo.actor_hidden, in);
            add(Subnet::actor, i, l, true, topo.actor_hidden, 1);
        }
        add(Subnet::actor, i, topo.actor_layers, false,
            NetworkTopology::action_dims, topo.actor_hidden);
        add(Subnet::actor, i, topo.actor_layers, true, NetworkTopology::action_dims, 1);
    }
    total_params = offset;
}

const ParamBlock& MaceLayout::block(Subnet subnet, int pair, int layer, bool bias) const {
    for (const ParamBlock& b : blocks)
        if (b.subnet == subnet && b.pair == pair && b.layer == layer && b.bias == bias)
            return b;
    throw ConfigInvalid("no such parameter block");
}

MaceParameters init_params(const NetworkTopology& topo, uint64_t seed) {
    const MaceLayout layout(topo);
    MaceParameters p;
    p.topology = topo;
    p.values.assign(layout.total_params, 0.0);

    std::mt19937_64 rng(seed);
    for (const ParamBlock& b : layout.blocks) {
        if (b.bias) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (size_t i = 0; i < b.size(); ++i) p.values[b.offset + i] = dist(rng);
    }
    return p;
}

namespace {

// Offsets are recomputed inline; they follow the MaceLayout block order.
struct Offsets {
    explicit Offsets(const NetworkTopology& t) : topo(t) {
        shared_w = 0;
        shared_b = shared_w + static_cast<size_t>(t.critic_shared) * static_cast<size_t>(t.input_dim());
        head_base = shared_b + static_cast<size_t>(t.critic_shared);
        head_stride = static_cast<size_t>(t.critic_hidden) * static_cast<size_t>(t.critic_shared) +
                      static_cast<size_t>(t.critic_hidden) +
                      static_cast<size_t>(t.critic_hidden) + 1;
        actor_base = head_base + static_cast<size_t>(t.n_pairs) * head_stride;
        actor_stride = 0;
        for (int l = 0; l < t.actor_layers; ++l) {
            const int in = l == 0 ? t.input_dim() : t.actor_hidden;
            actor_stride += static_cast<size_t>(t.actor_hidden) * static_cast<size_t>(in) +
                            static_cast<size_t>(t.actor_hidden);
        }
        actor_stride += static_cast<size_t>(NetworkTopology::action_dims) *
                            static_cast<size_t>(t.actor_hidden) +
                        static_cast<size_t>(NetworkTopology::action_dims);
    }

    size_t head(int pair) const { return head_base + static_cast<size_t>(pair) * head_stride; }
    size_t actor(int pair) const { return actor_base + static_cast<size_t>(pair) * actor_stride; }

    NetworkTopology topo;
    size_t shared_w, shared_b, head_base, head_stride, actor_base, actor_stride;
};

void dense_tanh(std::span<const double> w, std::span<const double> b,
                std::span<const double> x, std::span<double> out) {
    const size_t rows = out.size();
    const size_t cols = x.size();
    for (size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = std::tanh(acc);
    }
}

// Shared critic layer activation, used by every critic evaluation.
std::vector<double> shared_layer(const MaceParameters& p, const Offsets& off,
                                 std::span<const double> x) {
    std::vector<double> h0(static_cast<size_t>(p.topology.critic_shared));
    dense_tanh({p.values.data() + off.shared_w, h0.size() * x.size()},
               {p.values.data() + off.shared_b, h0.size()}, x, h0);
    return h0;
}

double head_value(const MaceParameters& p, const Offsets& off, int pair,
                  std::span<const double> h0, std::vector<double>* h1_out) {
    const auto t = p.topology;
    const size_t nh = static_cast<size_t>(t.critic_hidden);
    const size_t ns = static_cast<size_t>(t.critic_shared);
    const double* base = p.values.data() + off.head(pair);
    const double* w1 = base;
    const double* b1 = w1 + nh * ns;
    const double* w2 = b1 + nh;
    const double* b2 = w2 + nh;

    std::vector<double> h1(nh);
    dense_tanh({w1, nh * ns}, {b1, nh}, h0, h1);
    double v = *b2;
    for (size_t k = 0; k < nh; ++k) v += w2[k] * h1[k];
    if (h1_out) *h1_out = std::move(h1);
    return v;
}

}  // namespace

std::vector<double> forward_critics(const MaceParameters& params,
                                    std::span<const double> s_encoded) {
    const Offsets off(params.topology);
    assert(s_encoded.size() == static_cast<size_t>(params.topology.input_dim()));
    const std::vector<double> h0 = shared_layer(params, off, s_encoded);
    std::vector<double> values(static_cast<size_t>(params.topology.n_pairs));
    for (int i = 0; i < params.topology.n_pairs; ++i)
        values[static_cast<size_t>(i)] = head_value(params, off, i, h0, nullptr);
    return values;
}

double forward_critic(const MaceParameters& params, int pair,
                      std::span<const double> s_encoded) {
    const Offsets off(params.topology);
    const std::vector<double> h0 = shared_layer(params, off, s_encoded);
    return head_value(params, off, pair, h0, nullptr);
}

std::array<double, 3> forward_actor(const MaceParameters& params, int pair,
                                    std::span<const double> s_encoded) {
    const auto t = params.topology;
    const Offsets off(t);
    assert(pair >= 0 && pair < t.n_pairs);
    const size_t na = static_cast<size_t>(t.actor_hidden);

    const double* ptr = params.values.data() + off.actor(pair);
    std::vector<double> cur(s_encoded.begin(), s_encoded.end());
    for (int l = 0; l < t.actor_layers; ++l) {
        std::vector<double> next(na);
        dense_tanh({ptr, na * cur.size()}, {ptr + na * cur.size(), na}, cur, next);
        ptr += na * cur.size() + na;
        cur = std::move(next);
    }
    std::array<double, 3> out{};
    dense_tanh({ptr, 3 * na}, {ptr + 3 * na, 3}, cur, out);
    return out;
}

void accumulate_critic_gradient(const MaceParameters& params, int pair,
                                std::span<const double> s_encoded, double target,
                                std::span<double> grad) {
    const auto t = params.topology;
    const Offsets off(t);
    assert(grad.size() == params.values.size());
    const size_t ns = static_cast<size_t>(t.critic_shared);
    const size_t nh = static_cast<size_t>(t.critic_hidden);
    const size_t in = s_encoded.size();

    const std::vector<double> h0 = shared_layer(params, off, s_encoded);
    std::vector<double> h1;
    const double v = head_value(params, off, pair, h0, &h1);

    const double dv = v - target;  // d(1/2 (y - v)^2)/dv

    const double* base = params.values.data() + off.head(pair);
    const double* w1 = base;
    const double* w2 = base + nh * ns + nh;
    double* g_base = grad.data() + off.head(pair);
    double* g_w1 = g_base;
    double* g_b1 = g_base + nh * ns;
    double* g_w2 = g_b1 + nh;
    double* g_b2 = g_w2 + nh;

    // Output layer.
    for (size_t k = 0; k < nh; ++k) g_w2[k] += dv * h1[k];
    *g_b2 += dv;

    // Private hidden layer.
    std::vector<double> dh1(nh);
    for (size_t j = 0; j < nh; ++j)
        dh1[j] = dv * w2[j] * (1.0 - h1[j] * h1[j]);
    std::vector<double> dh0(ns, 0.0);
    for (size_t j = 0; j < nh; ++j) {
        const double dj = dh1[j];
        double* grow = g_w1 + j * ns;
        const double* wrow = w1 + j * ns;
        for (size_t k = 0; k < ns; ++k) {
            grow[k] += dj * h0[k];
            dh0[k] += dj * wrow[k];
        }
        g_b1[j] += dj;
    }

    // Shared layer.
    double* g_sw = grad.data() + off.shared_w;
    double* g_sb = grad.data() + off.shared_b;
    for (size_t k = 0; k < ns; ++k) {
        const double dk = dh0[k] * (1.0 - h0[k] * h0[k]);
        double* grow = g_sw + k * in;
        for (size_t l = 0; l < in; ++l) grow[l] += dk * s_encoded[l];
        g_sb[k] += dk;
    }
}

std::vector<double> critic_gradient(const MaceParameters& params, int pair,
                                    std::span<const double> s_encoded, double target) {
    std::vector<double> grad(params.values.size(), 0.0);
    accumulate_critic_gradient(params, pair, s_encoded, target, grad);
    return grad;
}

void accumulate_actor_gradient(const MaceParameters& params, int pair,
                               std::span<const double> s_encoded,
                               std::span<const double> a_target_encoded,
                               std::span<double> grad) {
    const auto t = params.topology;
    const Offsets off(t);
    assert(grad.size() == params.values.size());
    assert(a_target_encoded.size() == 3);
    const size_t na = static_cast<size_t>(t.actor_hidden);

    // Forward pass, keeping every activation.
    std::vector<std::vector<double>> acts;
    acts.emplace_back(s_encoded.begin(), s_encoded.end());
    const double* base = params.values.data() + off.actor(pair);
    const double* ptr = base;
    std::vector<size_t> layer_off;  // offset of each layer's weights from base
    for (int l = 0; l < t.actor_layers; ++l) {
        const size_t in = acts.back().size();
        layer_off.push_back(static_cast<size_t>(ptr - base));
        std::vector<double> next(na);
        dense_tanh({ptr, na * in}, {ptr + na * in, na}, acts.back(), next);
        ptr += na * in + na;
        acts.push_back(std::move(next));
    }
    layer_off.push_back(static_cast<size_t>(ptr - base));
    std::array<double, 3> out{};
    dense_tanh({ptr, 3 * na}, {ptr + 3 * na, 3}, acts.back(), out);

    double* g_base = grad.data() + off.actor(pair);

    // Output layer: loss 1/2 |a - u|^2, u = tanh(z).
    std::vector<double> delta(3);
    for (size_t tdx = 0; tdx < 3; ++tdx)
        delta[tdx] = (out[tdx] - a_target_encoded[tdx]) * (1.0 - out[tdx] * out[tdx]);

    for (int l = t.actor_layers; l >= 0; --l) {
        const std::vector<double>& input = acts[static_cast<size_t>(l)];
        const size_t rows = delta.size();
        const size_t cols = input.size();
        const double* w = base + layer_off[static_cast<size_t>(l)];
        double* g_w = g_base + layer_off[static_cast<size_t>(l)];
        double* g_b = g_w + rows * cols;

        std::vector<double> dinput(cols, 0.0);
        for (size_t r = 0; r < rows; ++r) {
            const double dr = delta[r];
            double* grow = g_w + r * cols;
            const double* wrow = w + r * cols;
            for (size_t c = 0; c < cols; ++c) {
                grow[c] += dr * input[c];
                dinput[c] += dr * wrow[c];
            }
            g_b[r] += dr;
        }
        if (l == 0) break;
        for (size_t c = 0; c < cols; ++c)
            dinput[c] *= 1.0 - input[c] * input[c];
        delta = std::move(dinput);
    }
}

std::vector<double> actor_gradient(const MaceParameters& params, int pair,
                                   std::span<const double> s_encoded,
                                   std::span<const double> a_target_encoded) {
    std::vector<double> grad(params.values.size(), 0.0);
    accumulate_actor_gradient(params, pair, s_encoded, a_target_encoded, grad);
    return grad;
}

void sgd_step(MaceParameters& params, std::span<const double> grad, double alpha) {
    assert(grad.size() == params.values.size());
    for (size_t i = 0; i < grad.size(); ++i) params.values[i] -= alpha * grad[i];
}

void save_params(const MaceParameters& params, const std::string& path) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["topology"] = {{"n_pairs", params.topology.n_pairs},
                     {"critic_shared", params.topology.critic_shared},
                     {"critic_hidden", params.topology.critic_hidden},
                     {"actor_hidden", params.topology.actor_hidden},
                     {"actor_layers", params.topology.actor_layers}};
    j["params"] = params.values;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MalformedFile("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

MaceParameters load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedFile("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile("bad weights file " + path + ": " + e.what());
    }
    MaceParameters p;
    try {
        if (j.at("version").get<int>() != 1)
            throw MalformedFile("unsupported weights file version in " + path);
        const auto& t = j.at("topology");
        p.topology.n_pairs = t.at("n_pairs").get<int>();
        p.topology.critic_shared = t.at("critic_shared").get<int>();
        p.topology.critic_hidden = t.at("critic_hidden").get<int>();
        p.topology.actor_hidden = t.at("actor_hidden").get<int>();
        p.topology.actor_layers = t.at("actor_layers").get<int>();
        p.values = j.at("params").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile("bad weights file " + path + ": " + e.what());
    }
    p.topology.validate();
    const MaceLayout layout(p.topology);
    if (p.values.size() != layout.total_params)
        throw MalformedFile("weights file " + path + " has " +
                            std::to_string(p.values.size()) + " params, expected " +
                            std::to_string(layout.total_params));
    return p;
}

MaceParameters load_params(const std::string& path, const NetworkTopology& expected) {
    MaceParameters p = load_params(path);
    if (!(p.topology == expected))
        throw TopologyMismatch("weights file " + path +
                               " does not match the expected topology");
    return p;
}

NormalizationSpec NormalizationSpec::from_model(const ModelParams& p) {
    constexpr double kHalfPi = 1.5707963267948966;
    NormalizationSpec n;
    n.state[0] = {p.r_bounds.lo, p.r_bounds.hi};
    n.state[1] = {-kHalfPi, kHalfPi};
    n.state[2] = {p.rdot_bounds.lo, p.rdot_bounds.hi};
    // Angular-rate scale from the pendulum's natural frequency at minimum length.
    n.state[3] = {0.0, 3.0 * std::sqrt(p.gravity / p.r_bounds.lo)};
    n.action[0] = {p.theta2_bounds.lo, p.theta2_bounds.hi};
    n.action[1] = {p.delta_bounds.lo, p.delta_bounds.hi};
    n.action[2] = {p.rdot_bounds.lo, p.rdot_bounds.hi};
    return n;
}

std::vector<double> NormalizationSpec::encode_state(const PendulumState& s,
                                                    int n_pairs) const {
    assert(s.c1 >= 0 && s.c1 < n_pairs);
    std::vector<double> x(static_cast<size_t>(n_pairs) + 4, 0.0);
    x[static_cast<size_t>(s.c1)] = 1.0;
    x[static_cast<size_t>(n_pairs) + 0] = state[0].encode(s.r1);
    x[static_cast<size_t>(n_pairs) + 1] = state[1].encode(s.theta1);
    x[static_cast<size_t>(n_pairs) + 2] = state[2].encode(s.r1dot);
    x[static_cast<size_t>(n_pairs) + 3] = state[3].encode(s.theta1dot);
    return x;
}

std::array<double, 3> NormalizationSpec::encode_action(const AbstractAction& a) const {
    return {action[0].encode(a.theta2), action[1].encode(a.delta),
            action[2].encode(a.r1dot_des)};
}

AbstractAction NormalizationSpec::decode_action(std::span<const double> u, int c2) const {
    assert(u.size() == 3);
    AbstractAction a;
    // Clamp against 1-ulp drift so decoded actions never trip the bounds check.
    a.theta2 = std::clamp(action[0].decode(u[0]), action[0].lo, action[0].hi);
    a.delta = std::clamp(action[1].decode(u[1]), action[1].lo, action[1].hi);
    a.r1dot_des = std::clamp(action[2].decode(u[2]), action[2].lo, action[2].hi);
    a.c2 = c2;
    return a;
}

}  // namespace fallmdp
