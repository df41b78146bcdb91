#pragma once

// Mixture-of-actor-critic network: n critic heads that share their first
// hidden layer, and n independent actor subnets, all over one input encoding
// (one-hot contact label + 4 normalized pendulum coordinates). Forward passes
// and gradients are explicit loops over a single flat parameter array.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fallmdp/abstract_model.hpp"

namespace fallmdp {

struct NetworkTopology {
    int n_pairs = 8;
    int critic_shared = 32;  // width of the hidden layer shared by all critics
    int critic_hidden = 32;  // width of each critic's private hidden layer
    int actor_hidden = 128;  // width of each actor hidden layer
    int actor_layers = 3;

    static constexpr int state_dims = 4;
    static constexpr int action_dims = 3;

    int input_dim() const { return n_pairs + state_dims; }
    void validate() const;  // throws ConfigInvalid

    bool operator==(const NetworkTopology&) const = default;
};

enum class Subnet { critic_shared, critic_head, actor };

struct ParamBlock {
    Subnet subnet = Subnet::critic_shared;
    int pair = -1;    // -1 for the shared layer
    int layer = 0;    // layer index within the subnet
    bool bias = false;
    size_t offset = 0;
    int rows = 0;     // output dimension
    int cols = 0;     // input dimension (1 for bias blocks)

    size_t size() const { return static_cast<size_t>(rows) * static_cast<size_t>(cols); }
};

struct MaceLayout {
    explicit MaceLayout(const NetworkTopology& topo);

    const ParamBlock& block(Subnet subnet, int pair, int layer, bool bias) const;

    NetworkTopology topology;
    std::vector<ParamBlock> blocks;
    size_t total_params = 0;
};

struct MaceParameters {
    NetworkTopology topology;
    std::vector<double> values;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
MaceParameters init_params(const NetworkTopology& topo, uint64_t seed);

std::vector<double> forward_critics(const MaceParameters& params,
                                    std::span<const double> s_encoded);
double forward_critic(const MaceParameters& params, int pair,
                      std::span<const double> s_encoded);
std::array<double, 3> forward_actor(const MaceParameters& params, int pair,
                                    std::span<const double> s_encoded);

// Gradient of 1/2 (target - V_pair(s))^2, added into grad (full layout size).
void accumulate_critic_gradient(const MaceParameters& params, int pair,
                                std::span<const double> s_encoded, double target,
                                std::span<double> grad);
std::vector<double> critic_gradient(const MaceParameters& params, int pair,
                                    std::span<const double> s_encoded, double target);

// Gradient of 1/2 |a_target - Pi_pair(s)|^2 (encoded space), added into grad.
void accumulate_actor_gradient(const MaceParameters& params, int pair,
                               std::span<const double> s_encoded,
                               std::span<const double> a_target_encoded,
                               std::span<double> grad);
std::vector<double> actor_gradient(const MaceParameters& params, int pair,
                                   std::span<const double> s_encoded,
                                   std::span<const double> a_target_encoded);

void sgd_step(MaceParameters& params, std::span<const double> grad, double alpha);

// Independent snapshot for TD targets; plain value copy.
inline MaceParameters copy_to_target(const MaceParameters& params) { return params; }

// Weights file: JSON {version, topology{...}, params[...]} with round-trip
// exact doubles. Throws MalformedFile / TopologyMismatch.
void save_params(const MaceParameters& params, const std::string& path);
MaceParameters load_params(const std::string& path);
MaceParameters load_params(const std::string& path, const NetworkTopology& expected);

struct AffineMap {
    double lo = -1.0;
    double hi = 1.0;

    double encode(double x) const { return 2.0 * (x - lo) / (hi - lo) - 1.0; }
    double decode(double u) const { return lo + 0.5 * (u + 1.0) * (hi - lo); }
};

// Invertible affine maps between physical ranges and [-1, 1].
struct NormalizationSpec {
    std::array<AffineMap, 4> state;   // r1, theta1, r1dot, theta1dot
    std::array<AffineMap, 3> action;  // theta2, delta, r1dot_des

    static NormalizationSpec from_model(const ModelParams& p);

    // One-hot contact label followed by the 4 encoded state coordinates.
    std::vector<double> encode_state(const PendulumState& s, int n_pairs) const;
    std::array<double, 3> encode_action(const AbstractAction& a) const;
    AbstractAction decode_action(std::span<const double> u, int c2) const;
};

}  // namespace fallmdp
