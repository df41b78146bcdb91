#pragma once

// Training loop for the mixture of actor-critic: replay buffer seeded from DP
// tuples, Boltzmann exploration over the critics, CACLA-style actor updates
// gated on positive temporal difference, hard target-network syncs.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "fallmdp/dp_solver.hpp"
#include "fallmdp/mace_net.hpp"

namespace fallmdp {

std::mt19937_64 make_rng(uint64_t seed, uint64_t stream);

struct InitialStateDistribution {
    // Diagonal Gaussian over (r1, theta1, r1dot, theta1dot), fixed contact.
    std::array<double, 4> mean{0.25, 0.15, 0.0, 2.0};
    std::array<double, 4> stddev{0.05, 0.10, 0.05, 0.8};
    int contact = 0;
};

// Rejection-samples (r1, theta1, r1dot) into physical bounds; theta1dot is
// taken as drawn (a negative draw is a terminal start).
PendulumState sample_initial_state(const ModelParams& p,
                                   const InitialStateDistribution& dist,
                                   std::mt19937_64& rng);

struct TrainConfig {
    int iterations = 1000;
    int rollouts_per_iter = 10;  // K
    int minibatch = 32;          // m
    double alpha = 1e-4;
    double gamma = 0.9;
    double temperature = 5.0;    // T0
    int anneal_iterations = 250; // linear decay of T to 0, greedy afterwards
    std::array<double, 3> action_noise_std{0.1, 0.1, 0.1};  // encoded units
    size_t buffer_capacity = 50000;
    int dp_seed_tuples = 5000;
    int target_sync_every = 10;
    InitialStateDistribution init_state;
    int max_steps = 10;          // impacts per rollout / episode
    int heldout_cases = 10;
    uint64_t rng_seed = 0;

    void validate() const;  // throws ConfigInvalid
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity);

    void push(const ExperienceTuple& t);  // FIFO eviction at capacity
    const ExperienceTuple& sample(std::mt19937_64& rng) const;

    size_t size() const { return data_.size(); }
    size_t capacity() const { return capacity_; }
    uint64_t total_inserted() const { return inserted_; }

private:
    size_t capacity_;
    size_t head_ = 0;  // slot the next insert overwrites once full
    uint64_t inserted_ = 0;
    std::vector<ExperienceTuple> data_;
};

double temperature_at(const TrainConfig& config, int iteration);

// Softmax over values/T with max-subtraction; T below 1e-8 is greedy argmax.
std::vector<double> boltzmann_probs(std::span<const double> values, double T);
int boltzmann_select(std::span<const double> values, double T, std::mt19937_64& rng);

// TD target of Eq. 5: r for terminal tuples, min(r, gamma * max_value_next)
// otherwise. max_value_next comes from the target critics at s'.
double td_target(double r, bool terminal, double gamma, double max_value_next);

std::vector<ExperienceTuple> explore_rollout(const MaceParameters& params,
                                             const NormalizationSpec& norm,
                                             const ModelParams& model,
                                             const TrainConfig& config,
                                             double T, std::mt19937_64& rng);

struct CriticUpdateStats {
    double mean_sq_td_error = 0.0;  // before the step
};

CriticUpdateStats critic_update(MaceParameters& params, const MaceParameters& target,
                                std::span<const ExperienceTuple> batch,
                                const TrainConfig& config,
                                const NormalizationSpec& norm);

// Returns the number of tuples that passed the positive-TD gate.
int actor_update(MaceParameters& params, const MaceParameters& target,
                 std::span<const ExperienceTuple> batch,
                 const TrainConfig& config, const NormalizationSpec& norm);

struct TrainLogRow {
    int iteration = 0;
    double temperature = 0.0;
    size_t buffer_size = 0;
    double mean_heldout_reward = 0.0;
    double critic_loss = 0.0;
    int actor_updates_applied = 0;
};

struct TrainResult {
    MaceParameters params;
    std::vector<TrainLogRow> log;
};

// Algorithm-1 driver. Deterministic for fixed (config, topology, dp_tuples).
// Throws ConfigInvalid on a bad config or an empty DP seed set.
TrainResult train(const ModelParams& model, const TrainConfig& config,
                  const NetworkTopology& topology,
                  std::span<const ExperienceTuple> dp_tuples);

void write_train_log(const std::string& path, std::span<const TrainLogRow> log);

}  // namespace fallmdp
