#include "fallmdp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fallmdp/policy_runtime.hpp"
#include "fallmdp/text_util.hpp"

namespace fallmdp {

std::mt19937_64 make_rng(uint64_t seed, uint64_t stream) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

PendulumState sample_initial_state(const ModelParams& p,
                                   const InitialStateDistribution& dist,
                                   std::mt19937_64& rng) {
    constexpr double kHalfPi = 1.5707963267948966;
    std::normal_distribution<double> gauss;
    const auto draw = [&](int i) {
        return dist.mean[static_cast<size_t>(i)] +
               dist.stddev[static_cast<size_t>(i)] * gauss(rng);
    };
    const auto draw_in = [&](int i, double lo, double hi) {
        for (int tries = 0; tries < 1000; ++tries) {
            const double v = draw(i);
            if (v >= lo && v <= hi) return v;
        }
        throw ConfigInvalid("initial-state distribution rarely lands in bounds");
    };

    PendulumState s;
    s.c1 = dist.contact;
    s.r1 = draw_in(0, p.r_bounds.lo, p.r_bounds.hi);
    s.theta1 = draw_in(1, -kHalfPi + 1e-3, kHalfPi - 1e-3);
    s.r1dot = draw_in(2, p.rdot_bounds.lo, p.rdot_bounds.hi);
    s.theta1dot = draw(3);
    return s;
}

void TrainConfig::validate() const {
    if (iterations < 0) throw ConfigInvalid("iterations must be non-negative");
    if (rollouts_per_iter < 1) throw ConfigInvalid("rollouts_per_iter must be positive");
    if (minibatch < 1) throw ConfigInvalid("minibatch must be positive");
    if (static_cast<size_t>(minibatch) > buffer_capacity)
        throw ConfigInvalid("minibatch cannot exceed buffer capacity");
    if (alpha <= 0.0) throw ConfigInvalid("alpha must be positive");
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigInvalid("gamma must be in (0, 1]");
    if (temperature <= 0.0) throw ConfigInvalid("temperature must be positive");
    if (anneal_iterations < 1) throw ConfigInvalid("anneal_iterations must be positive");
    if (buffer_capacity == 0) throw ConfigInvalid("buffer capacity must be positive");
    if (dp_seed_tuples < 0) throw ConfigInvalid("dp_seed_tuples must be non-negative");
    if (target_sync_every < 1) throw ConfigInvalid("target_sync_every must be positive");
    if (max_steps < 1) throw ConfigInvalid("max_steps must be positive");
    if (heldout_cases < 0) throw ConfigInvalid("heldout_cases must be non-negative");
    for (double s : action_noise_std)
        if (s < 0.0) throw ConfigInvalid("action noise std must be non-negative");
    for (double s : init_state.stddev)
        if (s < 0.0) throw ConfigInvalid("initial-state std must be non-negative");
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigInvalid("replay buffer capacity must be positive");
    data_.reserve(capacity);
}

void ReplayBuffer::push(const ExperienceTuple& t) {
    if (data_.size() < capacity_) {
        data_.push_back(t);
    } else {
        data_[head_] = t;
        head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
}

const ExperienceTuple& ReplayBuffer::sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<size_t> pick(0, data_.size() - 1);
    return data_[pick(rng)];
}

double temperature_at(const TrainConfig& config, int iteration) {
    if (iteration >= config.anneal_iterations) return 0.0;
    return config.temperature *
           (1.0 - static_cast<double>(iteration) / static_cast<double>(config.anneal_iterations));
}

std::vector<double> boltzmann_probs(std::span<const double> values, double T) {
    const size_t n = values.size();
    std::vector<double> p(n, 0.0);
    const size_t arg = static_cast<size_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
    if (T <= 1e-8) {
        p[arg] = 1.0;  // greedy limit, lowest index wins ties via max_element
        return p;
    }
    const double vmax = values[arg];
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        p[i] = std::exp((values[i] - vmax) / T);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

int boltzmann_select(std::span<const double> values, double T, std::mt19937_64& rng) {
    const std::vector<double> p = boltzmann_probs(values, T);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
}

double td_target(double r, bool terminal, double gamma, double max_value_next) {
    if (terminal) return r;
    return std::min(r, gamma * max_value_next);
}

std::vector<ExperienceTuple> explore_rollout(const MaceParameters& params,
                                             const NormalizationSpec& norm,
                                             const ModelParams& model,
                                             const TrainConfig& config,
                                             double T, std::mt19937_64& rng) {
    std::vector<ExperienceTuple> tuples;
    std::normal_distribution<double> gauss;

    PendulumState s = sample_initial_state(model, config.init_state, rng);
    for (int step = 0; step < config.max_steps; ++step) {
        if (is_terminal(s)) break;

        const std::vector<double> x = norm.encode_state(s, params.topology.n_pairs);
        const std::vector<double> values = forward_critics(params, x);

        // Boltzmann selection over the allowed successors, renormalized.
        std::vector<int> allowed;
        std::vector<double> masked;
        for (int c = 0; c < model.n_contacts; ++c) {
            if (!model.contact_allowed(s.c1, c)) continue;
            allowed.push_back(c);
            masked.push_back(values[static_cast<size_t>(c)]);
        }
        if (allowed.empty()) break;
        const int contact = allowed[static_cast<size_t>(boltzmann_select(masked, T, rng))];

        std::array<double, 3> u = forward_actor(params, contact, x);
        for (size_t d = 0; d < 3; ++d) {
            u[d] += config.action_noise_std[d] * gauss(rng);
            u[d] = std::clamp(u[d], -1.0, 1.0);
        }
        const AbstractAction a = norm.decode_action(u, contact);

        const TransitionOutcome out = transition(model, s, a);

        ExperienceTuple t;
        t.s = s;
        t.theta2 = a.theta2;
        t.delta = a.delta;
        t.r1dot_des = a.r1dot_des;
        t.c = contact;
        t.r = out.reward;
        if (out.failed()) {
            t.has_next = false;
            t.terminal = true;
            tuples.push_back(t);
            break;
        }
        t.s_next = *out.next_state;
        t.has_next = true;
        t.terminal = out.terminal;
        tuples.push_back(t);
        s = *out.next_state;
        if (out.terminal) break;
    }
    return tuples;
}

namespace {

double max_critic(const MaceParameters& params, const NormalizationSpec& norm,
                  const PendulumState& s) {
    const std::vector<double> x = norm.encode_state(s, params.topology.n_pairs);
    const std::vector<double> v = forward_critics(params, x);
    return *std::max_element(v.begin(), v.end());
}

}  // namespace

CriticUpdateStats critic_update(MaceParameters& params, const MaceParameters& target,
                                std::span<const ExperienceTuple> batch,
                                const TrainConfig& config,
                                const NormalizationSpec& norm) {
    std::vector<double> grad(params.values.size(), 0.0);
    double sq_err = 0.0;
    for (const ExperienceTuple& t : batch) {
        const double next_max =
            t.terminal ? 0.0 : max_critic(target, norm, t.s_next);
        const double y = td_target(t.r, t.terminal, config.gamma, next_max);
        const std::vector<double> x = norm.encode_state(t.s, params.topology.n_pairs);
        const double v = forward_critic(params, t.c, x);
        sq_err += (y - v) * (y - v);
        accumulate_critic_gradient(params, t.c, x, y, grad);
    }
    sgd_step(params, grad, config.alpha);
    return {batch.empty() ? 0.0 : sq_err / static_cast<double>(batch.size())};
}

int actor_update(MaceParameters& params, const MaceParameters& target,
                 std::span<const ExperienceTuple> batch,
                 const TrainConfig& config, const NormalizationSpec& norm) {
    std::vector<double> grad(params.values.size(), 0.0);
    int applied = 0;
    for (const ExperienceTuple& t : batch) {
        const double y = max_critic(params, norm, t.s);
        const double next_max =
            t.terminal ? 0.0 : max_critic(target, norm, t.s_next);
        const double y_prime = td_target(t.r, t.terminal, config.gamma, next_max);
        if (!(y_prime > y)) continue;

        const std::vector<double> x = norm.encode_state(t.s, params.topology.n_pairs);
        const AbstractAction a{t.theta2, t.delta, t.r1dot_des, t.c};
        const std::array<double, 3> a_enc = norm.encode_action(a);
        accumulate_actor_gradient(params, t.c, x, a_enc, grad);
        ++applied;
    }
    if (applied > 0) sgd_step(params, grad, config.alpha);
    return applied;
}

TrainResult train(const ModelParams& model, const TrainConfig& config,
                  const NetworkTopology& topology,
                  std::span<const ExperienceTuple> dp_tuples) {
    model.validate();
    config.validate();
    topology.validate();
    if (topology.n_pairs != model.n_contacts)
        throw ConfigInvalid("network n_pairs must equal model n_contacts");
    if (dp_tuples.empty())
        throw ConfigInvalid("training requires a non-empty DP tuple seed");

    const NormalizationSpec norm = NormalizationSpec::from_model(model);

    TrainResult result;
    result.params = init_params(topology, config.rng_seed);
    if (config.iterations == 0) return result;

    ReplayBuffer buffer(config.buffer_capacity);
    for (const ExperienceTuple& t : dp_tuples) buffer.push(t);

    // Fixed held-out evaluation set, drawn from its own stream.
    std::mt19937_64 heldout_rng = make_rng(config.rng_seed, 0x48454c44);  // "HELD"
    std::vector<PendulumState> heldout;
    for (int i = 0; i < config.heldout_cases; ++i)
        heldout.push_back(sample_initial_state(model, config.init_state, heldout_rng));

    const auto heldout_mean = [&](const MaceParameters& p) {
        if (heldout.empty()) return 0.0;
        double sum = 0.0;
        for (const PendulumState& s : heldout)
            sum += run_episode(p, norm, model, s, config.max_steps).episode_reward;
        return sum / static_cast<double>(heldout.size());
    };

    std::mt19937_64 rng = make_rng(config.rng_seed, 0x4d41494e);  // "MAIN"
    MaceParameters target = copy_to_target(result.params);

    for (int iter = 0; iter < config.iterations; ++iter) {
        const double T = temperature_at(config, iter);

        for (int k = 0; k < config.rollouts_per_iter; ++k) {
            const auto tuples =
                explore_rollout(result.params, norm, model, config, T, rng);
            for (const ExperienceTuple& t : tuples) buffer.push(t);
        }

        std::vector<ExperienceTuple> batch;
        batch.reserve(static_cast<size_t>(config.minibatch));
        for (int i = 0; i < config.minibatch; ++i) batch.push_back(buffer.sample(rng));
        const CriticUpdateStats stats =
            critic_update(result.params, target, batch, config, norm);

        batch.clear();
        for (int i = 0; i < config.minibatch; ++i) batch.push_back(buffer.sample(rng));
        const int applied = actor_update(result.params, target, batch, config, norm);

        if ((iter + 1) % config.target_sync_every == 0)
            target = copy_to_target(result.params);

        TrainLogRow row;
        row.iteration = iter;
        row.temperature = T;
        row.buffer_size = buffer.size();
        row.mean_heldout_reward = heldout_mean(result.params);
        row.critic_loss = stats.mean_sq_td_error;
        row.actor_updates_applied = applied;
        result.log.push_back(row);
    }
    return result;
}

void write_train_log(const std::string& path, std::span<const TrainLogRow> log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MalformedFile("cannot open for writing: " + path);
    out << "iteration,temperature,buffer_size,mean_heldout_reward,critic_loss,"
           "actor_updates_applied\n";
    for (const TrainLogRow& r : log) {
        out << r.iteration << ',' << fmt_double(r.temperature) << ',' << r.buffer_size
            << ',' << fmt_double(r.mean_heldout_reward) << ',' << fmt_double(r.critic_loss)
            << ',' << r.actor_updates_applied << '\n';
    }
}

}  // namespace fallmdp
