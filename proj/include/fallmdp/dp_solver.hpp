#pragma once

// Memoized min-max dynamic programming over a discretized action grid.
// Values are kept in reward form: V(s) = max_a min(r(s,a), V(s')), discount 1,
// which ranks plans identically to minimizing the maximum impulse.

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fallmdp/abstract_model.hpp"

namespace fallmdp {

struct DiscretizationSpec {
    int n_theta2 = 5;
    int n_delta = 5;
    int n_rdot = 3;
    // Quantization widths for (r1, theta1, r1dot, theta1dot) cache keys.
    std::array<double, 4> state_quant{0.01, 0.02, 0.05, 0.10};
    int max_depth = 10;

    void validate() const;  // throws ConfigInvalid
};

struct StateKey {
    int c1 = 0;
    std::array<int64_t, 4> q{};

    bool operator==(const StateKey&) const = default;
};

StateKey quantize_state(const PendulumState& s, const DiscretizationSpec& spec);

struct DpPlan {
    std::vector<AbstractAction> actions;
    std::vector<double> impulses;
    std::vector<double> rewards;
    double value = 0.0;
    // Diagnostics: visited states (s0 first) and whether momentum dissipated.
    std::vector<PendulumState> states;
    bool reached_terminal = false;
};

struct ExperienceTuple {
    PendulumState s;
    double theta2 = 0.0;
    double delta = 0.0;
    double r1dot_des = 0.0;
    int c = 0;  // chosen next contact
    PendulumState s_next;   // zeros when has_next is false
    bool has_next = false;
    double r = 0.0;
    bool terminal = false;
};

// Grid points over [lo, hi]: endpoints inclusive, uniformly spaced;
// a single-point grid uses the midpoint.
std::vector<double> uniform_grid(const Interval& bounds, int n);

class DpSolver {
public:
    DpSolver(ModelParams params, DiscretizationSpec spec);

    // Value of s with `depth` impacts already taken. 1 at terminal states,
    // 0 when the impact budget is exhausted or no grid action is feasible.
    double solve_value(const PendulumState& s, int depth = 0);

    struct Best {
        AbstractAction action;
        double value = 0.0;
    };

    // Argmax grid action; ties go to the lexicographically first grid index
    // (theta2, delta, r1dot, c2). Empty when every grid action fails.
    std::optional<Best> best_action(const PendulumState& s, int depth = 0);

    // Greedy descent through best_action until terminal, failure, or budget.
    DpPlan extract_rollout(const PendulumState& s0);

    std::vector<ExperienceTuple> generate_tuples(
        std::span<const PendulumState> initial_states);

    void clear_cache();
    size_t cache_size() const;

    const ModelParams& params() const { return params_; }
    const DiscretizationSpec& spec() const { return spec_; }
    const std::vector<double>& theta2_grid() const { return theta2_grid_; }
    const std::vector<double>& delta_grid() const { return delta_grid_; }
    const std::vector<double>& rdot_grid() const { return rdot_grid_; }

private:
    struct CacheKey {
        StateKey sk;
        int remaining = 0;

        bool operator==(const CacheKey&) const = default;
    };
    struct CacheKeyHash {
        size_t operator()(const CacheKey& k) const;
    };

    double search(const PendulumState& s, int depth, Best* best_out);
    std::optional<double> cache_lookup(const CacheKey& key) const;
    void cache_store(const CacheKey& key, double value);

    ModelParams params_;
    DiscretizationSpec spec_;
    std::vector<double> theta2_grid_;
    std::vector<double> delta_grid_;
    std::vector<double> rdot_grid_;

    mutable std::mutex cache_mutex_;
    std::unordered_map<CacheKey, double, CacheKeyHash> cache_;
};

// Tuple file: one line per tuple, comma-separated, header row, doubles with
// 17 significant digits so a round trip through text is exact.
void write_tuples(const std::string& path, std::span<const ExperienceTuple> tuples);
std::vector<ExperienceTuple> read_tuples(const std::string& path);  // throws MalformedFile

std::string plan_to_json(const DpPlan& plan);
std::string plans_to_json(std::span<const DpPlan> plans);

}  // namespace fallmdp
