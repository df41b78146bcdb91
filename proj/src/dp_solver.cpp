#include "fallmdp/dp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fallmdp/text_util.hpp"

namespace fallmdp {

void DiscretizationSpec::validate() const {
    if (n_theta2 < 1 || n_delta < 1 || n_rdot < 1)
        throw ConfigInvalid("grid counts must be at least 1");
    for (double w : state_quant)
        if (w <= 0.0) throw ConfigInvalid("quantization widths must be positive");
    if (max_depth < 1) throw ConfigInvalid("max_depth must be at least 1");
}

StateKey quantize_state(const PendulumState& s, const DiscretizationSpec& spec) {
    StateKey key;
    key.c1 = s.c1;
    const std::array<double, 4> v{s.r1, s.theta1, s.r1dot, s.theta1dot};
    for (int i = 0; i < 4; ++i)
        key.q[static_cast<size_t>(i)] =
            std::llround(v[static_cast<size_t>(i)] / spec.state_quant[static_cast<size_t>(i)]);
    return key;
}

std::vector<double> uniform_grid(const Interval& bounds, int n) {
    std::vector<double> g;
    g.reserve(static_cast<size_t>(n));
    if (n == 1) {
        g.push_back(bounds.mid());
        return g;
    }
    const double step = bounds.width() / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i)
        g.push_back(bounds.lo + static_cast<double>(i) * step);
    g.back() = bounds.hi;
    return g;
}

size_t DpSolver::CacheKeyHash::operator()(const CacheKey& k) const {
    // FNV-1a over the key words.
    uint64_t h = 1469598103934665603ull;
    const auto mix = [&h](uint64_t x) {
        h ^= x;
        h *= 1099511628211ull;
    };
    mix(static_cast<uint64_t>(k.sk.c1));
    for (int64_t q : k.sk.q) mix(static_cast<uint64_t>(q));
    mix(static_cast<uint64_t>(k.remaining));
    return static_cast<size_t>(h);
}

DpSolver::DpSolver(ModelParams params, DiscretizationSpec spec)
    : params_(std::move(params)), spec_(spec) {
    params_.validate();
    spec_.validate();
    theta2_grid_ = uniform_grid(params_.theta2_bounds, spec_.n_theta2);
    delta_grid_ = uniform_grid(params_.delta_bounds, spec_.n_delta);
    rdot_grid_ = uniform_grid(params_.rdot_bounds, spec_.n_rdot);
}

std::optional<double> DpSolver::cache_lookup(const CacheKey& key) const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const auto it = cache_.find(key);
    if (it == cache_.end()) return std::nullopt;
    return it->second;
}

void DpSolver::cache_store(const CacheKey& key, double value) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    cache_.emplace(key, value);
}

double DpSolver::search(const PendulumState& s, int depth, Best* best_out) {
    double best_value = 0.0;
    bool any_feasible = false;

    AbstractAction a;
    for (double theta2 : theta2_grid_) {
        a.theta2 = theta2;
        for (double delta : delta_grid_) {
            a.delta = delta;
            for (double rdot : rdot_grid_) {
                a.r1dot_des = rdot;
                for (int c2 = 0; c2 < params_.n_contacts; ++c2) {
                    if (!params_.contact_allowed(s.c1, c2)) continue;
                    a.c2 = c2;
                    const TransitionOutcome out = transition(params_, s, a);
                    if (out.failed()) continue;
                    const double future =
                        out.terminal ? 1.0 : solve_value(*out.next_state, depth + 1);
                    const double v = std::min(out.reward, future);
                    if (!any_feasible || v > best_value) {
                        best_value = v;
                        if (best_out) {
                            best_out->action = a;
                            best_out->value = v;
                        }
                    }
                    any_feasible = true;
                }
            }
        }
    }
    if (!any_feasible && best_out) best_out->value = -1.0;  // sentinel: nothing feasible
    return any_feasible ? best_value : 0.0;
}

double DpSolver::solve_value(const PendulumState& s, int depth) {
    if (is_terminal(s)) return 1.0;
    if (depth >= spec_.max_depth) return 0.0;

    const CacheKey key{quantize_state(s, spec_), spec_.max_depth - depth};
    if (const auto hit = cache_lookup(key)) return *hit;

    const double value = search(s, depth, nullptr);
    cache_store(key, value);
    return value;
}

std::optional<DpSolver::Best> DpSolver::best_action(const PendulumState& s, int depth) {
    Best best;
    best.value = -1.0;
    search(s, depth, &best);
    if (best.value < 0.0) return std::nullopt;
    // Keep the cache warm for subsequent calls at this state.
    const CacheKey key{quantize_state(s, spec_), spec_.max_depth - depth};
    cache_store(key, best.value);
    return best;
}

DpPlan DpSolver::extract_rollout(const PendulumState& s0) {
    DpPlan plan;
    plan.states.push_back(s0);

    PendulumState s = s0;
    for (int depth = 0; depth < spec_.max_depth; ++depth) {
        if (is_terminal(s)) {
            plan.reached_terminal = true;
            break;
        }
        const auto best = best_action(s, depth);
        if (!best) break;
        const TransitionOutcome out = transition(params_, s, best->action);
        plan.actions.push_back(best->action);
        plan.impulses.push_back(out.impulse);
        plan.rewards.push_back(out.reward);
        if (out.failed()) break;
        s = *out.next_state;
        plan.states.push_back(s);
        if (out.terminal) {
            plan.reached_terminal = true;
            break;
        }
    }
    if (is_terminal(s) && plan.actions.empty()) plan.reached_terminal = true;

    if (!plan.reached_terminal) {
        plan.value = 0.0;  // budget exhausted or no feasible action: pessimistic
    } else if (plan.rewards.empty()) {
        plan.value = 1.0;
    } else {
        plan.value = *std::min_element(plan.rewards.begin(), plan.rewards.end());
    }
    return plan;
}

std::vector<ExperienceTuple> DpSolver::generate_tuples(
    std::span<const PendulumState> initial_states) {
    std::vector<ExperienceTuple> tuples;
    for (const PendulumState& s0 : initial_states) {
        const DpPlan plan = extract_rollout(s0);
        for (size_t k = 0; k < plan.actions.size(); ++k) {
            ExperienceTuple t;
            t.s = plan.states[k];
            t.theta2 = plan.actions[k].theta2;
            t.delta = plan.actions[k].delta;
            t.r1dot_des = plan.actions[k].r1dot_des;
            t.c = plan.actions[k].c2;
            t.r = plan.rewards[k];
            t.has_next = k + 1 < plan.states.size();
            if (t.has_next) {
                t.s_next = plan.states[k + 1];
                t.terminal = is_terminal(t.s_next);
            } else {
                t.s_next = PendulumState{};
                t.terminal = true;
            }
            tuples.push_back(t);
        }
    }
    return tuples;
}

void DpSolver::clear_cache() {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    cache_.clear();
}

size_t DpSolver::cache_size() const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    return cache_.size();
}

namespace {

constexpr char kTupleHeader[] =
    "c1,r1,theta1,r1dot,theta1dot,theta2,delta,r1dot_des,c2,r,terminal,"
    "c1',r1',theta1',r1dot',theta1dot'";

}  // namespace

void write_tuples(const std::string& path, std::span<const ExperienceTuple> tuples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MalformedFile("cannot open for writing: " + path);
    out << kTupleHeader << '\n';
    for (const ExperienceTuple& t : tuples) {
        out << t.s.c1 << ',' << fmt_double(t.s.r1) << ',' << fmt_double(t.s.theta1)
            << ',' << fmt_double(t.s.r1dot) << ',' << fmt_double(t.s.theta1dot)
            << ',' << fmt_double(t.theta2) << ',' << fmt_double(t.delta)
            << ',' << fmt_double(t.r1dot_des) << ',' << t.c << ',' << fmt_double(t.r)
            << ',' << (t.terminal ? 1 : 0);
        const PendulumState n = t.has_next ? t.s_next : PendulumState{};
        out << ',' << n.c1 << ',' << fmt_double(n.r1) << ',' << fmt_double(n.theta1)
            << ',' << fmt_double(n.r1dot) << ',' << fmt_double(n.theta1dot) << '\n';
    }
}

std::vector<ExperienceTuple> read_tuples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedFile("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw MalformedFile("empty tuple file: " + path);
    if (line != kTupleHeader)
        throw MalformedFile("unexpected tuple header in " + path);

    std::vector<ExperienceTuple> tuples;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tok = split(line, ',');
        if (tok.size() != 16)
            throw MalformedFile("tuple row needs 16 columns, got " +
                                std::to_string(tok.size()));
        ExperienceTuple t;
        t.s.c1 = static_cast<int>(parse_long(tok[0]));
        t.s.r1 = parse_double(tok[1]);
        t.s.theta1 = parse_double(tok[2]);
        t.s.r1dot = parse_double(tok[3]);
        t.s.theta1dot = parse_double(tok[4]);
        t.theta2 = parse_double(tok[5]);
        t.delta = parse_double(tok[6]);
        t.r1dot_des = parse_double(tok[7]);
        t.c = static_cast<int>(parse_long(tok[8]));
        t.r = parse_double(tok[9]);
        t.terminal = parse_long(tok[10]) != 0;
        t.s_next.c1 = static_cast<int>(parse_long(tok[11]));
        t.s_next.r1 = parse_double(tok[12]);
        t.s_next.theta1 = parse_double(tok[13]);
        t.s_next.r1dot = parse_double(tok[14]);
        t.s_next.theta1dot = parse_double(tok[15]);
        t.has_next = true;
        tuples.push_back(t);
    }
    return tuples;
}

namespace {

nlohmann::ordered_json plan_json(const DpPlan& plan) {
    nlohmann::ordered_json j;
    j["actions"] = nlohmann::ordered_json::array();
    for (const AbstractAction& a : plan.actions)
        j["actions"].push_back({{"theta2", a.theta2},
                                {"delta", a.delta},
                                {"r1dot_des", a.r1dot_des},
                                {"c2", a.c2}});
    j["impulses"] = plan.impulses;
    j["rewards"] = plan.rewards;
    j["value"] = plan.value;
    j["reached_terminal"] = plan.reached_terminal;
    j["states"] = nlohmann::ordered_json::array();
    for (const PendulumState& s : plan.states)
        j["states"].push_back({{"c1", s.c1},
                               {"r1", s.r1},
                               {"theta1", s.theta1},
                               {"r1dot", s.r1dot},
                               {"theta1dot", s.theta1dot}});
    return j;
}

}  // namespace

std::string plan_to_json(const DpPlan& plan) { return plan_json(plan).dump(2); }

std::string plans_to_json(std::span<const DpPlan> plans) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const DpPlan& p : plans) arr.push_back(plan_json(p));
    return arr.dump(2);
}

}  // namespace fallmdp
