#include "fallmdp/policy_runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "fallmdp/text_util.hpp"

namespace fallmdp {

ActResult act(const MaceParameters& params, const NormalizationSpec& norm,
              const ModelParams& model, const PendulumState& s) {
    const std::vector<double> x = norm.encode_state(s, params.topology.n_pairs);
    const std::vector<double> values = forward_critics(params, x);

    int best = -1;
    for (int c = 0; c < model.n_contacts; ++c) {
        if (!model.contact_allowed(s.c1, c)) continue;
        if (best < 0 || values[static_cast<size_t>(c)] > values[static_cast<size_t>(best)])
            best = c;
    }
    if (best < 0) throw NoAllowedContact("act: no allowed successor contact");

    const std::array<double, 3> u = forward_actor(params, best, x);
    return {best, norm.decode_action(u, best)};
}

EpisodeRecord run_episode(const MaceParameters& params, const NormalizationSpec& norm,
                          const ModelParams& model, const PendulumState& s0,
                          int max_steps) {
    using clock = std::chrono::steady_clock;

    EpisodeRecord rec;
    rec.initial_state = s0;

    PendulumState s = s0;
    for (int step = 0; step < max_steps; ++step) {
        if (is_terminal(s)) {
            rec.reached_terminal = true;
            break;
        }
        const auto t0 = clock::now();
        const ActResult choice = act(params, norm, model, s);
        const auto t1 = clock::now();

        const TransitionOutcome out = transition(model, s, choice.action);
        EpisodeStep es;
        es.state = s;
        es.contact = choice.contact;
        es.action = choice.action;
        es.impulse = out.impulse;
        es.reward = out.reward;
        es.query_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        rec.steps.push_back(es);
        rec.contact_sequence.push_back(choice.contact);

        if (out.failed()) {
            rec.failed = true;
            break;
        }
        s = *out.next_state;
        if (out.terminal) {
            rec.reached_terminal = true;
            break;
        }
    }
    if (rec.steps.empty() && is_terminal(s0)) rec.reached_terminal = true;

    rec.episode_reward = 1.0;
    double total_ms = 0.0;
    for (const EpisodeStep& es : rec.steps) {
        rec.episode_reward = std::min(rec.episode_reward, es.reward);
        total_ms += es.query_ms;
    }
    rec.mean_query_ms = rec.steps.empty() ? 0.0 : total_ms / static_cast<double>(rec.steps.size());
    return rec;
}

TriangleTargets plan_triangle(double pivot_x, const PendulumState& s,
                              const AbstractAction& a) {
    const double r_hat = s.r1 + a.delta * s.r1dot_des;
    const double theta_hat = s.theta1 + a.delta * s.theta1dot;
    if (r_hat <= 0.0 || std::cos(theta_hat) <= 0.0)
        throw DegeneratePrediction("plan_triangle: predicted pendulum is degenerate");

    TriangleTargets t;
    t.v1 = {pivot_x, 0.0};
    t.v2 = {pivot_x + r_hat * std::sin(theta_hat), r_hat * std::cos(theta_hat)};
    t.v3 = {t.v2[0] + t.v2[1] * std::tan(a.theta2), 0.0};
    return t;
}

namespace {

nlohmann::ordered_json state_json(const PendulumState& s) {
    return {{"c1", s.c1},
            {"r1", s.r1},
            {"theta1", s.theta1},
            {"r1dot", s.r1dot},
            {"theta1dot", s.theta1dot}};
}

}  // namespace

std::string episode_to_json(const EpisodeRecord& rec) {
    nlohmann::ordered_json j;
    j["initial_state"] = state_json(rec.initial_state);
    j["steps"] = nlohmann::ordered_json::array();
    for (const EpisodeStep& es : rec.steps) {
        nlohmann::ordered_json step;
        step["state"] = state_json(es.state);
        step["contact"] = es.contact;
        step["action"] = {{"theta2", es.action.theta2},
                          {"delta", es.action.delta},
                          {"r1dot_des", es.action.r1dot_des},
                          {"c2", es.action.c2}};
        step["impulse"] = es.impulse;
        step["reward"] = es.reward;
        step["query_ms"] = es.query_ms;
        try {
            const TriangleTargets t = plan_triangle(0.0, es.state, es.action);
            step["triangle"] = {{"v1", t.v1}, {"v2", t.v2}, {"v3", t.v3}};
        } catch (const DegeneratePrediction&) {
            // omit the triangle for degenerate predictions
        }
        j["steps"].push_back(std::move(step));
    }
    j["episode_reward"] = rec.episode_reward;
    j["contact_sequence"] = rec.contact_sequence;
    j["mean_query_ms"] = rec.mean_query_ms;
    j["reached_terminal"] = rec.reached_terminal;
    j["failed"] = rec.failed;
    return j.dump(2);
}

std::string episode_summary_row(const EpisodeRecord& rec) {
    double max_impulse = 0.0;
    for (const EpisodeStep& es : rec.steps)
        max_impulse = std::max(max_impulse, es.impulse);

    std::string contacts;
    for (size_t i = 0; i < rec.contact_sequence.size(); ++i) {
        if (i) contacts += '-';
        contacts += std::to_string(rec.contact_sequence[i]);
    }

    const PendulumState& s = rec.initial_state;
    std::string row = std::to_string(s.c1);
    for (double v : {s.r1, s.theta1, s.r1dot, s.theta1dot})
        row += ',' + fmt_double(v);
    row += ',' + contacts;
    row += ',' + fmt_double(max_impulse);
    row += ',' + fmt_double(rec.episode_reward);
    row += ',' + fmt_double(rec.mean_query_ms);
    return row;
}

}  // namespace fallmdp
