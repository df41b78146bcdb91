#pragma once

// Deployment-side policy: pick the allowed contact with the highest critic,
// run its actor, re-plan at every new contact. Also the triangle-target
// construction consumed by a joint-level controller.

#include <array>
#include <string>
#include <vector>

#include "fallmdp/abstract_model.hpp"
#include "fallmdp/mace_net.hpp"

namespace fallmdp {

struct ActResult {
    int contact = 0;
    AbstractAction action;
};

// Greedy critic selection over contacts allowed from s.c1 (lowest index on
// ties), then the matching actor. Throws NoAllowedContact.
ActResult act(const MaceParameters& params, const NormalizationSpec& norm,
              const ModelParams& model, const PendulumState& s);

struct EpisodeStep {
    PendulumState state;  // state the query was made from
    int contact = 0;
    AbstractAction action;
    double impulse = 0.0;
    double reward = 0.0;
    double query_ms = 0.0;
};

struct EpisodeRecord {
    PendulumState initial_state;
    std::vector<EpisodeStep> steps;
    double episode_reward = 1.0;  // min step reward; 1 for an empty episode
    std::vector<int> contact_sequence;
    double mean_query_ms = 0.0;
    bool reached_terminal = false;
    bool failed = false;
};

EpisodeRecord run_episode(const MaceParameters& params, const NormalizationSpec& norm,
                          const ModelParams& model, const PendulumState& s0,
                          int max_steps = 10);

struct TriangleTargets {
    std::array<double, 2> v1{};  // current pivot
    std::array<double, 2> v2{};  // predicted COM at the next impact
    std::array<double, 2> v3{};  // target tip of the stopper, on the ground
};

// Linear extrapolation of the pendulum over the phase, then the stopper leg.
// Throws DegeneratePrediction if the predicted length or COM height vanishes.
TriangleTargets plan_triangle(double pivot_x, const PendulumState& s,
                              const AbstractAction& a);

std::string episode_to_json(const EpisodeRecord& rec);

// Flat one-line summary: initial state, contact sequence, max impulse,
// episode reward, mean query ms.
std::string episode_summary_row(const EpisodeRecord& rec);

}  // namespace fallmdp
