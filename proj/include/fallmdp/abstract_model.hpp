#pragma once

// Physics of the planar falling model: a variable-length inverted pendulum
// (pivot to COM) plus a massless stopper rod that plants the next contact.
// Each impact is perfectly plastic; the stopper tip becomes the new pivot.

#include <optional>
#include <vector>

#include "fallmdp/errors.hpp"

namespace fallmdp {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
};

std::vector<std::vector<bool>> full_adjacency(int n);

struct ModelParams {
    double mass = 1.6;        // kg
    double inertia = 0.016;   // kg m^2, about the COM
    double gravity = 9.81;    // m/s^2

    Interval r_bounds{0.10, 0.35};      // pendulum length (m)
    Interval r2_bounds{0.12, 0.34};     // stopper length (m), must nest in r_bounds
    Interval theta2_bounds{0.0, 1.0};   // stopper angle from downward vertical (rad)
    Interval delta_bounds{0.02, 0.50};  // phase duration (s)
    Interval rdot_bounds{-0.5, 0.5};    // commanded length rate (m/s)

    int n_contacts = 8;
    std::vector<std::vector<bool>> contact_adjacency = full_adjacency(8);

    double integrator_dt = 1e-3;   // s
    double failure_impulse = 10.0; // N s charged when the COM strikes the ground

    bool contact_allowed(int c1, int c2) const;
    void validate() const;  // throws ConfigInvalid
};

struct PendulumState {
    int c1 = 0;             // contact label of the current pivot
    double r1 = 0.0;        // pendulum length (m)
    double theta1 = 0.0;    // rod angle from upward vertical, + in fall direction
    double r1dot = 0.0;     // length rate (m/s)
    double theta1dot = 0.0; // angular rate (rad/s)
};

// Momentum is dissipated once the pendulum stops rotating forward.
inline bool is_terminal(const PendulumState& s) { return s.theta1dot <= 0.0; }

bool state_valid(const ModelParams& p, const PendulumState& s);

struct AbstractAction {
    double theta2 = 0.0;     // stopper angle from downward vertical (rad)
    double delta = 0.0;      // time until the next impact (s)
    double r1dot_des = 0.0;  // commanded pendulum length rate (m/s)
    int c2 = 0;              // contact label used as the stopper
};

struct ComKinematics {
    double x1 = 0.0;
    double y1 = 0.0;
    double x1dot = 0.0;
    double y1dot = 0.0;
};

ComKinematics com_kinematics(double pivot_x, const PendulumState& s);

// One RK4 step of the swing dynamics with velocity-controlled length.
// The commanded rate is clamped to rdot_bounds and zeroed when it would push
// r1 past a bound. Throws DegenerateState if r1 <= 0 on entry.
PendulumState step_swing(const ModelParams& p, const PendulumState& s,
                         double r1dot_des, double dt);

struct TracePoint {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
};

struct PhaseResult {
    bool ok = false;
    PendulumState pre_impact;
};

// Integrates the swing for a.delta seconds (whole steps of integrator_dt plus
// one fractional step). Fails if the COM reaches the ground at any sample.
// When `trace` is given, COM samples (t, x, y) in the pivot frame are appended.
PhaseResult simulate_phase(const ModelParams& p, const PendulumState& s,
                           const AbstractAction& a,
                           std::vector<TracePoint>* trace = nullptr);

struct StopperGeometry {
    double x2 = 0.0;
    double y2 = 0.0;
    double r2 = 0.0;
};

// Places the stopper tip on the ground at angle theta2 from the COM.
// Returns nothing when the required stopper length leaves r2_bounds.
std::optional<StopperGeometry> stopper_geometry(const ModelParams& p,
                                                double pivot_x,
                                                const PendulumState& s_pre,
                                                double theta2);

// Plastic normal impulse at the contact. Zero when the contact point is not
// approaching the ground (y2dot_pre >= 0).
double impact_impulse(const ModelParams& p, double x1, double x2,
                      double y2dot_pre);

struct ImpactResult {
    PendulumState next;
    double impulse = 0.0;
    double new_pivot_x = 0.0;
    double omega_post = 0.0;  // diagnostic, not part of the next state
};

// Resolves the impact: impulse on the COM, then a fresh pendulum anchored at
// the stopper tip with the post-impulse COM velocity projected onto it.
std::optional<ImpactResult> resolve_impact(const ModelParams& p, double pivot_x,
                                           const PendulumState& s_pre,
                                           double theta2, int c2);

enum class FailureReason {
    none,
    ground_strike,       // COM reached the ground during the swing
    infeasible_stopper,  // required stopper length outside r2_bounds
};

struct TransitionOutcome {
    std::optional<PendulumState> next_state;  // empty on failure
    double impulse = 0.0;
    double reward = 0.0;
    bool terminal = false;
    FailureReason failure = FailureReason::none;
    std::vector<TracePoint> trace;

    bool failed() const { return failure != FailureReason::none; }
};

// Full impact-to-impact transition: swing, stopper placement, impact.
// reward = 1/(1+j) on success; failures score reward 0 and are charged the
// configured failure impulse. Throws ActionOutOfBounds / DisallowedContact.
TransitionOutcome transition(const ModelParams& p, const PendulumState& s,
                             const AbstractAction& a, bool record_trace = false);

}  // namespace fallmdp
