#include "fallmdp/abstract_model.hpp"

#include <cassert>
#include <cmath>

namespace fallmdp {

namespace {

constexpr double kHalfPi = 1.5707963267948966;

void require(bool ok, const char* msg) {
    if (!ok) throw ConfigInvalid(msg);
}

}  // namespace

std::vector<std::vector<bool>> full_adjacency(int n) {
    return std::vector<std::vector<bool>>(n, std::vector<bool>(n, true));
}

bool ModelParams::contact_allowed(int c1, int c2) const {
    if (c1 < 0 || c1 >= n_contacts || c2 < 0 || c2 >= n_contacts) return false;
    return contact_adjacency[static_cast<size_t>(c1)][static_cast<size_t>(c2)];
}

void ModelParams::validate() const {
    require(mass > 0.0, "mass must be positive");
    require(inertia > 0.0, "inertia must be positive");
    require(gravity > 0.0, "gravity must be positive");
    for (const Interval* b : {&r_bounds, &r2_bounds, &theta2_bounds, &delta_bounds, &rdot_bounds})
        require(b->lo < b->hi, "interval bounds must satisfy lo < hi");
    require(r_bounds.lo >= 0.0, "r_min must be non-negative");
    require(std::abs(theta2_bounds.lo) < kHalfPi && std::abs(theta2_bounds.hi) < kHalfPi,
            "theta2 bounds must lie strictly inside (-pi/2, pi/2)");
    // r1' = r2 after an impact, so stopper lengths must be admissible pendulum lengths.
    require(r2_bounds.lo >= r_bounds.lo && r2_bounds.hi <= r_bounds.hi,
            "r2_bounds must be contained in r_bounds");
    require(delta_bounds.lo > 0.0, "delta_min must be positive");
    require(n_contacts >= 1, "n_contacts must be at least 1");
    require(contact_adjacency.size() == static_cast<size_t>(n_contacts),
            "contact_adjacency must be n_contacts x n_contacts");
    for (const auto& row : contact_adjacency) {
        require(row.size() == static_cast<size_t>(n_contacts),
                "contact_adjacency must be n_contacts x n_contacts");
        bool any = false;
        for (bool b : row) any = any || b;
        require(any, "every contact needs at least one allowed successor");
    }
    require(integrator_dt > 0.0, "integrator_dt must be positive");
    require(failure_impulse >= 0.0, "failure_impulse must be non-negative");
}

bool state_valid(const ModelParams& p, const PendulumState& s) {
    if (s.c1 < 0 || s.c1 >= p.n_contacts) return false;
    if (!p.r_bounds.contains(s.r1)) return false;
    return s.r1 * std::cos(s.theta1) > 0.0;
}

ComKinematics com_kinematics(double pivot_x, const PendulumState& s) {
    const double sin1 = std::sin(s.theta1);
    const double cos1 = std::cos(s.theta1);
    ComKinematics k;
    k.x1 = pivot_x + s.r1 * sin1;
    k.y1 = s.r1 * cos1;
    k.x1dot = s.r1dot * sin1 + s.r1 * s.theta1dot * cos1;
    k.y1dot = s.r1dot * cos1 - s.r1 * s.theta1dot * sin1;
    return k;
}

PendulumState step_swing(const ModelParams& p, const PendulumState& s,
                         double r1dot_des, double dt) {
    assert(dt > 0.0);
    if (s.r1 <= 0.0) throw DegenerateState("step_swing: pendulum length <= 0");

    double rdot = p.rdot_bounds.clamp(r1dot_des);
    if ((s.r1 >= p.r_bounds.hi && rdot > 0.0) ||
        (s.r1 <= p.r_bounds.lo && rdot < 0.0))
        rdot = 0.0;

    const auto accel = [&](double th, double om, double r) {
        return (p.gravity * std::sin(th) - 2.0 * rdot * om) / r;
    };

    const double th = s.theta1;
    const double om = s.theta1dot;
    const double r = s.r1;
    const double h = dt;

    const double k1th = om;
    const double k1om = accel(th, om, r);
    const double k2th = om + 0.5 * h * k1om;
    const double k2om = accel(th + 0.5 * h * k1th, om + 0.5 * h * k1om, r + 0.5 * h * rdot);
    const double k3th = om + 0.5 * h * k2om;
    const double k3om = accel(th + 0.5 * h * k2th, om + 0.5 * h * k2om, r + 0.5 * h * rdot);
    const double k4th = om + h * k3om;
    const double k4om = accel(th + h * k3th, om + h * k3om, r + h * rdot);

    PendulumState out = s;
    out.theta1 = th + h / 6.0 * (k1th + 2.0 * k2th + 2.0 * k3th + k4th);
    out.theta1dot = om + h / 6.0 * (k1om + 2.0 * k2om + 2.0 * k3om + k4om);
    out.r1 = p.r_bounds.clamp(r + h * rdot);
    out.r1dot = rdot;
    return out;
}

PhaseResult simulate_phase(const ModelParams& p, const PendulumState& s,
                           const AbstractAction& a,
                           std::vector<TracePoint>* trace) {
    const auto com_ok = [](const PendulumState& st) {
        return st.r1 * std::cos(st.theta1) > 0.0;
    };
    const auto sample = [&](double t, const PendulumState& st) {
        if (trace) {
            const auto k = com_kinematics(0.0, st);
            trace->push_back({t, k.x1, k.y1});
        }
    };

    PhaseResult res;
    if (!com_ok(s)) return res;
    sample(0.0, s);

    const double dt = p.integrator_dt;
    const auto n_full = static_cast<long>(std::floor(a.delta / dt + 1e-9));
    const double remainder = a.delta - static_cast<double>(n_full) * dt;

    PendulumState cur = s;
    double t = 0.0;
    for (long i = 0; i < n_full; ++i) {
        cur = step_swing(p, cur, a.r1dot_des, dt);
        t += dt;
        sample(t, cur);
        if (!com_ok(cur)) return res;
    }
    if (remainder > 1e-12) {
        cur = step_swing(p, cur, a.r1dot_des, remainder);
        t += remainder;
        sample(t, cur);
        if (!com_ok(cur)) return res;
    }

    res.ok = true;
    res.pre_impact = cur;
    return res;
}

std::optional<StopperGeometry> stopper_geometry(const ModelParams& p,
                                                double pivot_x,
                                                const PendulumState& s_pre,
                                                double theta2) {
    const auto k = com_kinematics(pivot_x, s_pre);
    assert(k.y1 > 0.0);
    StopperGeometry g;
    g.y2 = 0.0;
    g.x2 = k.x1 + k.y1 * std::tan(theta2);
    g.r2 = k.y1 / std::cos(theta2);
    if (!p.r2_bounds.contains(g.r2)) return std::nullopt;
    return g;
}

double impact_impulse(const ModelParams& p, double x1, double x2,
                      double y2dot_pre) {
    if (y2dot_pre >= 0.0) return 0.0;
    const double dx = x2 - x1;
    return -y2dot_pre / (1.0 / p.mass + dx * dx / p.inertia);
}

std::optional<ImpactResult> resolve_impact(const ModelParams& p, double pivot_x,
                                           const PendulumState& s_pre,
                                           double theta2, int c2) {
    const auto geom = stopper_geometry(p, pivot_x, s_pre, theta2);
    if (!geom) return std::nullopt;

    const auto k = com_kinematics(pivot_x, s_pre);
    const double dx = geom->x2 - k.x1;
    const double omega = s_pre.theta1dot;
    const double y2dot_pre = k.y1dot + omega * dx;

    ImpactResult res;
    res.impulse = impact_impulse(p, k.x1, geom->x2, y2dot_pre);
    res.omega_post = omega + res.impulse * dx / p.inertia;
    res.new_pivot_x = geom->x2;

    const double vx = k.x1dot;
    const double vy = k.y1dot + res.impulse / p.mass;

    PendulumState next;
    next.c1 = c2;
    next.r1 = geom->r2;
    next.theta1 = -theta2;
    const double sin_n = std::sin(next.theta1);
    const double cos_n = std::cos(next.theta1);
    next.r1dot = vx * sin_n + vy * cos_n;
    next.theta1dot = (vx * cos_n - vy * sin_n) / next.r1;
    res.next = next;
    return res;
}

TransitionOutcome transition(const ModelParams& p, const PendulumState& s,
                             const AbstractAction& a, bool record_trace) {
    if (!p.theta2_bounds.contains(a.theta2) ||
        !p.delta_bounds.contains(a.delta) ||
        !p.rdot_bounds.contains(a.r1dot_des))
        throw ActionOutOfBounds("transition: continuous action outside bounds");
    if (!p.contact_allowed(s.c1, a.c2))
        throw DisallowedContact("transition: contact change not allowed");

    TransitionOutcome out;
    std::vector<TracePoint>* trace = record_trace ? &out.trace : nullptr;

    const PhaseResult phase = simulate_phase(p, s, a, trace);
    if (!phase.ok) {
        out.failure = FailureReason::ground_strike;
        out.impulse = p.failure_impulse;
        out.reward = 0.0;
        out.terminal = true;
        return out;
    }

    const auto impact = resolve_impact(p, 0.0, phase.pre_impact, a.theta2, a.c2);
    if (!impact) {
        out.failure = FailureReason::infeasible_stopper;
        out.impulse = p.failure_impulse;
        out.reward = 0.0;
        out.terminal = true;
        return out;
    }

    out.next_state = impact->next;
    out.impulse = impact->impulse;
    out.reward = 1.0 / (1.0 + impact->impulse);
    out.terminal = is_terminal(impact->next);
    return out;
}

}  // namespace fallmdp
