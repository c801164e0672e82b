#ifndef UAVFL_TRAJECTORY_SCA_HPP
#define UAVFL_TRAJECTORY_SCA_HPP

#include <vector>

#include "uavfl/convex_engine.hpp"
#include "uavfl/scenario.hpp"
#include "uavfl/system_model.hpp"

namespace uavfl {

// Concave lower bound of the link rate as a function of the squared-distance
// slack, from the first-order expansion of the -log term at delta_ref.
// rate(delta) = bw * log2(1 + p_coeff / delta),
// surrogate(delta) = bw * (log2(delta + p_coeff) - log2(delta_ref)
//                          - (delta - delta_ref) / (delta_ref * ln 2)).
struct RateSurrogate {
    double bw = 0;        // allocated bandwidth, share * B
    double p_coeff = 0;   // p * rho0 / (B * sigma^2), in m^2
    double delta_ref = 0; // expansion point, H^2 + squared horizontal distance

    double exact_rate(double delta) const;
    double value(double delta) const;
    double derivative(double delta) const;
    double second_derivative(double delta) const;
};

RateSurrogate linearize_rate_lb(double delta_ref, double rb_share_total, double p_tx,
                                double ref_gain, double rb_bandwidth, double noise);

// Affine inner approximation of the minimum-speed constraint at the iterate:
// (v_min * t_fl)^2 + ||dq_ref||^2 - 2 dq_ref . (q[n] - q[n-1]) <= 0.
struct VminConstraint {
    Vec2 dq_ref;     // q_ref[n] - q_ref[n-1]
    double constant; // (v_min * t_fl)^2 + ||dq_ref||^2
    double evaluate(const Vec2& q_curr, const Vec2& q_prev) const {
        return constant - 2.0 * dq_ref.dot(q_curr - q_prev);
    }
};
VminConstraint linearize_vmin(const Vec2& q_ref_curr, const Vec2& q_ref_prev, double v_min,
                              double t_fl);

// Affine upper bound for the squared-distance slack at the iterate:
// bound(q) = H^2 + ||q_ref - s||^2 + 2 (q_ref - s) . (q - q_ref),
// a first-order underestimate of the true squared distance.
struct DistanceBound {
    Vec2 gradient;   // 2 (q_ref - s)
    Vec2 q_ref;
    double at_ref;   // H^2 + ||q_ref - s||^2
    double evaluate(const Vec2& q) const { return at_ref + gradient.dot(q - q_ref); }
};
DistanceBound linearize_distance(const Vec2& q_ref, const Vec2& device_pos,
                                 double altitude);

struct ScaIterate {
    std::vector<Vec2> traj;
    std::vector<double> delta;      // [m*n] squared-distance slack at the iterate
    std::vector<double> rate_up;    // [m*n] rate slack values
    std::vector<double> rate_down;  // [m*n]
    std::vector<double> eta;        // [n]
    std::vector<double> t_fl_frozen;  // [n] slot durations frozen at the iterate
    double objective = 0;           // true objective at this iterate
};

struct TrajectoryStepResult {
    ScaIterate iterate;
    SolveReport report;
    bool solved = false;
};

struct ScaOptions {
    int max_iterations = 30;
    double rel_tol = 1e-4;
    SolveOptions solver;
};

struct ScaResult {
    std::vector<Vec2> traj;
    std::vector<double> objectives;  // true objective after each accepted step
    int iterations = 0;
    bool converged = false;
    FeasibilityReport final_kinematics;  // audit with recomputed slot durations
    std::string message;
};

// One convexified trajectory solve around the current iterate (alpha, f, p
// fixed; slot durations frozen at the iterate).
TrajectoryStepResult solve_trajectory_step(const Scenario& sc, const AllocationState& st,
                                           const SolveOptions& opt = {});

// Full SCA chain with a monotone-acceptance guard.
ScaResult run_sca(const Scenario& sc, AllocationState& st, const ScaOptions& opt = {});

}  // namespace uavfl

#endif
