#ifndef UAVFL_AO_HPP
#define UAVFL_AO_HPP

#include <string>
#include <vector>

#include "uavfl/rb_allocation.hpp"
#include "uavfl/resource_allocation.hpp"
#include "uavfl/scenario.hpp"
#include "uavfl/system_model.hpp"
#include "uavfl/trajectory_sca.hpp"

namespace uavfl {

// Which blocks the outer loop optimizes; baselines pin subsets.
struct StagePins {
    bool pin_rb = false;          // keep the initial RB allocation
    bool pin_trajectory = false;  // keep the initial trajectory
    bool pin_device_power_freq = false;  // device f/p stay at their pins
    // Post-relaxation thresholding instead of keeping fractional shares.
    bool threshold_rb = false;
    double threshold = 0.5;
    // Whole-RB counts per (device, slot) installed before the loop starts;
    // used with pin_rb for the equal-split benchmark. Empty keeps the
    // fractional equal split.
    std::vector<int> pinned_rb_counts;
};

struct AoOptions {
    double eps_rel = 1e-3;  // relative objective-change stopping threshold
    int max_outer = 30;
    int chi = 10;           // sub-RB split for the final reconstruction
    ScaOptions sca;
    SolveOptions rb_solver;
    PowerFreqOptions power;
};

struct AoIterationRow {
    int iteration = 0;
    double objective_after_rb = 0;
    double objective_after_trajectory = 0;
    double objective_after_power = 0;
    double wall_seconds = 0;
};

struct AoTrace {
    std::vector<AoIterationRow> rows;
    std::vector<double> objectives;  // Phi after each outer iteration (index 0 = init)
};

struct AoResult {
    AllocationState relaxed_state;   // fractional RB shares at convergence
    AllocationState final_state;     // binary-reconstructed and repaired
    double relaxed_objective = 0;    // lower bound reported alongside
    double final_objective = 0;
    AoTrace trace;
    int outer_iterations = 0;
    bool converged = false;
    RbSolution rb_solution;          // last relaxed solve + reconstruction
    FeasibilityReport energy_audit;
    FeasibilityReport kinematics_audit;  // frozen slot-duration convention
    std::vector<double> frozen_t_fl;     // durations the audit used
    std::string failure_stage;           // empty when everything succeeded
};

// Feasible-by-construction starting point: equal RB split, maximum
// frequencies, half-maximum powers, straight-line trajectory.
AllocationState initial_allocation(const Scenario& sc);

// Algorithm-1 outer loop: RB allocation, then trajectory, then power and
// frequency, repeated until the objective stabilizes.
AoResult run_ao(const Scenario& sc, const AoOptions& opt = {}, const StagePins& pins = {});

// Documented operation-count formula for the three-stage loop; reporting
// only, never used at runtime.
double complexity_estimate(int devices, int rbs, int slots, int outer_iterations,
                           double eps_accuracy = 1e-3);

}  // namespace uavfl

#endif
