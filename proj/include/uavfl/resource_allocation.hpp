#ifndef UAVFL_RESOURCE_ALLOCATION_HPP
#define UAVFL_RESOURCE_ALLOCATION_HPP

#include <vector>

#include "uavfl/convex_engine.hpp"
#include "uavfl/scenario.hpp"
#include "uavfl/system_model.hpp"

namespace uavfl {

// Inverse spectral efficiency of a link: gamma = 1 / log2(1 + p g / (B s2)).
double gamma_from_power(double p_tx, double gain, double rb_bandwidth, double noise);

// Inverse map: p = (B s2 / g) (2^(1/gamma) - 1).
double power_from_gamma(double gamma, double gain, double rb_bandwidth, double noise);

// Epigraph residual gamma 2^(1/gamma) - (xi + gamma); feasible iff <= 0.
double xi_epigraph_residual(double gamma, double xi);

// Numeric witness that g(x) = a x / log2(1 + b x) is not convex, along with
// the sign of the auxiliary function from its second-derivative expansion.
struct NonconvexityReport {
    std::vector<double> sample_x;
    std::vector<double> second_derivative;  // central differences of g
    double min_g_tilde = 0;                 // over a log grid; >= 0 expected
    bool confirms_nonconvexity = false;     // some d2 < 0 and g_tilde >= 0
};
NonconvexityReport verify_nonconvexity_g(double a = 1.0, double b = 1.0);

struct PowerFreqSolution {
    std::vector<double> f_dev;       // [m*n]
    std::vector<double> f_uav;      // [n]
    std::vector<double> gamma_up;   // [m*n]
    std::vector<double> gamma_down; // [m*n]
    std::vector<double> xi_up;      // [m*n], tight epigraph values
    std::vector<double> xi_down;    // [m*n]
    std::vector<double> p_dev;      // [m*n] recovered
    std::vector<double> p_uav;      // [m*n] recovered
    std::vector<double> eta;        // [n]
    double objective = 0;           // sum over (m,n) of L_m[n]
    SolveReport report;
    bool feasible = false;
    std::string binding_constraint;  // set when infeasibility is detected
};

struct PowerFreqOptions {
    SolveOptions solver;
    double f_floor = 1e3;     // strictly positive frequency floor
    double gamma_cap = 100.0; // upper box keeping the exponential bounded
    bool optimize_device_side = true;  // fixed-user-allocation baseline pins this
};

// Solves the power/frequency subproblem for fixed (alpha, Q); the previous
// state provides the warm start. On success the state fields are NOT mutated;
// the caller applies the solution.
PowerFreqSolution solve_power_freq(const Scenario& sc, const AllocationState& st,
                                   const PowerFreqOptions& opt = {});

// Writes a solution back into the allocation state.
void apply_power_freq(const PowerFreqSolution& sol, AllocationState& st);

}  // namespace uavfl

#endif
