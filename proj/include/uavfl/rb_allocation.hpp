#ifndef UAVFL_RB_ALLOCATION_HPP
#define UAVFL_RB_ALLOCATION_HPP

#include <vector>

#include "uavfl/convex_engine.hpp"
#include "uavfl/scenario.hpp"
#include "uavfl/system_model.hpp"

namespace uavfl {

// Per-(device, slot) link coefficients with frequencies, powers, and the
// trajectory held fixed. All of the RB subproblem's data reduces to these.
struct RbLinkData {
    int devices = 0;
    int slots = 0;
    std::vector<double> t_train;      // [m*n] s, fixed while alpha varies
    std::vector<double> e_train;      // [m*n] J
    std::vector<double> up_bits;      // [m*n] d_m[n]
    std::vector<double> dn_bits;      // [m*n] d^agg[n]
    std::vector<double> up_unit_rate; // [m*n] B log2(1+SNR_up): rate per unit share
    std::vector<double> dn_unit_rate; // [m*n]
    std::vector<double> p_up;         // [m*n] device transmit power
    std::vector<double> p_dn;         // [m*n] UAV transmit power toward m
    std::vector<double> e_agg;        // [n] J, aggregation energy (f fixed)
    double at(const std::vector<double>& v, int m, int n) const {
        return v[static_cast<std::size_t>(m * slots + n)];
    }
};

RbLinkData collect_rb_link_data(const Scenario& sc, const AllocationState& st);

// Lagrange multipliers of the relaxed RB problem, reported for the
// per-device-averaged objective so that the straggler weights live on the
// unit simplex per slot. RB prices are scaled to the per-RB share so the
// closed form below reproduces each alpha entry directly.
struct RbMultipliers {
    int devices = 0, rbs = 0, slots = 0;
    std::vector<double> rb_price;            // phi~ [u*n] (uniform across u here)
    std::vector<double> min_share_price;     // varpi~ [m*n]
    std::vector<double> straggler_weight;    // mu~ [m*n], in [0,1], sums to 1 per slot
    std::vector<double> device_energy_price; // xi~ [m]
    double uav_energy_price = 0;             // gamma~

    double phi(int u, int n) const {
        return rb_price[static_cast<std::size_t>(u * slots + n)];
    }
    double varpi(int m, int n) const {
        return min_share_price[static_cast<std::size_t>(m * slots + n)];
    }
    double mu(int m, int n) const {
        return straggler_weight[static_cast<std::size_t>(m * slots + n)];
    }
};

struct RbSolution {
    // Relaxed shares (uniform across RBs for each device) and the auxiliary
    // per-slot latency bound.
    std::vector<double> alpha_relaxed;  // [m*u*n]
    std::vector<double> eta;            // [n]
    RbMultipliers multipliers;
    double relaxed_objective = 0;       // sum over (m,n) of L_m[n]
    SolveReport report;

    // Binary reconstruction over sub-RBs (filled by reconstruct_binary).
    int chi = 0;
    std::vector<int> sub_rb_counts;     // [m*n] sub-RBs owned by device m
    std::vector<int> sub_rb_owner;      // [chi*U*n], -1 when unassigned
    bool trimmed = false;               // rounding demands exceeded capacity
    bool forced_assignment = false;     // a device had to be given its minimum
};

// Solves the relaxed RB-allocation subproblem for fixed (f, p, Q).
RbSolution solve_relaxed(const Scenario& sc, const AllocationState& st,
                         const SolveOptions& opt = {});

// Theorem-1 style closed form: alpha = clip(sqrt(W / (phi - varpi)), 0, 1),
// evaluated entrywise at the given multipliers.
std::vector<double> closed_form_alpha(const RbMultipliers& mult, const RbLinkData& data);

// W coefficient of the closed form (uplink straggler/energy pressure plus
// downlink payload/energy pressure).
double closed_form_w(const RbMultipliers& mult, const RbLinkData& data, int m, int n);

// Optimal per-slot latency bound for a given allocation.
std::vector<double> optimal_eta(const RbLinkData& data,
                                const std::vector<double>& rb_totals /* [m*n] */);

// Rounds relaxed shares to an integer number of sub-RBs (RB split chi ways),
// assigning contiguous blocks by device index. Updates sol in place.
void reconstruct_binary(RbSolution& sol, const Scenario& sc, int chi);

// Applies the binary reconstruction to an allocation state: each device's RB
// total becomes sub_rb_count / chi.
void apply_binary_allocation(const RbSolution& sol, AllocationState& st);

// Thresholding reconstruction: lays the relaxed shares contiguously over the
// RB grid, keeps cells with a fraction of at least delta, and repairs the
// one-device-per-RB and minimum-share constraints.
struct ThresholdedAllocation {
    std::vector<int> rb_counts;      // [m*n] whole RBs per device
    bool forced_assignment = false;  // a device lost every RB and was given one
    bool had_conflicts = false;      // two devices passed the threshold on one RB
};
ThresholdedAllocation threshold_binarize(const RbSolution& sol, const Scenario& sc,
                                         double delta);

// Independent reference: the same relaxed problem posed over the full
// per-(m,u,n) share tensor and solved generically. Used by tests to validate
// the reduced path and the closed form.
struct RbReferenceSolution {
    std::vector<double> alpha;  // [m*u*n]
    std::vector<double> eta;    // [n]
    double objective = 0;       // sum over (m,n) of L_m[n]
    SolveReport report;
};
RbReferenceSolution solve_relaxed_reference(const Scenario& sc, const AllocationState& st,
                                            const SolveOptions& opt = {});

}  // namespace uavfl

#endif
