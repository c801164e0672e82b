#ifndef UAVFL_SYSTEM_MODEL_HPP
#define UAVFL_SYSTEM_MODEL_HPP

#include <string>
#include <vector>

#include "uavfl/scenario.hpp"

namespace uavfl {

// All decision variables at one optimizer iterate. RB shares are stored per
// (device, RB, slot); fractional values are allowed before reconstruction.
struct AllocationState {
    int devices = 0;
    int rbs = 0;
    int slots = 0;
    std::vector<double> alpha;      // [m * rbs * slots], share of RB u in slot n
    std::vector<double> f_dev;      // [m * slots] Hz
    std::vector<double> f_uav;      // [slots] Hz
    std::vector<double> p_dev;      // [m * slots] W
    std::vector<double> p_uav;      // [m * slots] W, downlink power toward device m
    std::vector<Vec2> traj;         // [slots]
    std::vector<double> eta;        // [slots] s, max train+upload latency

    static AllocationState sized(int m, int u, int n);

    double& at_alpha(int m, int u, int n) {
        return alpha[static_cast<std::size_t>((m * rbs + u) * slots + n)];
    }
    double at_alpha(int m, int u, int n) const {
        return alpha[static_cast<std::size_t>((m * rbs + u) * slots + n)];
    }
    double& at_fdev(int m, int n) { return f_dev[static_cast<std::size_t>(m * slots + n)]; }
    double at_fdev(int m, int n) const { return f_dev[static_cast<std::size_t>(m * slots + n)]; }
    double& at_pdev(int m, int n) { return p_dev[static_cast<std::size_t>(m * slots + n)]; }
    double at_pdev(int m, int n) const { return p_dev[static_cast<std::size_t>(m * slots + n)]; }
    double& at_puav(int m, int n) { return p_uav[static_cast<std::size_t>(m * slots + n)]; }
    double at_puav(int m, int n) const { return p_uav[static_cast<std::size_t>(m * slots + n)]; }

    // Total RB share of device m in slot n (sub-RB counts divide out to the
    // same quantity after reconstruction).
    double rb_total(int m, int n) const {
        double s = 0;
        for (int u = 0; u < rbs; ++u) s += at_alpha(m, u, n);
        return s;
    }
    void set_rb_total(int m, int n, double total) {
        for (int u = 0; u < rbs; ++u) at_alpha(m, u, n) = total / rbs;
    }
};

// Per-(device, slot) latency and energy decomposition plus slot-level totals.
struct LatencyBreakdown {
    int devices = 0;
    int slots = 0;
    bool feasible = true;
    std::vector<std::string> diagnostics;  // per-(m,n) findings for infeasible rates

    std::vector<double> t_train, t_up, t_wait, t_down;  // [m * slots] s
    std::vector<double> e_train, e_up, e_down;          // [m * slots] J
    std::vector<double> t_agg, e_agg;                   // [slots]
    std::vector<double> t_fl;                           // [slots] round duration
    std::vector<double> latency;                        // [m * slots] L_m[n]
    double objective = 0;                               // sum over (m, n) of L_m[n]

    double at(const std::vector<double>& v, int m, int n) const {
        return v[static_cast<std::size_t>(m * slots + n)];
    }

    std::string to_csv() const;
    std::string to_json() const;
};

struct ViolationEntry {
    std::string constraint;
    int device = -1;  // -1 when the entry concerns the UAV or a slot-level limit
    int slot = -1;
    double value = 0;
    double bound = 0;
    double margin = 0;  // bound - value (negative means violated)
};

struct FeasibilityReport {
    bool feasible = true;
    std::vector<ViolationEntry> entries;  // all audited constraints, worst first
    double worst_relative_violation = 0;
};

// Line-of-sight channel power gain, Eq.-(10) form.
double channel_gain(const Vec2& uav_xy, const Vec2& device_xy, double altitude,
                    double ref_gain);

// Uplink rate over the allocated RB shares.
double uplink_rate(double rb_share_total, double p_tx, double gain, double rb_bandwidth,
                   double noise);

// Downlink rate; mirrors the uplink with the device-side noise density.
double downlink_rate(double rb_share_total, double p_tx, double gain, double rb_bandwidth,
                     double noise);

// Local training latency/energy. f <= 0 with positive work yields an
// infeasible marker (negative latency is never produced; the bool is false).
struct LatencyEnergy {
    double latency = 0;
    double energy = 0;
    bool feasible = true;
};
LatencyEnergy train_latency_energy(double data_bits, double cycles_per_bit,
                                   int local_rounds, double freq, double capacitance);

LatencyEnergy aggregation_latency_energy(double total_bits, double cycles_per_bit,
                                         double freq, double capacitance);

// Evaluates the full per-slot breakdown. Pure: identical inputs produce
// bit-identical outputs.
LatencyBreakdown evaluate(const Scenario& sc, const AllocationState& st);

// Velocity/acceleration audit against the per-slot round durations. The
// caller passes the T_FL values to audit against (the solvers freeze these at
// the current iterate).
FeasibilityReport kinematics_check(const std::vector<Vec2>& traj,
                                   const std::vector<double>& t_fl, double v_min,
                                   double v_max, double a_max);

// Device and UAV energy budget audit.
FeasibilityReport energy_feasibility(const Scenario& sc, const LatencyBreakdown& bd);

}  // namespace uavfl

#endif
