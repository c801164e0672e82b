#ifndef UAVFL_FL_CONVERGENCE_HPP
#define UAVFL_FL_CONVERGENCE_HPP

#include <Eigen/Dense>
#include <vector>

#include "uavfl/rng.hpp"

namespace uavfl {

// Analytical lower bounds on training rounds for target accuracies, with the
// constants that produced them.
struct RoundBounds {
    double smoothness = 0;        // L
    double strong_convexity = 0;  // Upsilon
    double step_size = 0;         // upsilon
    double surrogate_weight = 0;  // varrho
    double eps_local = 0;
    double eps_global = 0;
    double local_rounds = 0;      // R-check
    double global_rounds = 0;     // N-check
};

// R = 2 / (step * Upsilon * (2 - L * step)) * ln(1 / eps); requires step <= 2/L.
double local_rounds_bound(double smoothness, double strong_convexity, double step_size,
                          double eps_local);

// N = 2 L^2 / (Upsilon^2 * varrho * (1 - eps_local)) * ln(1 / eps_global);
// requires 0 < varrho <= Upsilon / L and eps_local < 1.
double global_rounds_bound(double smoothness, double strong_convexity,
                           double surrogate_weight, double eps_local, double eps_global);

RoundBounds make_round_bounds(double smoothness, double strong_convexity,
                              double step_size, double surrogate_weight, double eps_local,
                              double eps_global);

// Synthetic strongly convex task: per-device quadratics with eigenvalues in
// [strong_convexity, smoothness], so the assumptions hold with known constants.
struct SyntheticFlTask {
    std::vector<Eigen::MatrixXd> quad;    // A_m, SPD
    std::vector<Eigen::VectorXd> linear;  // b_m
    std::vector<double> data_weight;      // |D_m| proxies for the weighted variant
    double smoothness = 0;
    double strong_convexity = 0;
    int dim = 0;

    int device_count() const { return static_cast<int>(quad.size()); }
    // Global loss (uniform or data-weighted average of the device losses).
    double global_loss(const Eigen::VectorXd& theta, bool weighted) const;
    Eigen::VectorXd global_gradient(const Eigen::VectorXd& theta, bool weighted) const;
    Eigen::VectorXd global_optimum(bool weighted) const;
};

SyntheticFlTask make_synthetic_task(int devices, int dim, double smoothness,
                                    double strong_convexity, RandomStream& rng);

struct FlSimOptions {
    double step_size = 0;          // upsilon
    double surrogate_weight = 0;   // varrho
    int local_rounds = 0;          // R per slot
    int slots = 0;                 // aggregation rounds
    bool weighted_aggregation = false;  // data-size weights instead of 1/M
};

struct FlTrace {
    // Normalized local surrogate gaps per (slot, device, round):
    // (h(r) - h*) / (h(0) - h*).
    std::vector<std::vector<std::vector<double>>> local_gap;
    // Normalized global loss gap per slot boundary (index 0 = initial model).
    std::vector<double> global_gap;
    // First round index at which each (slot, device) reached eps_local; -1 if
    // never within the simulated rounds.
    std::vector<std::vector<int>> rounds_to_local_eps;
    // First slot at which the global gap reached eps_global; -1 if never.
    int slots_to_global_eps = -1;

    std::string to_csv() const;  // (slot, device, round, gap) rows
};

FlTrace simulate_fl(const SyntheticFlTask& task, const FlSimOptions& opt,
                    double eps_local, double eps_global);

}  // namespace uavfl

#endif
