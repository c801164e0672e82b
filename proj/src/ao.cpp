#include "uavfl/ao.hpp"

#include <chrono>
#include <cmath>

namespace uavfl {

AllocationState initial_allocation(const Scenario& sc) {
    const int M = sc.device_count();
    const int U = sc.channel.rb_count;
    const int N = sc.slots;
    AllocationState st = AllocationState::sized(M, U, N);
    for (int n = 0; n < N; ++n) {
        const double s = static_cast<double>(n) / (N - 1);
        st.traj[static_cast<std::size_t>(n)] =
            sc.uav.start + s * (sc.uav.end - sc.uav.start);
        st.f_uav[static_cast<std::size_t>(n)] = sc.uav.f_max;
    }
    for (int m = 0; m < M; ++m) {
        const auto& dev = sc.devices[static_cast<std::size_t>(m)];
        for (int n = 0; n < N; ++n) {
            st.at_fdev(m, n) = dev.f_max;
            st.at_pdev(m, n) = 0.5 * dev.p_max;
            st.at_puav(m, n) = 0.5 * sc.uav.p_max;
            st.set_rb_total(m, n, static_cast<double>(U) / M);
        }
    }
    const LatencyBreakdown bd = evaluate(sc, st);
    for (int n = 0; n < N; ++n) {
        double eta = 0;
        for (int m = 0; m < M; ++m)
            eta = std::max(eta, bd.at(bd.t_train, m, n) + bd.at(bd.t_up, m, n));
        st.eta[static_cast<std::size_t>(n)] = eta;
    }
    return st;
}

double complexity_estimate(int devices, int rbs, int slots, int outer_iterations,
                           double eps_accuracy) {
    if (outer_iterations <= 0) return 0.0;
    const double m = devices, u = rbs, n = slots;
    const double rb_block = std::pow(m * u * n + n, 3.5);
    const double traj_block = std::pow(3.0 * m * n + 3.0 * n, 3.5);
    const double power_block = std::pow(7.0 * m * n + 2.0 * n, 3.5);
    return outer_iterations * (rb_block + traj_block + power_block) *
           std::log(1.0 / eps_accuracy);
}

namespace {

void apply_rb_totals(const std::vector<double>& alpha, AllocationState& st) {
    st.alpha = alpha;
}

}  // namespace

AoResult run_ao(const Scenario& sc, const AoOptions& opt, const StagePins& pins) {
    using clock = std::chrono::steady_clock;
    AoResult res;
    AllocationState st = initial_allocation(sc);
    if (!pins.pinned_rb_counts.empty()) {
        for (int m = 0; m < st.devices; ++m)
            for (int n = 0; n < st.slots; ++n)
                st.set_rb_total(
                    m, n,
                    pins.pinned_rb_counts[static_cast<std::size_t>(m * st.slots + n)]);
    }

    double phi = evaluate(sc, st).objective;
    res.trace.objectives.push_back(phi);
    res.frozen_t_fl = evaluate(sc, st).t_fl;
    bool rb_solved = false;

    for (int l = 1; l <= opt.max_outer; ++l) {
        const auto t0 = clock::now();
        AoIterationRow row;
        row.iteration = l;

        // Stage 1: RB allocation for fixed (f, p, Q).
        if (!pins.pin_rb) {
            RbSolution rb = solve_relaxed(sc, st, opt.rb_solver);
            AllocationState cand = st;
            if (pins.threshold_rb) {
                const ThresholdedAllocation thr = threshold_binarize(rb, sc, pins.threshold);
                for (int m = 0; m < st.devices; ++m)
                    for (int n = 0; n < st.slots; ++n)
                        cand.set_rb_total(
                            m, n,
                            static_cast<double>(
                                thr.rb_counts[static_cast<std::size_t>(m * st.slots + n)]));
            } else {
                apply_rb_totals(rb.alpha_relaxed, cand);
            }
            const LatencyBreakdown bd = evaluate(sc, cand);
            const bool monotone_ok =
                pins.threshold_rb || bd.objective <= phi * (1.0 + 1e-9) + 1e-12;
            if (bd.feasible && monotone_ok) {
                st = cand;
                for (int n = 0; n < st.slots; ++n) {
                    double eta = 0;
                    for (int m = 0; m < st.devices; ++m)
                        eta = std::max(eta, bd.at(bd.t_train, m, n) + bd.at(bd.t_up, m, n));
                    st.eta[static_cast<std::size_t>(n)] = eta;
                }
                res.rb_solution = std::move(rb);
                rb_solved = true;
            } else if (!bd.feasible) {
                res.failure_stage = "rb_allocation";
            }
        }
        row.objective_after_rb = evaluate(sc, st).objective;

        // Stage 2: UAV trajectory via SCA around the current iterate.
        if (!pins.pin_trajectory) {
            ScaResult sca = run_sca(sc, st, opt.sca);
            if (!sca.message.empty() && sca.objectives.size() <= 1)
                res.failure_stage = "trajectory";
        }
        {
            const LatencyBreakdown bd = evaluate(sc, st);
            row.objective_after_trajectory = bd.objective;
            res.frozen_t_fl = bd.t_fl;  // durations the trajectory was shaped for
        }

        // Stage 3: powers and frequencies for fixed (alpha, Q).
        {
            PowerFreqOptions popt = opt.power;
            popt.optimize_device_side = !pins.pin_device_power_freq;
            const PowerFreqSolution sol = solve_power_freq(sc, st, popt);
            if (sol.feasible && sol.objective <= phi * (1.0 + 1e-9) + 1e-12) {
                apply_power_freq(sol, st);
            } else if (!sol.feasible) {
                res.failure_stage = "resource_allocation: " + sol.binding_constraint;
            }
        }
        row.objective_after_power = evaluate(sc, st).objective;

        const double phi_next = row.objective_after_power;
        row.wall_seconds =
            std::chrono::duration<double>(clock::now() - t0).count();
        res.trace.rows.push_back(row);
        res.trace.objectives.push_back(phi_next);
        res.outer_iterations = l;

        const double change = std::abs(phi - phi_next);
        phi = phi_next;
        if (change < opt.eps_rel * std::max(std::abs(phi), 1e-300)) {
            res.converged = true;
            break;
        }
    }

    res.relaxed_state = st;
    res.relaxed_objective = phi;

    // Binary reconstruction happens once, after the outer loop. Allocations
    // pinned or thresholded along the way are already integer.
    res.final_state = st;
    if (rb_solved && !pins.threshold_rb) {
        reconstruct_binary(res.rb_solution, sc, opt.chi);
        apply_binary_allocation(res.rb_solution, res.final_state);
        // Rounding shifts the transfer latencies, so re-fit powers and
        // frequencies to restore feasibility against the energy budgets.
        PowerFreqOptions popt = opt.power;
        popt.optimize_device_side = !pins.pin_device_power_freq;
        const PowerFreqSolution sol = solve_power_freq(sc, res.final_state, popt);
        if (sol.feasible) apply_power_freq(sol, res.final_state);
    }
    {
        const LatencyBreakdown bd = evaluate(sc, res.final_state);
        res.final_objective = bd.objective;
        for (int n = 0; n < st.slots; ++n) {
            double eta = 0;
            for (int m = 0; m < st.devices; ++m)
                eta = std::max(eta, bd.at(bd.t_train, m, n) + bd.at(bd.t_up, m, n));
            res.final_state.eta[static_cast<std::size_t>(n)] = eta;
        }
        res.energy_audit = energy_feasibility(sc, bd);
        res.kinematics_audit = kinematics_check(res.final_state.traj, res.frozen_t_fl,
                                                sc.uav.v_min, sc.uav.v_max, sc.uav.a_max);
    }
    return res;
}

}  // namespace uavfl
