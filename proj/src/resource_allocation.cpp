#include "uavfl/resource_allocation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uavfl {

namespace {
constexpr double kLn2 = 0.6931471805599453;
double xi_of_gamma(double g) { return g * (std::exp(kLn2 / g) - 1.0); }
}  // namespace

double gamma_from_power(double p_tx, double gain, double rb_bandwidth, double noise) {
    const double snr = p_tx * gain / (rb_bandwidth * noise);
    if (snr <= 0.0) throw std::invalid_argument("gamma_from_power: nonpositive SNR");
    return 1.0 / std::log2(1.0 + snr);
}

double power_from_gamma(double gamma, double gain, double rb_bandwidth, double noise) {
    if (gamma <= 0.0) throw std::invalid_argument("power_from_gamma: nonpositive gamma");
    return rb_bandwidth * noise / gain * (std::exp(kLn2 / gamma) - 1.0);
}

double xi_epigraph_residual(double gamma, double xi) {
    return gamma * std::exp(kLn2 / gamma) - (xi + gamma);
}

NonconvexityReport verify_nonconvexity_g(double a, double b) {
    NonconvexityReport rep;
    auto g = [a, b](double x) { return a * x / std::log2(1.0 + b * x); };
    rep.sample_x = {0.5, 1.0, 2.0, 10.0};
    bool any_negative = false;
    for (double x : rep.sample_x) {
        const double h = 1e-5 * std::max(1.0, x);
        const double d2 = (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
        rep.second_derivative.push_back(d2);
        if (d2 < 0.0) any_negative = true;
    }
    auto g_tilde = [a, b](double x) {
        return (a * b * b * x + 2.0 * a * b) * std::log(1.0 + b * x) - 2.0 * a * b * b * x;
    };
    rep.min_g_tilde = g_tilde(0.0);
    for (double e = -3.0; e <= 3.0 + 1e-12; e += 0.1)
        rep.min_g_tilde = std::min(rep.min_g_tilde, g_tilde(std::pow(10.0, e)));
    rep.confirms_nonconvexity = any_negative && rep.min_g_tilde >= -1e-9;
    return rep;
}

PowerFreqSolution solve_power_freq(const Scenario& sc, const AllocationState& st,
                                   const PowerFreqOptions& opt) {
    const int M = sc.device_count();
    const int N = sc.slots;
    const std::size_t mn = static_cast<std::size_t>(M) * N;

    // Per-link coefficients with alpha and the trajectory fixed.
    std::vector<double> share(mn), gain(mn), cyc_train(mn), up_bits(mn), dn_bits(mn);
    std::vector<double> cagg(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        cagg[static_cast<std::size_t>(n)] = sc.uav.cycles_per_bit * sc.sum_model_bits(n);
        for (int m = 0; m < M; ++m) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            const auto& dev = sc.devices[static_cast<std::size_t>(m)];
            share[i] = st.rb_total(m, n);
            if (share[i] <= 0.0)
                throw std::runtime_error("resource_allocation: zero RB share");
            gain[i] = channel_gain(st.traj[static_cast<std::size_t>(n)], dev.position,
                                   sc.uav.altitude, sc.channel.ref_gain);
            cyc_train[i] = sc.train_bits(m, n) * dev.cycles_per_bit * dev.local_rounds;
            up_bits[i] = sc.model_bits[static_cast<std::size_t>(m)]
                                      [static_cast<std::size_t>(n)];
            dn_bits[i] = sc.agg_bits[static_cast<std::size_t>(n)];
        }
    }

    // Variable layout: device frequencies, UAV frequencies, uplink gammas,
    // downlink gammas, etas.
    const int of_f = 0;
    const int of_fu = M * N;
    const int of_gu = M * N + N;
    const int of_gd = 2 * M * N + N;
    const int of_eta = 3 * M * N + N;
    ConvexProgram prog;
    prog.dim = 3 * M * N + 2 * N;
    prog.init_free_box();
    auto f_i = [&](int m, int n) { return of_f + m * N + n; };
    auto fu_i = [&](int n) { return of_fu + n; };
    auto gu_i = [&](int m, int n) { return of_gu + m * N + n; };
    auto gd_i = [&](int m, int n) { return of_gd + m * N + n; };
    auto e_i = [&](int n) { return of_eta + n; };

    const double B = sc.channel.rb_bandwidth;
    std::vector<double> gamma_up_min(mn), gamma_dn_min(mn);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            gamma_up_min[i] = gamma_from_power(
                sc.devices[static_cast<std::size_t>(m)].p_max, gain[i], B,
                sc.channel.noise_uplink);
            gamma_dn_min[i] = gamma_from_power(sc.uav.p_max, gain[i], B,
                                               sc.channel.noise_downlink);
            prog.lower[f_i(m, n)] = opt.f_floor;
            prog.upper[f_i(m, n)] = sc.devices[static_cast<std::size_t>(m)].f_max;
            prog.lower[gu_i(m, n)] = gamma_up_min[i];
            prog.upper[gu_i(m, n)] = opt.gamma_cap;
            prog.lower[gd_i(m, n)] = gamma_dn_min[i];
            prog.upper[gd_i(m, n)] = opt.gamma_cap;
        }
    for (int n = 0; n < N; ++n) {
        prog.lower[fu_i(n)] = opt.f_floor;
        prog.upper[fu_i(n)] = sc.uav.f_max;
        prog.lower[e_i(n)] = 0.0;
    }

    // When the device side is pinned (fixed-user-allocation baseline), device
    // frequencies and uplink gammas are frozen at the current state values by
    // collapsing their boxes outside the program: we substitute constants.
    const bool dev_free = opt.optimize_device_side;
    std::vector<double> f_fixed(mn), gu_fixed(mn);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            f_fixed[i] = st.at_fdev(m, n);
            gu_fixed[i] = gamma_from_power(std::max(st.at_pdev(m, n), 1e-12), gain[i], B,
                                           sc.channel.noise_uplink);
        }

    // Objective: M eta_n + M cagg_n / f_uav_n + sum_m dn_bits gamma_dn / (share B).
    {
        std::vector<SeparableTerm::Element> el;
        for (int n = 0; n < N; ++n) {
            el.push_back({e_i(n), static_cast<double>(M), SeparableTerm::Atom::kIdentity});
            el.push_back({fu_i(n), M * cagg[static_cast<std::size_t>(n)],
                          SeparableTerm::Atom::kReciprocal});
        }
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) {
                const std::size_t i = static_cast<std::size_t>(m * N + n);
                el.push_back({gd_i(m, n), dn_bits[i] / (share[i] * B),
                              SeparableTerm::Atom::kIdentity});
            }
        prog.objective = std::make_shared<SeparableTerm>(std::move(el), 0.0);
    }

    // Train + upload below eta.
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            std::vector<SeparableTerm::Element> el;
            double constant = 0;
            if (dev_free) {
                el.push_back({f_i(m, n), cyc_train[i], SeparableTerm::Atom::kReciprocal});
                el.push_back({gu_i(m, n), up_bits[i] / (share[i] * B),
                              SeparableTerm::Atom::kIdentity});
            } else {
                constant += cyc_train[i] / f_fixed[i] +
                            up_bits[i] * gu_fixed[i] / (share[i] * B);
            }
            el.push_back({e_i(n), -1.0, SeparableTerm::Atom::kIdentity});
            prog.inequalities.push_back(
                std::make_shared<SeparableTerm>(std::move(el), constant));
            prog.inequality_names.push_back("eta[" + std::to_string(m) + "," +
                                            std::to_string(n) + "]");
        }
    // Device energy: kappa cyc f^2 + (d s2 / (g share)) xi(gamma) <= E.
    if (dev_free) {
        for (int m = 0; m < M; ++m) {
            std::vector<SeparableTerm::Element> el;
            const auto& dev = sc.devices[static_cast<std::size_t>(m)];
            double constant = -dev.energy_budget;
            for (int n = 0; n < N; ++n) {
                const std::size_t i = static_cast<std::size_t>(m * N + n);
                el.push_back({f_i(m, n), dev.capacitance * cyc_train[i],
                              SeparableTerm::Atom::kSquare});
                el.push_back({gu_i(m, n),
                              up_bits[i] * sc.channel.noise_uplink / (gain[i] * share[i]),
                              SeparableTerm::Atom::kPowerXi});
            }
            prog.inequalities.push_back(
                std::make_shared<SeparableTerm>(std::move(el), constant));
            prog.inequality_names.push_back("device_energy[" + std::to_string(m) + "]");
        }
    }
    // UAV energy: kappa_u cagg f_uav^2 + sum_m (d_agg s_m2 / (g share)) xi(gamma_dn) <= E.
    {
        std::vector<SeparableTerm::Element> el;
        double constant = -sc.uav.energy_budget;
        for (int n = 0; n < N; ++n) {
            el.push_back({fu_i(n), sc.uav.capacitance * cagg[static_cast<std::size_t>(n)],
                          SeparableTerm::Atom::kSquare});
            for (int m = 0; m < M; ++m) {
                const std::size_t i = static_cast<std::size_t>(m * N + n);
                el.push_back({gd_i(m, n),
                              dn_bits[i] * sc.channel.noise_downlink / (gain[i] * share[i]),
                              SeparableTerm::Atom::kPowerXi});
            }
        }
        prog.inequalities.push_back(std::make_shared<SeparableTerm>(std::move(el), constant));
        prog.inequality_names.push_back("uav_energy");
    }

    // Warm start from the current state, pushed strictly inside the boxes.
    VecX x0(prog.dim);
    auto inside = [](double v, double lo, double hi) {
        const double w = hi - lo;
        return std::clamp(v, lo + 1e-6 * w, hi - 1e-6 * w);
    };
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            x0[f_i(m, n)] = inside(f_fixed[i], opt.f_floor,
                                   sc.devices[static_cast<std::size_t>(m)].f_max);
            x0[gu_i(m, n)] = inside(gu_fixed[i], gamma_up_min[i], opt.gamma_cap);
            const double gd0 = st.at_puav(m, n) > 0.0
                                   ? gamma_from_power(st.at_puav(m, n), gain[i], B,
                                                      sc.channel.noise_downlink)
                                   : 2.0 * gamma_dn_min[i];
            x0[gd_i(m, n)] = inside(gd0, gamma_dn_min[i], opt.gamma_cap);
        }
    for (int n = 0; n < N; ++n)
        x0[fu_i(n)] = inside(st.f_uav[static_cast<std::size_t>(n)], opt.f_floor,
                             sc.uav.f_max);
    for (int n = 0; n < N; ++n) {
        double eta0 = 0;
        for (int m = 0; m < M; ++m) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            const double t_train =
                dev_free ? cyc_train[i] / x0[f_i(m, n)] : cyc_train[i] / f_fixed[i];
            const double t_up = dev_free
                                    ? up_bits[i] * x0[gu_i(m, n)] / (share[i] * B)
                                    : up_bits[i] * gu_fixed[i] / (share[i] * B);
            eta0 = std::max(eta0, t_train + t_up);
        }
        x0[e_i(n)] = eta0 * (1.0 + 1e-6) + 1e-12;
    }

    PowerFreqSolution sol;
    sol.report = solve(prog, x0, opt.solver);
    if (sol.report.x.size() != prog.dim) {
        sol.feasible = false;
        sol.binding_constraint = sol.report.message;
        return sol;
    }
    if (!sol.report.converged && sol.report.max_violation > opt.solver.feas_tol) {
        sol.feasible = false;
        // Name the most violated constraint for the infeasibility report.
        double worst = 0;
        for (std::size_t c = 0; c < prog.inequalities.size(); ++c) {
            const double v = prog.inequalities[c]->eval(sol.report.x, nullptr);
            if (v > worst) {
                worst = v;
                sol.binding_constraint = prog.inequality_names[c];
            }
        }
        return sol;
    }

    sol.feasible = true;
    const VecX& x = sol.report.x;
    sol.f_dev.assign(mn, 0.0);
    sol.gamma_up.assign(mn, 0.0);
    sol.gamma_down.assign(mn, 0.0);
    sol.xi_up.assign(mn, 0.0);
    sol.xi_down.assign(mn, 0.0);
    sol.p_dev.assign(mn, 0.0);
    sol.p_uav.assign(mn, 0.0);
    sol.f_uav.assign(static_cast<std::size_t>(N), 0.0);
    sol.eta.assign(static_cast<std::size_t>(N), 0.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            sol.f_dev[i] = dev_free ? x[f_i(m, n)] : f_fixed[i];
            sol.gamma_up[i] = dev_free ? x[gu_i(m, n)] : gu_fixed[i];
            sol.gamma_down[i] = x[gd_i(m, n)];
            sol.xi_up[i] = xi_of_gamma(sol.gamma_up[i]);
            sol.xi_down[i] = xi_of_gamma(sol.gamma_down[i]);
            sol.p_dev[i] = power_from_gamma(sol.gamma_up[i], gain[i], B,
                                            sc.channel.noise_uplink);
            sol.p_uav[i] = power_from_gamma(sol.gamma_down[i], gain[i], B,
                                            sc.channel.noise_downlink);
            // Clamp the tiny box overshoot from the barrier interior.
            sol.p_dev[i] =
                std::min(sol.p_dev[i], sc.devices[static_cast<std::size_t>(m)].p_max);
            sol.p_uav[i] = std::min(sol.p_uav[i], sc.uav.p_max);
        }
    for (int n = 0; n < N; ++n) {
        sol.f_uav[static_cast<std::size_t>(n)] = x[fu_i(n)];
        sol.eta[static_cast<std::size_t>(n)] = x[e_i(n)];
    }

    // Objective in original variables via the system model.
    AllocationState check = st;
    apply_power_freq(sol, check);
    sol.objective = evaluate(sc, check).objective;
    return sol;
}

void apply_power_freq(const PowerFreqSolution& sol, AllocationState& st) {
    const int M = st.devices, N = st.slots;
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            st.at_fdev(m, n) = sol.f_dev[i];
            st.at_pdev(m, n) = sol.p_dev[i];
            st.at_puav(m, n) = sol.p_uav[i];
        }
    for (int n = 0; n < N; ++n) {
        st.f_uav[static_cast<std::size_t>(n)] = sol.f_uav[static_cast<std::size_t>(n)];
        st.eta[static_cast<std::size_t>(n)] = sol.eta[static_cast<std::size_t>(n)];
    }
}

}  // namespace uavfl
