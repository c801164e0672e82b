#include "uavfl/rb_allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uavfl {

RbLinkData collect_rb_link_data(const Scenario& sc, const AllocationState& st) {
    const int M = sc.device_count();
    const int N = sc.slots;
    RbLinkData d;
    d.devices = M;
    d.slots = N;
    const std::size_t mn = static_cast<std::size_t>(M) * N;
    d.t_train.assign(mn, 0.0);
    d.e_train.assign(mn, 0.0);
    d.up_bits.assign(mn, 0.0);
    d.dn_bits.assign(mn, 0.0);
    d.up_unit_rate.assign(mn, 0.0);
    d.dn_unit_rate.assign(mn, 0.0);
    d.p_up.assign(mn, 0.0);
    d.p_dn.assign(mn, 0.0);
    d.e_agg.assign(static_cast<std::size_t>(N), 0.0);

    for (int n = 0; n < N; ++n) {
        const auto agg = aggregation_latency_energy(sc.sum_model_bits(n),
                                                    sc.uav.cycles_per_bit,
                                                    st.f_uav[static_cast<std::size_t>(n)],
                                                    sc.uav.capacitance);
        d.e_agg[static_cast<std::size_t>(n)] = agg.energy;
        for (int m = 0; m < M; ++m) {
            const auto& dev = sc.devices[static_cast<std::size_t>(m)];
            const std::size_t i = static_cast<std::size_t>(m * N + n);
            const auto tr = train_latency_energy(sc.train_bits(m, n), dev.cycles_per_bit,
                                                 dev.local_rounds, st.at_fdev(m, n),
                                                 dev.capacitance);
            d.t_train[i] = tr.latency;
            d.e_train[i] = tr.energy;
            d.up_bits[i] = sc.model_bits[static_cast<std::size_t>(m)]
                                        [static_cast<std::size_t>(n)];
            d.dn_bits[i] = sc.agg_bits[static_cast<std::size_t>(n)];
            const double gain = channel_gain(st.traj[static_cast<std::size_t>(n)],
                                             dev.position, sc.uav.altitude,
                                             sc.channel.ref_gain);
            d.up_unit_rate[i] = uplink_rate(1.0, st.at_pdev(m, n), gain,
                                            sc.channel.rb_bandwidth,
                                            sc.channel.noise_uplink);
            d.dn_unit_rate[i] = downlink_rate(1.0, st.at_puav(m, n), gain,
                                              sc.channel.rb_bandwidth,
                                              sc.channel.noise_downlink);
            d.p_up[i] = st.at_pdev(m, n);
            d.p_dn[i] = st.at_puav(m, n);
            if (d.up_unit_rate[i] <= 0.0 || d.dn_unit_rate[i] <= 0.0)
                throw std::runtime_error(
                    "rb_allocation: zero link rate; fix powers/trajectory first");
        }
    }
    return d;
}

namespace {

// Seconds of uplink / downlink transfer per reciprocal RB share.
double up_coeff(const RbLinkData& d, int m, int n) {
    return d.at(d.up_bits, m, n) / d.at(d.up_unit_rate, m, n);
}
double dn_coeff(const RbLinkData& d, int m, int n) {
    return d.at(d.dn_bits, m, n) / d.at(d.dn_unit_rate, m, n);
}

std::vector<double> totals_from_alpha(const std::vector<double>& alpha, int M, int U,
                                      int N) {
    std::vector<double> totals(static_cast<std::size_t>(M) * N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            double s = 0;
            for (int u = 0; u < U; ++u)
                s += alpha[static_cast<std::size_t>((m * U + u) * N + n)];
            totals[static_cast<std::size_t>(m * N + n)] = s;
        }
    return totals;
}

// True (unnormalized) objective value of the RB subproblem given totals.
double rb_objective(const RbLinkData& d, const Scenario& sc,
                    const std::vector<double>& totals,
                    const AllocationState& st) {
    const int M = d.devices, N = d.slots;
    double obj = 0;
    for (int n = 0; n < N; ++n) {
        double eta = 0;
        double t_agg = aggregation_latency_energy(sc.sum_model_bits(n),
                                                  sc.uav.cycles_per_bit,
                                                  st.f_uav[static_cast<std::size_t>(n)],
                                                  sc.uav.capacitance)
                           .latency;
        for (int m = 0; m < M; ++m) {
            const double a = totals[static_cast<std::size_t>(m * N + n)];
            eta = std::max(eta, d.at(d.t_train, m, n) + up_coeff(d, m, n) / a);
        }
        obj += M * (eta + t_agg);
        for (int m = 0; m < M; ++m)
            obj += dn_coeff(d, m, n) / totals[static_cast<std::size_t>(m * N + n)];
    }
    return obj;
}

// Degenerate case M == U: the minimum-share constraint forces one RB's worth
// of bandwidth per device; multipliers follow from stationarity directly.
RbSolution solve_forced(const Scenario& sc, const RbLinkData& d,
                        const AllocationState& st) {
    const int M = d.devices, N = d.slots, U = sc.channel.rb_count;
    RbSolution sol;
    sol.alpha_relaxed.assign(static_cast<std::size_t>(M) * U * N, 1.0 / U);
    std::vector<double> totals(static_cast<std::size_t>(M) * N, 1.0);
    sol.eta = optimal_eta(d, totals);

    auto& mult = sol.multipliers;
    mult.devices = M;
    mult.rbs = U;
    mult.slots = N;
    mult.rb_price.assign(static_cast<std::size_t>(U) * N, 0.0);
    mult.min_share_price.assign(static_cast<std::size_t>(M) * N, 0.0);
    mult.straggler_weight.assign(static_cast<std::size_t>(M) * N, 0.0);
    mult.device_energy_price.assign(static_cast<std::size_t>(M), 0.0);
    mult.uav_energy_price = 0.0;

    for (int n = 0; n < N; ++n) {
        // The bottleneck devices carry the straggler weight.
        int count = 0;
        for (int m = 0; m < M; ++m) {
            const double v = d.at(d.t_train, m, n) + up_coeff(d, m, n);
            if (v >= sol.eta[static_cast<std::size_t>(n)] - 1e-12) ++count;
        }
        for (int m = 0; m < M; ++m) {
            const double v = d.at(d.t_train, m, n) + up_coeff(d, m, n);
            mult.straggler_weight[static_cast<std::size_t>(m * N + n)] =
                (v >= sol.eta[static_cast<std::size_t>(n)] - 1e-12) ? 1.0 / count : 0.0;
        }
        double w_max = 0;
        std::vector<double> w(static_cast<std::size_t>(M), 0.0);
        for (int m = 0; m < M; ++m) {
            w[static_cast<std::size_t>(m)] = closed_form_w(mult, d, m, n);
            w_max = std::max(w_max, w[static_cast<std::size_t>(m)]);
        }
        const double price = static_cast<double>(U) * U * w_max;
        for (int u = 0; u < U; ++u)
            mult.rb_price[static_cast<std::size_t>(u * N + n)] = price;
        for (int m = 0; m < M; ++m)
            mult.min_share_price[static_cast<std::size_t>(m * N + n)] =
                price - static_cast<double>(U) * U * w[static_cast<std::size_t>(m)];
    }

    sol.relaxed_objective = rb_objective(d, sc, totals, st);
    sol.report.converged = true;
    sol.report.message = "forced by minimum-share constraints (M == U)";
    return sol;
}

}  // namespace

std::vector<double> optimal_eta(const RbLinkData& data,
                                const std::vector<double>& rb_totals) {
    const int M = data.devices, N = data.slots;
    std::vector<double> eta(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n) {
        double v = 0;
        for (int m = 0; m < M; ++m)
            v = std::max(v, data.at(data.t_train, m, n) +
                                up_coeff(data, m, n) /
                                    rb_totals[static_cast<std::size_t>(m * N + n)]);
        eta[static_cast<std::size_t>(n)] = v;
    }
    return eta;
}

double closed_form_w(const RbMultipliers& mult, const RbLinkData& data, int m, int n) {
    const double cup = up_coeff(data, m, n);
    const double cdn = dn_coeff(data, m, n);
    const double xi = mult.device_energy_price[static_cast<std::size_t>(m)];
    return (mult.mu(m, n) + xi * data.at(data.p_up, m, n)) * cup +
           (1.0 / mult.devices + mult.uav_energy_price * data.at(data.p_dn, m, n)) * cdn;
}

std::vector<double> closed_form_alpha(const RbMultipliers& mult, const RbLinkData& data) {
    const int M = mult.devices, U = mult.rbs, N = mult.slots;
    std::vector<double> alpha(static_cast<std::size_t>(M) * U * N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const double w = closed_form_w(mult, data, m, n);
            for (int u = 0; u < U; ++u) {
                const double den = mult.phi(u, n) - mult.varpi(m, n);
                double a;
                if (den <= 0.0) {
                    a = 1.0;  // price below the floor: saturate the share
                } else {
                    a = std::clamp(std::sqrt(w / den), 0.0, 1.0);
                }
                alpha[static_cast<std::size_t>((m * U + u) * N + n)] = a;
            }
        }
    return alpha;
}

RbSolution solve_relaxed(const Scenario& sc, const AllocationState& st,
                         const SolveOptions& opt) {
    const int M = sc.device_count();
    const int N = sc.slots;
    const int U = sc.channel.rb_count;
    const RbLinkData d = collect_rb_link_data(sc, st);

    if (M == U) return solve_forced(sc, d, st);

    // Reduced program over per-device totals a_{m,n} in [1, U] and the
    // per-slot bound eta_n; the objective is averaged per device so the
    // straggler weights land on the unit simplex.
    ConvexProgram prog;
    prog.dim = M * N + N;
    prog.init_free_box();
    auto a_idx = [N](int m, int n) { return m * N + n; };
    auto e_idx = [M, N](int n) { return M * N + n; };
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) prog.lower[a_idx(m, n)] = 1.0;
    for (int n = 0; n < N; ++n) prog.lower[e_idx(n)] = 0.0;

    {
        std::vector<SeparableTerm::Element> obj;
        for (int n = 0; n < N; ++n)
            obj.push_back({e_idx(n), 1.0, SeparableTerm::Atom::kIdentity});
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n)
                obj.push_back({a_idx(m, n), dn_coeff(d, m, n) / M,
                               SeparableTerm::Atom::kReciprocal});
        prog.objective = std::make_shared<SeparableTerm>(std::move(obj), 0.0);
    }

    for (int n = 0; n < N; ++n) {  // RB capacity per slot
        std::vector<int> vars;
        std::vector<double> coeffs;
        for (int m = 0; m < M; ++m) {
            vars.push_back(a_idx(m, n));
            coeffs.push_back(1.0);
        }
        prog.inequalities.push_back(std::make_shared<LinearTerm>(
            std::move(vars), std::move(coeffs), -static_cast<double>(U)));
        prog.inequality_names.push_back("capacity[" + std::to_string(n) + "]");
    }
    for (int m = 0; m < M; ++m)  // train + upload below eta
        for (int n = 0; n < N; ++n) {
            std::vector<SeparableTerm::Element> el{
                {a_idx(m, n), up_coeff(d, m, n), SeparableTerm::Atom::kReciprocal},
                {e_idx(n), -1.0, SeparableTerm::Atom::kIdentity}};
            prog.inequalities.push_back(
                std::make_shared<SeparableTerm>(std::move(el), d.at(d.t_train, m, n)));
            prog.inequality_names.push_back("eta[" + std::to_string(m) + "," +
                                            std::to_string(n) + "]");
        }
    for (int m = 0; m < M; ++m) {  // device energy budget
        std::vector<SeparableTerm::Element> el;
        double constant = -sc.devices[static_cast<std::size_t>(m)].energy_budget;
        for (int n = 0; n < N; ++n) {
            el.push_back({a_idx(m, n), d.at(d.p_up, m, n) * up_coeff(d, m, n),
                          SeparableTerm::Atom::kReciprocal});
            constant += d.at(d.e_train, m, n);
        }
        prog.inequalities.push_back(std::make_shared<SeparableTerm>(std::move(el), constant));
        prog.inequality_names.push_back("device_energy[" + std::to_string(m) + "]");
    }
    {  // UAV energy budget
        std::vector<SeparableTerm::Element> el;
        double constant = -sc.uav.energy_budget;
        for (int n = 0; n < N; ++n) {
            constant += d.e_agg[static_cast<std::size_t>(n)];
            for (int m = 0; m < M; ++m)
                el.push_back({a_idx(m, n), d.at(d.p_dn, m, n) * dn_coeff(d, m, n),
                              SeparableTerm::Atom::kReciprocal});
        }
        prog.inequalities.push_back(std::make_shared<SeparableTerm>(std::move(el), constant));
        prog.inequality_names.push_back("uav_energy");
    }

    VecX x0(prog.dim);
    const double a0 = 1.0 + 0.9 * (static_cast<double>(U) - M) / M;
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) x0[a_idx(m, n)] = a0;
    for (int n = 0; n < N; ++n) {
        double eta0 = 0;
        for (int m = 0; m < M; ++m)
            eta0 = std::max(eta0, d.at(d.t_train, m, n) + up_coeff(d, m, n) / a0);
        x0[e_idx(n)] = eta0 * 1.5 + 1e-9;
    }

    const SolveReport rep = solve(prog, x0, opt);

    RbSolution sol;
    sol.report = rep;
    if (!rep.converged && rep.x.size() != prog.dim)
        throw std::runtime_error("rb_allocation: relaxed solve failed: " + rep.message);

    std::vector<double> totals(static_cast<std::size_t>(M) * N, 0.0);
    sol.alpha_relaxed.assign(static_cast<std::size_t>(M) * U * N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const double a = rep.x[a_idx(m, n)];
            totals[static_cast<std::size_t>(m * N + n)] = a;
            for (int u = 0; u < U; ++u)
                sol.alpha_relaxed[static_cast<std::size_t>((m * U + u) * N + n)] = a / U;
        }
    sol.eta.assign(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n) sol.eta[static_cast<std::size_t>(n)] = rep.x[e_idx(n)];

    auto& mult = sol.multipliers;
    mult.devices = M;
    mult.rbs = U;
    mult.slots = N;
    mult.rb_price.assign(static_cast<std::size_t>(U) * N, 0.0);
    mult.min_share_price.assign(static_cast<std::size_t>(M) * N, 0.0);
    mult.straggler_weight.assign(static_cast<std::size_t>(M) * N, 0.0);
    mult.device_energy_price.assign(static_cast<std::size_t>(M), 0.0);
    const double u2 = static_cast<double>(U) * U;
    for (int n = 0; n < N; ++n) {
        const double price = u2 * rep.ineq_multipliers[n];
        for (int u = 0; u < U; ++u)
            mult.rb_price[static_cast<std::size_t>(u * N + n)] = price;
    }
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            mult.straggler_weight[static_cast<std::size_t>(m * N + n)] =
                rep.ineq_multipliers[N + m * N + n];
            mult.min_share_price[static_cast<std::size_t>(m * N + n)] =
                u2 * rep.box_lower_multipliers[a_idx(m, n)];
        }
    for (int m = 0; m < M; ++m)
        mult.device_energy_price[static_cast<std::size_t>(m)] =
            rep.ineq_multipliers[N + M * N + m];
    mult.uav_energy_price = rep.ineq_multipliers[N + M * N + M];

    sol.relaxed_objective = rb_objective(d, sc, totals, st);
    return sol;
}

RbReferenceSolution solve_relaxed_reference(const Scenario& sc, const AllocationState& st,
                                            const SolveOptions& opt) {
    const int M = sc.device_count();
    const int N = sc.slots;
    const int U = sc.channel.rb_count;
    if (M >= U)
        throw std::runtime_error(
            "rb_allocation: reference solve needs M < U (strict interior)");
    const RbLinkData d = collect_rb_link_data(sc, st);

    ConvexProgram prog;
    prog.dim = M * U * N + N;
    prog.init_free_box();
    auto al_idx = [U, N](int m, int u, int n) { return (m * U + u) * N + n; };
    auto e_idx = [M, U, N](int n) { return M * U * N + n; };
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) {
                prog.lower[al_idx(m, u, n)] = 0.0;
                prog.upper[al_idx(m, u, n)] = 1.0;
            }
    for (int n = 0; n < N; ++n) prog.lower[e_idx(n)] = 0.0;

    auto share_vars = [&](int m, int n) {
        std::vector<int> vars;
        for (int u = 0; u < U; ++u) vars.push_back(al_idx(m, u, n));
        return vars;
    };
    const std::vector<double> ones(static_cast<std::size_t>(U), 1.0);

    {
        std::vector<TermPtr> parts;
        std::vector<double> weights;
        std::vector<int> eta_vars;
        std::vector<double> eta_coeffs;
        for (int n = 0; n < N; ++n) {
            eta_vars.push_back(e_idx(n));
            eta_coeffs.push_back(1.0);
        }
        parts.push_back(std::make_shared<LinearTerm>(eta_vars, eta_coeffs, 0.0));
        weights.push_back(1.0);
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) {
                parts.push_back(std::make_shared<RecipOfLinearTerm>(
                    share_vars(m, n), ones, dn_coeff(d, m, n) / M, 0.0));
                weights.push_back(1.0);
            }
        prog.objective = std::make_shared<SumTerm>(std::move(parts), std::move(weights), 0.0);
    }

    for (int u = 0; u < U; ++u)  // (Ph) one device per RB
        for (int n = 0; n < N; ++n) {
            std::vector<int> vars;
            for (int m = 0; m < M; ++m) vars.push_back(al_idx(m, u, n));
            prog.inequalities.push_back(std::make_shared<LinearTerm>(
                std::move(vars), std::vector<double>(static_cast<std::size_t>(M), 1.0),
                -1.0));
            prog.inequality_names.push_back("rb_capacity");
        }
    for (int m = 0; m < M; ++m)  // (Pi) minimum one RB's worth of share
        for (int n = 0; n < N; ++n) {
            prog.inequalities.push_back(std::make_shared<LinearTerm>(
                share_vars(m, n), std::vector<double>(static_cast<std::size_t>(U), -1.0),
                1.0));
            prog.inequality_names.push_back("min_share");
        }
    for (int m = 0; m < M; ++m)  // train + upload below eta
        for (int n = 0; n < N; ++n) {
            std::vector<TermPtr> parts{
                std::make_shared<RecipOfLinearTerm>(share_vars(m, n), ones,
                                                    up_coeff(d, m, n), 0.0),
                std::make_shared<LinearTerm>(std::vector<int>{e_idx(n)},
                                             std::vector<double>{-1.0}, 0.0)};
            prog.inequalities.push_back(std::make_shared<SumTerm>(
                std::move(parts), std::vector<double>{1.0, 1.0}, d.at(d.t_train, m, n)));
            prog.inequality_names.push_back("eta");
        }
    for (int m = 0; m < M; ++m) {  // device energy
        std::vector<TermPtr> parts;
        double constant = -sc.devices[static_cast<std::size_t>(m)].energy_budget;
        for (int n = 0; n < N; ++n) {
            parts.push_back(std::make_shared<RecipOfLinearTerm>(
                share_vars(m, n), ones, d.at(d.p_up, m, n) * up_coeff(d, m, n), 0.0));
            constant += d.at(d.e_train, m, n);
        }
        prog.inequalities.push_back(std::make_shared<SumTerm>(
            std::move(parts),
            std::vector<double>(static_cast<std::size_t>(N), 1.0), constant));
        prog.inequality_names.push_back("device_energy");
    }
    {  // UAV energy
        std::vector<TermPtr> parts;
        double constant = -sc.uav.energy_budget;
        for (int n = 0; n < N; ++n) {
            constant += d.e_agg[static_cast<std::size_t>(n)];
            for (int m = 0; m < M; ++m)
                parts.push_back(std::make_shared<RecipOfLinearTerm>(
                    share_vars(m, n), ones, d.at(d.p_dn, m, n) * dn_coeff(d, m, n), 0.0));
        }
        const std::size_t k = parts.size();
        prog.inequalities.push_back(std::make_shared<SumTerm>(
            std::move(parts), std::vector<double>(k, 1.0), constant));
        prog.inequality_names.push_back("uav_energy");
    }

    VecX x0(prog.dim);
    const double a0 = (static_cast<double>(U) - 0.5 * (U - M)) / M;  // strict interior
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) x0[al_idx(m, u, n)] = a0 / U;
    for (int n = 0; n < N; ++n) {
        double eta0 = 0;
        for (int m = 0; m < M; ++m)
            eta0 = std::max(eta0, d.at(d.t_train, m, n) + up_coeff(d, m, n) / a0);
        x0[e_idx(n)] = eta0 * 1.5 + 1e-9;
    }

    const SolveReport rep = solve(prog, x0, opt);
    RbReferenceSolution ref;
    ref.report = rep;
    ref.alpha.assign(static_cast<std::size_t>(M) * U * N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n)
                ref.alpha[static_cast<std::size_t>((m * U + u) * N + n)] =
                    rep.x[al_idx(m, u, n)];
    ref.eta.assign(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n) ref.eta[static_cast<std::size_t>(n)] = rep.x[e_idx(n)];
    ref.objective = rb_objective(d, sc, totals_from_alpha(ref.alpha, M, U, N), st);
    return ref;
}

void reconstruct_binary(RbSolution& sol, const Scenario& sc, int chi) {
    if (chi < 1) throw std::invalid_argument("rb_allocation: chi must be >= 1");
    const int M = sc.device_count();
    const int N = sc.slots;
    const int U = sc.channel.rb_count;
    sol.chi = chi;
    sol.trimmed = false;
    sol.forced_assignment = false;
    sol.sub_rb_counts.assign(static_cast<std::size_t>(M) * N, 0);
    sol.sub_rb_owner.assign(static_cast<std::size_t>(chi) * U * N, -1);

    const long capacity = static_cast<long>(chi) * U;
    for (int n = 0; n < N; ++n) {
        std::vector<double> quota(static_cast<std::size_t>(M), 0.0);
        std::vector<long> count(static_cast<std::size_t>(M), 0);
        long total = 0;
        for (int m = 0; m < M; ++m) {
            double s = 0;
            for (int u = 0; u < U; ++u)
                s += sol.alpha_relaxed[static_cast<std::size_t>((m * U + u) * N + n)];
            quota[static_cast<std::size_t>(m)] = chi * s;
            long c = std::llround(chi * s);  // nearest integer
            if (c < 1) {
                c = 1;
                sol.forced_assignment = true;
            }
            count[static_cast<std::size_t>(m)] = c;
            total += c;
        }
        if (total > capacity) {
            // Largest-remainder reassignment: floors first, spare sub-RBs to
            // the devices with the largest fractional remainders.
            sol.trimmed = true;
            total = 0;
            std::vector<std::pair<double, int>> rem;
            for (int m = 0; m < M; ++m) {
                long base = std::max<long>(1, static_cast<long>(std::floor(
                                                  quota[static_cast<std::size_t>(m)])));
                count[static_cast<std::size_t>(m)] = base;
                total += base;
                rem.emplace_back(-(quota[static_cast<std::size_t>(m)] -
                                   std::floor(quota[static_cast<std::size_t>(m)])),
                                 m);
            }
            std::sort(rem.begin(), rem.end());  // descending remainder, then index
            long spare = capacity - total;
            for (const auto& [neg_r, m] : rem) {
                if (spare <= 0) break;
                ++count[static_cast<std::size_t>(m)];
                --spare;
            }
        }
        long cursor = 0;
        for (int m = 0; m < M; ++m) {
            sol.sub_rb_counts[static_cast<std::size_t>(m * N + n)] =
                static_cast<int>(count[static_cast<std::size_t>(m)]);
            for (long k = 0; k < count[static_cast<std::size_t>(m)] && cursor < capacity;
                 ++k, ++cursor)
                sol.sub_rb_owner[static_cast<std::size_t>(n) * capacity +
                                 static_cast<std::size_t>(cursor)] = m;
        }
    }
}

ThresholdedAllocation threshold_binarize(const RbSolution& sol, const Scenario& sc,
                                         double delta) {
    const int M = sc.device_count();
    const int N = sc.slots;
    const int U = sc.channel.rb_count;
    ThresholdedAllocation out;
    out.rb_counts.assign(static_cast<std::size_t>(M) * N, 0);

    for (int n = 0; n < N; ++n) {
        // Contiguous laydown of the relaxed totals across the RB axis, lowest
        // device index first.
        std::vector<double> start(static_cast<std::size_t>(M), 0.0);
        std::vector<double> stop(static_cast<std::size_t>(M), 0.0);
        double cursor = 0;
        for (int m = 0; m < M; ++m) {
            double total = 0;
            for (int u = 0; u < U; ++u)
                total += sol.alpha_relaxed[static_cast<std::size_t>((m * U + u) * N + n)];
            start[static_cast<std::size_t>(m)] = cursor;
            cursor = std::min(cursor + total, static_cast<double>(U));
            stop[static_cast<std::size_t>(m)] = cursor;
        }
        std::vector<int> owner(static_cast<std::size_t>(U), -1);
        std::vector<double> owner_frac(static_cast<std::size_t>(U), 0.0);
        for (int u = 0; u < U; ++u) {
            for (int m = 0; m < M; ++m) {
                const double lo = std::max<double>(u, start[static_cast<std::size_t>(m)]);
                const double hi =
                    std::min<double>(u + 1, stop[static_cast<std::size_t>(m)]);
                const double frac = hi - lo;
                if (frac < delta || frac <= 0.0) continue;
                if (owner[static_cast<std::size_t>(u)] >= 0) {
                    out.had_conflicts = true;
                    if (frac <= owner_frac[static_cast<std::size_t>(u)]) continue;
                }
                owner[static_cast<std::size_t>(u)] = m;
                owner_frac[static_cast<std::size_t>(u)] = frac;
            }
        }
        std::vector<int> counts(static_cast<std::size_t>(M), 0);
        for (int u = 0; u < U; ++u)
            if (owner[static_cast<std::size_t>(u)] >= 0)
                ++counts[static_cast<std::size_t>(owner[static_cast<std::size_t>(u)])];
        // Minimum-share repair: a device that lost every RB takes a free one,
        // or steals from the current largest holder.
        for (int m = 0; m < M; ++m) {
            if (counts[static_cast<std::size_t>(m)] > 0) continue;
            out.forced_assignment = true;
            int free_u = -1;
            for (int u = 0; u < U; ++u)
                if (owner[static_cast<std::size_t>(u)] < 0) {
                    free_u = u;
                    break;
                }
            if (free_u >= 0) {
                owner[static_cast<std::size_t>(free_u)] = m;
                ++counts[static_cast<std::size_t>(m)];
            } else {
                int rich = 0;
                for (int k = 1; k < M; ++k)
                    if (counts[static_cast<std::size_t>(k)] >
                        counts[static_cast<std::size_t>(rich)])
                        rich = k;
                for (int u = U - 1; u >= 0; --u)
                    if (owner[static_cast<std::size_t>(u)] == rich) {
                        owner[static_cast<std::size_t>(u)] = m;
                        break;
                    }
                --counts[static_cast<std::size_t>(rich)];
                ++counts[static_cast<std::size_t>(m)];
            }
        }
        for (int m = 0; m < M; ++m)
            out.rb_counts[static_cast<std::size_t>(m * N + n)] =
                counts[static_cast<std::size_t>(m)];
    }
    return out;
}

void apply_binary_allocation(const RbSolution& sol, AllocationState& st) {
    const int M = st.devices, N = st.slots;
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
            st.set_rb_total(m, n,
                            static_cast<double>(
                                sol.sub_rb_counts[static_cast<std::size_t>(m * N + n)]) /
                                sol.chi);
}

}  // namespace uavfl
