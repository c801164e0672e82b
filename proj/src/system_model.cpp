#include "uavfl/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace uavfl {

AllocationState AllocationState::sized(int m, int u, int n) {
    AllocationState st;
    st.devices = m;
    st.rbs = u;
    st.slots = n;
    st.alpha.assign(static_cast<std::size_t>(m) * u * n, 0.0);
    st.f_dev.assign(static_cast<std::size_t>(m) * n, 0.0);
    st.f_uav.assign(static_cast<std::size_t>(n), 0.0);
    st.p_dev.assign(static_cast<std::size_t>(m) * n, 0.0);
    st.p_uav.assign(static_cast<std::size_t>(m) * n, 0.0);
    st.traj.assign(static_cast<std::size_t>(n), Vec2::Zero());
    st.eta.assign(static_cast<std::size_t>(n), 0.0);
    return st;
}

double channel_gain(const Vec2& uav_xy, const Vec2& device_xy, double altitude,
                    double ref_gain) {
    const double d2 = altitude * altitude + (uav_xy - device_xy).squaredNorm();
    return ref_gain / d2;
}

double uplink_rate(double rb_share_total, double p_tx, double gain, double rb_bandwidth,
                   double noise) {
    if (rb_share_total <= 0.0 || p_tx <= 0.0) return 0.0;
    const double snr = p_tx * gain / (rb_bandwidth * noise);
    return rb_share_total * rb_bandwidth * std::log2(1.0 + snr);
}

double downlink_rate(double rb_share_total, double p_tx, double gain, double rb_bandwidth,
                     double noise) {
    return uplink_rate(rb_share_total, p_tx, gain, rb_bandwidth, noise);
}

LatencyEnergy train_latency_energy(double data_bits, double cycles_per_bit,
                                   int local_rounds, double freq, double capacitance) {
    LatencyEnergy out;
    const double work = data_bits * cycles_per_bit * local_rounds;
    if (work <= 0.0) return out;  // no work, no latency
    if (freq <= 0.0) {
        out.feasible = false;
        return out;
    }
    out.latency = work / freq;
    out.energy = capacitance * freq * freq * work;  // kappa f^3 T = kappa f^2 work
    return out;
}

LatencyEnergy aggregation_latency_energy(double total_bits, double cycles_per_bit,
                                         double freq, double capacitance) {
    return train_latency_energy(total_bits, cycles_per_bit, 1, freq, capacitance);
}

LatencyBreakdown evaluate(const Scenario& sc, const AllocationState& st) {
    const int M = sc.device_count();
    const int N = sc.slots;
    LatencyBreakdown bd;
    bd.devices = M;
    bd.slots = N;
    const std::size_t mn = static_cast<std::size_t>(M) * N;
    bd.t_train.assign(mn, 0.0);
    bd.t_up.assign(mn, 0.0);
    bd.t_wait.assign(mn, 0.0);
    bd.t_down.assign(mn, 0.0);
    bd.e_train.assign(mn, 0.0);
    bd.e_up.assign(mn, 0.0);
    bd.e_down.assign(mn, 0.0);
    bd.t_agg.assign(static_cast<std::size_t>(N), 0.0);
    bd.e_agg.assign(static_cast<std::size_t>(N), 0.0);
    bd.t_fl.assign(static_cast<std::size_t>(N), 0.0);
    bd.latency.assign(mn, 0.0);

    auto idx = [N](int m, int n) { return static_cast<std::size_t>(m * N + n); };

    for (int n = 0; n < N; ++n) {
        double max_train_up = 0.0;
        double max_down = 0.0;
        for (int m = 0; m < M; ++m) {
            const auto& dev = sc.devices[static_cast<std::size_t>(m)];
            const auto tr = train_latency_energy(sc.train_bits(m, n), dev.cycles_per_bit,
                                                 dev.local_rounds, st.at_fdev(m, n),
                                                 dev.capacitance);
            if (!tr.feasible) {
                bd.feasible = false;
                bd.diagnostics.push_back("device " + std::to_string(m) + " slot " +
                                         std::to_string(n) +
                                         ": zero frequency with training work");
            }
            bd.t_train[idx(m, n)] = tr.latency;
            bd.e_train[idx(m, n)] = tr.energy;

            const double gain = channel_gain(st.traj[static_cast<std::size_t>(n)],
                                             dev.position, sc.uav.altitude,
                                             sc.channel.ref_gain);
            const double share = st.rb_total(m, n);
            const double d_up = sc.model_bits[static_cast<std::size_t>(m)]
                                             [static_cast<std::size_t>(n)];
            const double r_up = uplink_rate(share, st.at_pdev(m, n), gain,
                                            sc.channel.rb_bandwidth, sc.channel.noise_uplink);
            if (r_up <= 0.0 && d_up > 0.0) {
                bd.feasible = false;
                bd.diagnostics.push_back("device " + std::to_string(m) + " slot " +
                                         std::to_string(n) +
                                         ": zero uplink rate with positive payload");
            } else if (d_up > 0.0) {
                bd.t_up[idx(m, n)] = d_up / r_up;
                bd.e_up[idx(m, n)] = st.at_pdev(m, n) * bd.t_up[idx(m, n)];
            }

            const double d_dn = sc.agg_bits[static_cast<std::size_t>(n)];
            const double r_dn = downlink_rate(share, st.at_puav(m, n), gain,
                                              sc.channel.rb_bandwidth,
                                              sc.channel.noise_downlink);
            if (r_dn <= 0.0 && d_dn > 0.0) {
                bd.feasible = false;
                bd.diagnostics.push_back("device " + std::to_string(m) + " slot " +
                                         std::to_string(n) +
                                         ": zero downlink rate with positive payload");
            } else if (d_dn > 0.0) {
                bd.t_down[idx(m, n)] = d_dn / r_dn;
                bd.e_down[idx(m, n)] = st.at_puav(m, n) * bd.t_down[idx(m, n)];
            }

            max_train_up = std::max(max_train_up, bd.t_train[idx(m, n)] + bd.t_up[idx(m, n)]);
            max_down = std::max(max_down, bd.t_down[idx(m, n)]);
        }

        const auto agg = aggregation_latency_energy(sc.sum_model_bits(n),
                                                    sc.uav.cycles_per_bit,
                                                    st.f_uav[static_cast<std::size_t>(n)],
                                                    sc.uav.capacitance);
        if (!agg.feasible) {
            bd.feasible = false;
            bd.diagnostics.push_back("slot " + std::to_string(n) +
                                     ": zero UAV frequency with aggregation work");
        }
        bd.t_agg[static_cast<std::size_t>(n)] = agg.latency;
        bd.e_agg[static_cast<std::size_t>(n)] = agg.energy;
        bd.t_fl[static_cast<std::size_t>(n)] = max_train_up + agg.latency + max_down;

        for (int m = 0; m < M; ++m) {
            bd.t_wait[idx(m, n)] = max_train_up - (bd.t_train[idx(m, n)] + bd.t_up[idx(m, n)]);
            bd.latency[idx(m, n)] = bd.t_train[idx(m, n)] + bd.t_up[idx(m, n)] +
                                    bd.t_wait[idx(m, n)] + agg.latency + bd.t_down[idx(m, n)];
            bd.objective += bd.latency[idx(m, n)];
        }
    }
    return bd;
}

FeasibilityReport kinematics_check(const std::vector<Vec2>& traj,
                                   const std::vector<double>& t_fl, double v_min,
                                   double v_max, double a_max) {
    FeasibilityReport rep;
    const int N = static_cast<int>(traj.size());
    std::vector<Vec2> vel(static_cast<std::size_t>(N), Vec2::Zero());
    // Slot 1 has no velocity constraint and slots 1-2 no acceleration
    // constraint; indices follow the n \ {1} and n \ {1,2} exclusions.
    for (int n = 1; n < N; ++n) {
        const double dt = t_fl[static_cast<std::size_t>(n - 1)];
        if (dt <= 0.0) continue;
        vel[static_cast<std::size_t>(n)] =
            (traj[static_cast<std::size_t>(n)] - traj[static_cast<std::size_t>(n - 1)]) / dt;
        const double speed = vel[static_cast<std::size_t>(n)].norm();
        rep.entries.push_back({"v_max", -1, n, speed, v_max, v_max - speed});
        rep.entries.push_back({"v_min", -1, n, speed, v_min, speed - v_min});
    }
    for (int n = 2; n < N; ++n) {
        const double dt = t_fl[static_cast<std::size_t>(n - 1)];
        if (dt <= 0.0) continue;
        const double acc =
            (vel[static_cast<std::size_t>(n)] - vel[static_cast<std::size_t>(n - 1)]).norm() /
            dt;
        rep.entries.push_back({"a_max", -1, n, acc, a_max, a_max - acc});
    }
    for (const auto& e : rep.entries) {
        if (e.margin < 0.0) {
            rep.feasible = false;
            const double scale = std::max(std::abs(e.bound), 1e-12);
            rep.worst_relative_violation =
                std::max(rep.worst_relative_violation, -e.margin / scale);
        }
    }
    std::stable_sort(rep.entries.begin(), rep.entries.end(),
                     [](const ViolationEntry& a, const ViolationEntry& b) {
                         return a.margin < b.margin;
                     });
    return rep;
}

FeasibilityReport energy_feasibility(const Scenario& sc, const LatencyBreakdown& bd) {
    FeasibilityReport rep;
    const int M = sc.device_count();
    const int N = sc.slots;
    for (int m = 0; m < M; ++m) {
        double used = 0;
        for (int n = 0; n < N; ++n)
            used += bd.at(bd.e_train, m, n) + bd.at(bd.e_up, m, n);
        const double budget = sc.devices[static_cast<std::size_t>(m)].energy_budget;
        rep.entries.push_back({"device_energy", m, -1, used, budget, budget - used});
    }
    double uav_used = 0;
    for (int n = 0; n < N; ++n) {
        uav_used += bd.e_agg[static_cast<std::size_t>(n)];
        for (int m = 0; m < M; ++m) uav_used += bd.at(bd.e_down, m, n);
    }
    rep.entries.push_back({"uav_energy", -1, -1, uav_used, sc.uav.energy_budget,
                           sc.uav.energy_budget - uav_used});
    for (const auto& e : rep.entries) {
        if (e.margin < 0.0) {
            rep.feasible = false;
            const double scale = std::max(std::abs(e.bound), 1e-12);
            rep.worst_relative_violation =
                std::max(rep.worst_relative_violation, -e.margin / scale);
        }
    }
    std::stable_sort(rep.entries.begin(), rep.entries.end(),
                     [](const ViolationEntry& a, const ViolationEntry& b) {
                         return a.margin < b.margin;
                     });
    return rep;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}
}  // namespace

std::string LatencyBreakdown::to_csv() const {
    std::ostringstream os;
    os << "device,slot,t_train,t_up,t_wait,t_agg,t_down,latency,e_train,e_up,e_down\n";
    for (int m = 0; m < devices; ++m)
        for (int n = 0; n < slots; ++n)
            os << m << ',' << n << ',' << fmt(at(t_train, m, n)) << ',' << fmt(at(t_up, m, n))
               << ',' << fmt(at(t_wait, m, n)) << ',' << fmt(t_agg[static_cast<std::size_t>(n)])
               << ',' << fmt(at(t_down, m, n)) << ',' << fmt(at(latency, m, n)) << ','
               << fmt(at(e_train, m, n)) << ',' << fmt(at(e_up, m, n)) << ','
               << fmt(at(e_down, m, n)) << '\n';
    return os.str();
}

std::string LatencyBreakdown::to_json() const {
    nlohmann::ordered_json j;
    j["devices"] = devices;
    j["slots"] = slots;
    j["feasible"] = feasible;
    j["objective"] = objective;
    j["t_train"] = t_train;
    j["t_up"] = t_up;
    j["t_wait"] = t_wait;
    j["t_agg"] = t_agg;
    j["t_down"] = t_down;
    j["t_fl"] = t_fl;
    j["e_train"] = e_train;
    j["e_up"] = e_up;
    j["e_agg"] = e_agg;
    j["e_down"] = e_down;
    j["latency"] = latency;
    if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
    return j.dump(2);
}

}  // namespace uavfl
