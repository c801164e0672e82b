#include "uavfl/trajectory_sca.hpp"

#include <algorithm>
#include <cmath>

namespace uavfl {

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

double RateSurrogate::exact_rate(double delta) const {
    return bw * std::log2(1.0 + p_coeff / delta);
}

double RateSurrogate::value(double delta) const {
    return bw * (std::log2(delta + p_coeff) - std::log2(delta_ref) -
                 (delta - delta_ref) / (delta_ref * kLn2));
}

double RateSurrogate::derivative(double delta) const {
    return bw * (1.0 / ((delta + p_coeff) * kLn2) - 1.0 / (delta_ref * kLn2));
}

double RateSurrogate::second_derivative(double delta) const {
    return -bw / ((delta + p_coeff) * (delta + p_coeff) * kLn2);
}

RateSurrogate linearize_rate_lb(double delta_ref, double rb_share_total, double p_tx,
                                double ref_gain, double rb_bandwidth, double noise) {
    if (delta_ref <= 0.0)
        throw std::invalid_argument("trajectory: nonpositive expansion point");
    RateSurrogate s;
    s.bw = rb_share_total * rb_bandwidth;
    s.p_coeff = p_tx * ref_gain / (rb_bandwidth * noise);
    s.delta_ref = delta_ref;
    return s;
}

VminConstraint linearize_vmin(const Vec2& q_ref_curr, const Vec2& q_ref_prev, double v_min,
                              double t_fl) {
    VminConstraint c;
    c.dq_ref = q_ref_curr - q_ref_prev;
    c.constant = (v_min * t_fl) * (v_min * t_fl) + c.dq_ref.squaredNorm();
    return c;
}

DistanceBound linearize_distance(const Vec2& q_ref, const Vec2& device_pos,
                                 double altitude) {
    DistanceBound b;
    b.q_ref = q_ref;
    b.gradient = 2.0 * (q_ref - device_pos);
    b.at_ref = altitude * altitude + (q_ref - device_pos).squaredNorm();
    return b;
}

namespace {

// coeff / surrogate_rate(q) with the slack pinned to the squared distance.
// Support is the (x, y) pair of one interior slot; for fixed endpoint slots
// the term is a constant computed by the caller.
class RateRecipTerm final : public Term {
public:
    RateRecipTerm(int var_x, int var_y, Vec2 device_pos, double altitude_sq,
                  RateSurrogate surrogate, double coeff)
        : vx_(var_x), vy_(var_y), s_(std::move(device_pos)), h2_(altitude_sq),
          sur_(surrogate), coeff_(coeff) {}

    double eval(const VecX& x, SparseGrad* grad) const override {
        const Vec2 q(x[vx_], x[vy_]);
        const double delta = h2_ + (q - s_).squaredNorm();
        const double r = sur_.value(delta);
        const double v = coeff_ / r;
        if (grad) {
            grad->clear();
            const double dr = sur_.derivative(delta);
            const Vec2 ddelta = 2.0 * (q - s_);
            const double dv = -coeff_ / (r * r) * dr;
            grad->emplace_back(vx_, dv * ddelta.x());
            grad->emplace_back(vy_, dv * ddelta.y());
        }
        return v;
    }

    void add_hessian(const VecX& x, double w, MatX& hess) const override {
        const Vec2 q(x[vx_], x[vy_]);
        const double delta = h2_ + (q - s_).squaredNorm();
        const double r = sur_.value(delta);
        const double dr = sur_.derivative(delta);
        const double d2r = sur_.second_derivative(delta);
        const Vec2 dd = 2.0 * (q - s_);
        // value = coeff / r(delta(q)); assemble the 2x2 chain-rule block.
        const double dv_ddelta = -coeff_ * dr / (r * r);
        const double d2v_ddelta2 = coeff_ * (2.0 * dr * dr / (r * r * r) - d2r / (r * r));
        Eigen::Matrix2d block = d2v_ddelta2 * dd * dd.transpose();
        block += dv_ddelta * 2.0 * Eigen::Matrix2d::Identity();
        hess(vx_, vx_) += w * block(0, 0);
        hess(vx_, vy_) += w * block(0, 1);
        hess(vy_, vx_) += w * block(1, 0);
        hess(vy_, vy_) += w * block(1, 1);
    }

    bool in_domain(const VecX& x) const override {
        const Vec2 q(x[vx_], x[vy_]);
        const double delta = h2_ + (q - s_).squaredNorm();
        return sur_.value(delta) > 0.0;
    }

private:
    int vx_, vy_;
    Vec2 s_;
    double h2_;
    RateSurrogate sur_;
    double coeff_;
};

struct LinkGeometry {
    double share = 0;  // RB share total
    RateSurrogate up;
    RateSurrogate down;
};

}  // namespace

TrajectoryStepResult solve_trajectory_step(const Scenario& sc, const AllocationState& st,
                                           const SolveOptions& opt) {
    const int M = sc.device_count();
    const int N = sc.slots;
    const double h2 = sc.uav.altitude * sc.uav.altitude;

    // Frozen slot durations and expansion points at the current iterate.
    const LatencyBreakdown ref = evaluate(sc, st);
    TrajectoryStepResult out;
    out.iterate.t_fl_frozen = ref.t_fl;
    if (!ref.feasible) {
        out.report.message = "trajectory: reference iterate is infeasible";
        return out;
    }

    std::vector<LinkGeometry> geo(static_cast<std::size_t>(M) * N);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            auto& g = geo[static_cast<std::size_t>(m * N + n)];
            g.share = st.rb_total(m, n);
            const double delta_ref =
                h2 + (st.traj[static_cast<std::size_t>(n)] -
                      sc.devices[static_cast<std::size_t>(m)].position)
                         .squaredNorm();
            g.up = linearize_rate_lb(delta_ref, g.share, st.at_pdev(m, n),
                                     sc.channel.ref_gain, sc.channel.rb_bandwidth,
                                     sc.channel.noise_uplink);
            g.down = linearize_rate_lb(delta_ref, g.share, st.at_puav(m, n),
                                       sc.channel.ref_gain, sc.channel.rb_bandwidth,
                                       sc.channel.noise_downlink);
        }

    // Variables: interior waypoints, then one eta per slot.
    ConvexProgram prog;
    const int q_vars = 2 * (N - 2);
    prog.dim = q_vars + N;
    prog.init_free_box();
    auto qx = [](int n) { return 2 * (n - 1); };      // valid for 1 <= n <= N-2
    auto qy = [](int n) { return 2 * (n - 1) + 1; };
    auto e_idx = [q_vars](int n) { return q_vars + n; };
    for (int n = 0; n < N; ++n) prog.lower[e_idx(n)] = 0.0;
    const bool movable[2] = {false, false};
    (void)movable;
    auto is_free = [N](int n) { return n >= 1 && n <= N - 2; };
    auto fixed_q = [&](int n) {
        return n == 0 ? sc.uav.start : sc.uav.end;
    };

    auto up_term = [&](int m, int n, double coeff) -> TermPtr {
        const auto& g = geo[static_cast<std::size_t>(m * N + n)];
        if (is_free(n))
            return std::make_shared<RateRecipTerm>(
                qx(n), qy(n), sc.devices[static_cast<std::size_t>(m)].position, h2, g.up,
                coeff);
        const double delta =
            h2 + (fixed_q(n) - sc.devices[static_cast<std::size_t>(m)].position)
                     .squaredNorm();
        return std::make_shared<LinearTerm>(std::vector<int>{}, std::vector<double>{},
                                            coeff / g.up.value(delta));
    };
    auto down_term = [&](int m, int n, double coeff) -> TermPtr {
        const auto& g = geo[static_cast<std::size_t>(m * N + n)];
        if (is_free(n))
            return std::make_shared<RateRecipTerm>(
                qx(n), qy(n), sc.devices[static_cast<std::size_t>(m)].position, h2, g.down,
                coeff);
        const double delta =
            h2 + (fixed_q(n) - sc.devices[static_cast<std::size_t>(m)].position)
                     .squaredNorm();
        return std::make_shared<LinearTerm>(std::vector<int>{}, std::vector<double>{},
                                            coeff / g.down.value(delta));
    };

    // Objective: M * sum eta + downlink transfer latencies (aggregation time
    // is constant while f is fixed).
    {
        std::vector<TermPtr> parts;
        std::vector<double> weights;
        std::vector<int> eta_vars;
        for (int n = 0; n < N; ++n) eta_vars.push_back(e_idx(n));
        parts.push_back(std::make_shared<LinearTerm>(
            eta_vars, std::vector<double>(static_cast<std::size_t>(N), double(M)), 0.0));
        weights.push_back(1.0);
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) {
                parts.push_back(down_term(
                    m, n, sc.agg_bits[static_cast<std::size_t>(n)]));
                weights.push_back(1.0);
            }
        prog.objective = std::make_shared<SumTerm>(std::move(parts), std::move(weights), 0.0);
    }

    // Train + upload below eta.
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const double t_train = ref.at(ref.t_train, m, n);
            std::vector<TermPtr> parts{
                up_term(m, n, sc.model_bits[static_cast<std::size_t>(m)]
                                           [static_cast<std::size_t>(n)]),
                std::make_shared<LinearTerm>(std::vector<int>{e_idx(n)},
                                             std::vector<double>{-1.0}, 0.0)};
            prog.inequalities.push_back(std::make_shared<SumTerm>(
                std::move(parts), std::vector<double>{1.0, 1.0}, t_train));
            prog.inequality_names.push_back("eta");
        }
    // Device energy budgets (training energy constant here).
    for (int m = 0; m < M; ++m) {
        std::vector<TermPtr> parts;
        double constant = -sc.devices[static_cast<std::size_t>(m)].energy_budget;
        for (int n = 0; n < N; ++n) {
            constant += ref.at(ref.e_train, m, n);
            parts.push_back(up_term(m, n,
                                    st.at_pdev(m, n) *
                                        sc.model_bits[static_cast<std::size_t>(m)]
                                                     [static_cast<std::size_t>(n)]));
        }
        prog.inequalities.push_back(std::make_shared<SumTerm>(
            std::move(parts), std::vector<double>(static_cast<std::size_t>(N), 1.0),
            constant));
        prog.inequality_names.push_back("device_energy");
    }
    // UAV energy budget.
    {
        std::vector<TermPtr> parts;
        double constant = -sc.uav.energy_budget;
        for (int n = 0; n < N; ++n) {
            constant += ref.e_agg[static_cast<std::size_t>(n)];
            for (int m = 0; m < M; ++m)
                parts.push_back(down_term(
                    m, n, st.at_puav(m, n) * sc.agg_bits[static_cast<std::size_t>(n)]));
        }
        const std::size_t k = parts.size();
        prog.inequalities.push_back(
            std::make_shared<SumTerm>(std::move(parts), std::vector<double>(k, 1.0),
                                      constant));
        prog.inequality_names.push_back("uav_energy");
    }

    // Kinematics with frozen slot durations. Velocity rows start at slot 2
    // (index 1) and acceleration rows at slot 3 (index 2). Each constraint is
    // ||A q_sub + b||^2 + c <= 0 where the affine part collects scaled slot
    // differences with fixed endpoints folded into b.
    struct AffineBuilder {
        std::vector<int> vars;
        std::vector<std::pair<int, double>> xcol;  // (column, coeff) on row 0
        std::vector<std::pair<int, double>> ycol;  // row 1
        Vec2 offset = Vec2::Zero();

        void add_var_pair(int var_x, int var_y, double scale) {
            vars.push_back(var_x);
            xcol.emplace_back(static_cast<int>(vars.size()) - 1, scale);
            vars.push_back(var_y);
            ycol.emplace_back(static_cast<int>(vars.size()) - 1, scale);
        }
        TermPtr build(double constant) const {
            MatX a = MatX::Zero(2, static_cast<Eigen::Index>(vars.size()));
            for (const auto& [col, v] : xcol) a(0, col) = v;
            for (const auto& [col, v] : ycol) a(1, col) = v;
            VecX b(2);
            b << offset.x(), offset.y();
            return std::make_shared<SquaredAffineTerm>(vars, a, b, constant);
        }
    };
    auto add_diff = [&](AffineBuilder& ab, int n_curr, int n_prev, double scale) {
        // Adds scale * (q[n_curr] - q[n_prev]).
        if (is_free(n_curr))
            ab.add_var_pair(qx(n_curr), qy(n_curr), scale);
        else
            ab.offset += scale * fixed_q(n_curr);
        if (is_free(n_prev))
            ab.add_var_pair(qx(n_prev), qy(n_prev), -scale);
        else
            ab.offset -= scale * fixed_q(n_prev);
    };

    for (int n = 1; n < N; ++n) {
        const double dt = out.iterate.t_fl_frozen[static_cast<std::size_t>(n - 1)];
        // Maximum speed: ||q[n] - q[n-1]||^2 <= (v_max dt)^2.
        {
            AffineBuilder ab;
            add_diff(ab, n, n - 1, 1.0);
            prog.inequalities.push_back(
                ab.build(-(sc.uav.v_max * dt) * (sc.uav.v_max * dt)));
            prog.inequality_names.push_back("v_max[" + std::to_string(n) + "]");
        }
        // Minimum speed, linearized at the iterate.
        {
            const VminConstraint lc = linearize_vmin(
                st.traj[static_cast<std::size_t>(n)], st.traj[static_cast<std::size_t>(n - 1)],
                sc.uav.v_min, dt);
            std::vector<int> vars;
            std::vector<double> coeffs;
            double constant = lc.constant;
            if (is_free(n)) {
                vars.push_back(qx(n));
                coeffs.push_back(-2.0 * lc.dq_ref.x());
                vars.push_back(qy(n));
                coeffs.push_back(-2.0 * lc.dq_ref.y());
            } else {
                constant += -2.0 * lc.dq_ref.dot(fixed_q(n));
            }
            if (is_free(n - 1)) {
                vars.push_back(qx(n - 1));
                coeffs.push_back(2.0 * lc.dq_ref.x());
                vars.push_back(qy(n - 1));
                coeffs.push_back(2.0 * lc.dq_ref.y());
            } else {
                constant += 2.0 * lc.dq_ref.dot(fixed_q(n - 1));
            }
            prog.inequalities.push_back(
                std::make_shared<LinearTerm>(std::move(vars), std::move(coeffs), constant));
            prog.inequality_names.push_back("v_min[" + std::to_string(n) + "]");
        }
    }
    for (int n = 2; n < N; ++n) {
        const double dt1 = out.iterate.t_fl_frozen[static_cast<std::size_t>(n - 1)];
        const double dt2 = out.iterate.t_fl_frozen[static_cast<std::size_t>(n - 2)];
        // ||v[n] - v[n-1]||^2 <= (a_max dt1)^2.
        AffineBuilder ab;
        add_diff(ab, n, n - 1, 1.0 / dt1);
        add_diff(ab, n - 1, n - 2, -1.0 / dt2);
        prog.inequalities.push_back(
            ab.build(-(sc.uav.a_max * dt1) * (sc.uav.a_max * dt1)));
        prog.inequality_names.push_back("a_max[" + std::to_string(n) + "]");
    }

    // Start at the current iterate with a slightly lifted eta.
    VecX x0(prog.dim);
    for (int n = 1; n <= N - 2; ++n) {
        x0[qx(n)] = st.traj[static_cast<std::size_t>(n)].x();
        x0[qy(n)] = st.traj[static_cast<std::size_t>(n)].y();
    }
    for (int n = 0; n < N; ++n) {
        double eta0 = 0;
        for (int m = 0; m < M; ++m)
            eta0 = std::max(eta0, ref.at(ref.t_train, m, n) + ref.at(ref.t_up, m, n));
        x0[e_idx(n)] = eta0 * (1.0 + 1e-6) + 1e-12;
    }

    out.report = solve(prog, x0, opt);
    const bool phase1_failed = out.report.message.find("infeasible") != std::string::npos;
    out.solved = out.report.x.size() == prog.dim && !phase1_failed &&
                 (out.report.converged || out.report.max_violation <= opt.feas_tol);
    if (!out.solved) return out;

    out.iterate.traj = st.traj;
    for (int n = 1; n <= N - 2; ++n)
        out.iterate.traj[static_cast<std::size_t>(n)] =
            Vec2(out.report.x[qx(n)], out.report.x[qy(n)]);
    out.iterate.eta.assign(static_cast<std::size_t>(N), 0.0);
    for (int n = 0; n < N; ++n)
        out.iterate.eta[static_cast<std::size_t>(n)] = out.report.x[e_idx(n)];
    out.iterate.delta.assign(static_cast<std::size_t>(M) * N, 0.0);
    out.iterate.rate_up.assign(static_cast<std::size_t>(M) * N, 0.0);
    out.iterate.rate_down.assign(static_cast<std::size_t>(M) * N, 0.0);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n) {
            const Vec2 q = out.iterate.traj[static_cast<std::size_t>(n)];
            const double delta =
                h2 +
                (q - sc.devices[static_cast<std::size_t>(m)].position).squaredNorm();
            const auto& g = geo[static_cast<std::size_t>(m * N + n)];
            out.iterate.delta[static_cast<std::size_t>(m * N + n)] = delta;
            out.iterate.rate_up[static_cast<std::size_t>(m * N + n)] = g.up.value(delta);
            out.iterate.rate_down[static_cast<std::size_t>(m * N + n)] =
                g.down.value(delta);
        }
    return out;
}

ScaResult run_sca(const Scenario& sc, AllocationState& st, const ScaOptions& opt) {
    ScaResult res;
    LatencyBreakdown bd = evaluate(sc, st);
    if (!bd.feasible) {
        res.message = "sca: starting state is infeasible";
        res.traj = st.traj;
        return res;
    }
    double obj = bd.objective;
    res.objectives.push_back(obj);

    for (int it = 0; it < opt.max_iterations; ++it) {
        TrajectoryStepResult step = solve_trajectory_step(sc, st, opt.solver);
        res.iterations = it + 1;
        if (!step.solved) {
            res.message = "sca: inner solve failed (" + step.report.message + ")";
            break;
        }
        AllocationState cand = st;
        cand.traj = step.iterate.traj;
        const LatencyBreakdown cand_bd = evaluate(sc, cand);
        if (!cand_bd.feasible || cand_bd.objective > obj + 1e-9 * std::abs(obj)) {
            // The surrogate never predicts an increase; treat as a fixed point.
            res.converged = true;
            break;
        }
        st.traj = step.iterate.traj;
        for (int n = 0; n < sc.slots; ++n) {
            double eta = 0;
            for (int m = 0; m < sc.device_count(); ++m)
                eta = std::max(eta,
                               cand_bd.at(cand_bd.t_train, m, n) + cand_bd.at(cand_bd.t_up, m, n));
            st.eta[static_cast<std::size_t>(n)] = eta;
        }
        const double prev = obj;
        obj = cand_bd.objective;
        res.objectives.push_back(obj);
        if (prev - obj < opt.rel_tol * std::abs(prev)) {
            res.converged = true;
            break;
        }
    }

    res.traj = st.traj;
    bd = evaluate(sc, st);
    res.final_kinematics =
        kinematics_check(st.traj, bd.t_fl, sc.uav.v_min, sc.uav.v_max, sc.uav.a_max);
    return res;
}

}  // namespace uavfl
