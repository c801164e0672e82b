#include "uavfl/fl_convergence.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace uavfl {

double local_rounds_bound(double smoothness, double strong_convexity, double step_size,
                          double eps_local) {
    if (step_size <= 0.0 || step_size > 2.0 / smoothness)
        throw std::invalid_argument("local_rounds_bound: need 0 < step <= 2/L");
    if (eps_local <= 0.0 || eps_local > 1.0)
        throw std::invalid_argument("local_rounds_bound: need eps in (0, 1]");
    return 2.0 / (step_size * strong_convexity * (2.0 - smoothness * step_size)) *
           std::log(1.0 / eps_local);
}

double global_rounds_bound(double smoothness, double strong_convexity,
                           double surrogate_weight, double eps_local, double eps_global) {
    if (surrogate_weight <= 0.0 || surrogate_weight > strong_convexity / smoothness)
        throw std::invalid_argument("global_rounds_bound: need 0 < varrho <= Upsilon/L");
    if (eps_local <= 0.0 || eps_local >= 1.0)
        throw std::invalid_argument("global_rounds_bound: need eps_local in (0, 1)");
    if (eps_global <= 0.0 || eps_global > 1.0)
        throw std::invalid_argument("global_rounds_bound: need eps_global in (0, 1]");
    return 2.0 * smoothness * smoothness /
           (strong_convexity * strong_convexity * surrogate_weight * (1.0 - eps_local)) *
           std::log(1.0 / eps_global);
}

RoundBounds make_round_bounds(double smoothness, double strong_convexity,
                              double step_size, double surrogate_weight, double eps_local,
                              double eps_global) {
    RoundBounds rb;
    rb.smoothness = smoothness;
    rb.strong_convexity = strong_convexity;
    rb.step_size = step_size;
    rb.surrogate_weight = surrogate_weight;
    rb.eps_local = eps_local;
    rb.eps_global = eps_global;
    rb.local_rounds = local_rounds_bound(smoothness, strong_convexity, step_size, eps_local);
    rb.global_rounds = global_rounds_bound(smoothness, strong_convexity, surrogate_weight,
                                           eps_local, eps_global);
    return rb;
}

double SyntheticFlTask::global_loss(const Eigen::VectorXd& theta, bool weighted) const {
    double total = 0, wsum = 0;
    for (int m = 0; m < device_count(); ++m) {
        const double w = weighted ? data_weight[static_cast<std::size_t>(m)] : 1.0;
        total += w * (0.5 * theta.dot(quad[static_cast<std::size_t>(m)] * theta) +
                      linear[static_cast<std::size_t>(m)].dot(theta));
        wsum += w;
    }
    return total / wsum;
}

Eigen::VectorXd SyntheticFlTask::global_gradient(const Eigen::VectorXd& theta,
                                                 bool weighted) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    double wsum = 0;
    for (int m = 0; m < device_count(); ++m) {
        const double w = weighted ? data_weight[static_cast<std::size_t>(m)] : 1.0;
        g += w * (quad[static_cast<std::size_t>(m)] * theta +
                  linear[static_cast<std::size_t>(m)]);
        wsum += w;
    }
    return g / wsum;
}

Eigen::VectorXd SyntheticFlTask::global_optimum(bool weighted) const {
    Eigen::MatrixXd a_bar = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b_bar = Eigen::VectorXd::Zero(dim);
    double wsum = 0;
    for (int m = 0; m < device_count(); ++m) {
        const double w = weighted ? data_weight[static_cast<std::size_t>(m)] : 1.0;
        a_bar += w * quad[static_cast<std::size_t>(m)];
        b_bar += w * linear[static_cast<std::size_t>(m)];
        wsum += w;
    }
    return -(a_bar / wsum).ldlt().solve(b_bar / wsum);
}

SyntheticFlTask make_synthetic_task(int devices, int dim, double smoothness,
                                    double strong_convexity, RandomStream& rng) {
    if (strong_convexity <= 0.0 || smoothness < strong_convexity)
        throw std::invalid_argument("make_synthetic_task: need 0 < Upsilon <= L");
    SyntheticFlTask task;
    task.dim = dim;
    task.smoothness = smoothness;
    task.strong_convexity = strong_convexity;
    for (int m = 0; m < devices; ++m) {
        // Random orthogonal basis from the QR of a Gaussian matrix.
        Eigen::MatrixXd g(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) g(i, j) = rng.gaussian();
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ();
        Eigen::VectorXd eigs(dim);
        for (int i = 0; i < dim; ++i)
            eigs[i] = rng.uniform(strong_convexity, smoothness);
        if (dim >= 2) {  // pin the extremes so the constants are meaningful
            eigs[0] = strong_convexity;
            eigs[1] = smoothness;
        }
        task.quad.push_back(q * eigs.asDiagonal() * q.transpose());
        Eigen::VectorXd b(dim);
        for (int i = 0; i < dim; ++i) b[i] = rng.uniform(-1.0, 1.0);
        task.linear.push_back(b);
        task.data_weight.push_back(rng.uniform(0.5, 1.5));
    }
    return task;
}

FlTrace simulate_fl(const SyntheticFlTask& task, const FlSimOptions& opt,
                    double eps_local, double eps_global) {
    const int M = task.device_count();
    const int dim = task.dim;
    FlTrace trace;
    trace.local_gap.resize(static_cast<std::size_t>(opt.slots));
    trace.rounds_to_local_eps.assign(
        static_cast<std::size_t>(opt.slots),
        std::vector<int>(static_cast<std::size_t>(M), -1));

    Eigen::VectorXd theta = Eigen::VectorXd::Ones(dim);  // deliberately off-optimum
    const Eigen::VectorXd theta_star = task.global_optimum(opt.weighted_aggregation);
    const double loss_star = task.global_loss(theta_star, opt.weighted_aggregation);
    const double gap0 = task.global_loss(theta, opt.weighted_aggregation) - loss_star;
    trace.global_gap.push_back(1.0);

    for (int n = 0; n < opt.slots; ++n) {
        trace.local_gap[static_cast<std::size_t>(n)].resize(static_cast<std::size_t>(M));
        const Eigen::VectorXd grad_global =
            task.global_gradient(theta, opt.weighted_aggregation);
        Eigen::VectorXd update_sum = Eigen::VectorXd::Zero(dim);
        double weight_sum = 0;

        for (int m = 0; m < M; ++m) {
            const Eigen::MatrixXd& a = task.quad[static_cast<std::size_t>(m)];
            // Local surrogate in the model increment: its gradient at
            // increment v is A_m v + varrho * grad_global, so the optimum and
            // optimal value are available in closed form.
            const Eigen::VectorXd drive = opt.surrogate_weight * grad_global;
            const Eigen::VectorXd v_star = -a.ldlt().solve(drive);
            auto h = [&](const Eigen::VectorXd& v) {
                return 0.5 * v.dot(a * v) + drive.dot(v);
            };
            const double h_star = h(v_star);
            const double h_zero = h(Eigen::VectorXd::Zero(dim));
            const double local_gap0 = h_zero - h_star;

            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            auto& gaps = trace.local_gap[static_cast<std::size_t>(n)]
                                        [static_cast<std::size_t>(m)];
            gaps.push_back(1.0);
            for (int r = 1; r <= opt.local_rounds; ++r) {
                v -= opt.step_size * (a * v + drive);
                const double gap = local_gap0 > 0.0 ? (h(v) - h_star) / local_gap0 : 0.0;
                gaps.push_back(gap);
                if (gap <= eps_local &&
                    trace.rounds_to_local_eps[static_cast<std::size_t>(n)]
                                             [static_cast<std::size_t>(m)] < 0)
                    trace.rounds_to_local_eps[static_cast<std::size_t>(n)]
                                             [static_cast<std::size_t>(m)] = r;
            }
            if (local_gap0 <= 0.0)
                trace.rounds_to_local_eps[static_cast<std::size_t>(n)]
                                         [static_cast<std::size_t>(m)] = 0;
            const double w = opt.weighted_aggregation
                                 ? task.data_weight[static_cast<std::size_t>(m)]
                                 : 1.0;
            update_sum += w * v;
            weight_sum += w;
        }

        theta += update_sum / weight_sum;
        const double gap =
            gap0 > 0.0
                ? (task.global_loss(theta, opt.weighted_aggregation) - loss_star) / gap0
                : 0.0;
        trace.global_gap.push_back(gap);
        if (gap <= eps_global && trace.slots_to_global_eps < 0)
            trace.slots_to_global_eps = n + 1;
    }
    return trace;
}

std::string FlTrace::to_csv() const {
    std::ostringstream os;
    os << "slot,device,round,normalized_gap\n";
    char buf[32];
    for (std::size_t n = 0; n < local_gap.size(); ++n)
        for (std::size_t m = 0; m < local_gap[n].size(); ++m)
            for (std::size_t r = 0; r < local_gap[n][m].size(); ++r) {
                std::snprintf(buf, sizeof(buf), "%.12g", local_gap[n][m][r]);
                os << n << ',' << m << ',' << r << ',' << buf << '\n';
            }
    return os.str();
}

}  // namespace uavfl
