#include "uavfl/convex_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace uavfl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;
}  // namespace

// ---------------------------------------------------------------------------
// Terms

LinearTerm::LinearTerm(std::vector<int> vars, std::vector<double> coeffs, double constant)
    : vars_(std::move(vars)), coeffs_(std::move(coeffs)), constant_(constant) {}

double LinearTerm::eval(const VecX& x, SparseGrad* grad) const {
    double v = constant_;
    for (std::size_t i = 0; i < vars_.size(); ++i) v += coeffs_[i] * x[vars_[i]];
    if (grad) {
        grad->clear();
        for (std::size_t i = 0; i < vars_.size(); ++i)
            grad->emplace_back(vars_[i], coeffs_[i]);
    }
    return v;
}

SeparableTerm::SeparableTerm(std::vector<Element> elems, double constant)
    : elems_(std::move(elems)), constant_(constant) {}

namespace {
// phi, phi', phi'' for the separable atoms.
struct AtomEval {
    double v, d1, d2;
};
AtomEval eval_atom(SeparableTerm::Atom atom, double x) {
    using Atom = SeparableTerm::Atom;
    switch (atom) {
        case Atom::kIdentity:
            return {x, 1.0, 0.0};
        case Atom::kSquare:
            return {x * x, 2.0 * x, 2.0};
        case Atom::kReciprocal:
            return {1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)};
        case Atom::kPowerXi: {
            // xi(g) = g * (2^(1/g) - 1); convex for g > 0.
            const double e = std::exp(kLn2 / x);
            const double v = x * (e - 1.0);
            const double d1 = (e - 1.0) - (kLn2 / x) * e;
            const double d2 = (kLn2 * kLn2) * e / (x * x * x);
            return {v, d1, d2};
        }
    }
    return {0, 0, 0};
}
}  // namespace

double SeparableTerm::eval(const VecX& x, SparseGrad* grad) const {
    double v = constant_;
    if (grad) grad->clear();
    for (const auto& e : elems_) {
        const auto a = eval_atom(e.atom, x[e.var]);
        v += e.coeff * a.v;
        if (grad) grad->emplace_back(e.var, e.coeff * a.d1);
    }
    return v;
}

void SeparableTerm::add_hessian(const VecX& x, double w, MatX& hess) const {
    for (const auto& e : elems_) {
        const auto a = eval_atom(e.atom, x[e.var]);
        hess(e.var, e.var) += w * e.coeff * a.d2;
    }
}

bool SeparableTerm::in_domain(const VecX& x) const {
    for (const auto& e : elems_) {
        if ((e.atom == Atom::kReciprocal || e.atom == Atom::kPowerXi) && x[e.var] <= 0.0)
            return false;
    }
    return true;
}

RecipOfLinearTerm::RecipOfLinearTerm(std::vector<int> vars, std::vector<double> weights,
                                     double coeff, double constant)
    : vars_(std::move(vars)), weights_(std::move(weights)), coeff_(coeff),
      constant_(constant) {}

double RecipOfLinearTerm::eval(const VecX& x, SparseGrad* grad) const {
    double s = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) s += weights_[i] * x[vars_[i]];
    const double v = constant_ + coeff_ / s;
    if (grad) {
        grad->clear();
        const double d = -coeff_ / (s * s);
        for (std::size_t i = 0; i < vars_.size(); ++i)
            grad->emplace_back(vars_[i], d * weights_[i]);
    }
    return v;
}

void RecipOfLinearTerm::add_hessian(const VecX& x, double w, MatX& hess) const {
    double s = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) s += weights_[i] * x[vars_[i]];
    const double d2 = 2.0 * coeff_ / (s * s * s);
    for (std::size_t i = 0; i < vars_.size(); ++i)
        for (std::size_t j = 0; j < vars_.size(); ++j)
            hess(vars_[i], vars_[j]) += w * d2 * weights_[i] * weights_[j];
}

bool RecipOfLinearTerm::in_domain(const VecX& x) const {
    double s = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) s += weights_[i] * x[vars_[i]];
    return s > 0.0;
}

SquaredAffineTerm::SquaredAffineTerm(std::vector<int> vars, MatX a, VecX b, double constant)
    : vars_(std::move(vars)), a_(std::move(a)), b_(std::move(b)), constant_(constant) {}

double SquaredAffineTerm::eval(const VecX& x, SparseGrad* grad) const {
    VecX xs(static_cast<Eigen::Index>(vars_.size()));
    for (std::size_t i = 0; i < vars_.size(); ++i) xs[static_cast<Eigen::Index>(i)] = x[vars_[i]];
    const VecX r = a_ * xs + b_;
    if (grad) {
        grad->clear();
        const VecX g = 2.0 * a_.transpose() * r;
        for (std::size_t i = 0; i < vars_.size(); ++i)
            grad->emplace_back(vars_[i], g[static_cast<Eigen::Index>(i)]);
    }
    return r.squaredNorm() + constant_;
}

void SquaredAffineTerm::add_hessian(const VecX&, double w, MatX& hess) const {
    const MatX h = 2.0 * a_.transpose() * a_;
    for (std::size_t i = 0; i < vars_.size(); ++i)
        for (std::size_t j = 0; j < vars_.size(); ++j)
            hess(vars_[i], vars_[j]) += w * h(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j));
}

SumTerm::SumTerm(std::vector<TermPtr> parts, std::vector<double> weights, double constant)
    : parts_(std::move(parts)), weights_(std::move(weights)), constant_(constant) {}

double SumTerm::eval(const VecX& x, SparseGrad* grad) const {
    double v = constant_;
    if (grad) grad->clear();
    SparseGrad local;
    for (std::size_t k = 0; k < parts_.size(); ++k) {
        v += weights_[k] * parts_[k]->eval(x, grad ? &local : nullptr);
        if (grad)
            for (const auto& [i, g] : local) grad->emplace_back(i, weights_[k] * g);
    }
    return v;
}

void SumTerm::add_hessian(const VecX& x, double w, MatX& hess) const {
    for (std::size_t k = 0; k < parts_.size(); ++k)
        parts_[k]->add_hessian(x, w * weights_[k], hess);
}

bool SumTerm::in_domain(const VecX& x) const {
    for (const auto& p : parts_)
        if (!p->in_domain(x)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Barrier solver

namespace {

struct BarrierState {
    const ConvexProgram& prog;
    double t;
    std::vector<double> g_values;
    std::vector<SparseGrad> g_grads;
    SparseGrad obj_grad;

    explicit BarrierState(const ConvexProgram& p) : prog(p), t(1.0) {
        g_values.resize(p.inequalities.size());
        g_grads.resize(p.inequalities.size());
    }

    bool strictly_feasible(const VecX& x, double margin = 0.0) const {
        for (int j = 0; j < prog.dim; ++j) {
            if (x[j] <= prog.lower[j] + margin || x[j] >= prog.upper[j] - margin)
                if (prog.lower[j] > -kInf || prog.upper[j] < kInf) {
                    if (prog.lower[j] > -kInf && x[j] <= prog.lower[j] + margin) return false;
                    if (prog.upper[j] < kInf && x[j] >= prog.upper[j] - margin) return false;
                }
        }
        for (const auto& g : prog.inequalities) {
            if (!g->in_domain(x)) return false;
            if (g->eval(x, nullptr) >= -margin) return false;
        }
        return prog.objective->in_domain(x);
    }

    // f(x) + barrier(x)/t; +inf outside the domain. The 1/t scaling keeps the
    // merit at the objective's magnitude, so line-search improvements remain
    // measurable at large t.
    double merit(const VecX& x) const {
        for (int j = 0; j < prog.dim; ++j) {
            if (prog.lower[j] > -kInf && x[j] <= prog.lower[j]) return kInf;
            if (prog.upper[j] < kInf && x[j] >= prog.upper[j]) return kInf;
        }
        if (!prog.objective->in_domain(x)) return kInf;
        double phi = 0;
        for (const auto& g : prog.inequalities) {
            if (!g->in_domain(x)) return kInf;
            const double v = g->eval(x, nullptr);
            if (v >= 0.0) return kInf;
            phi -= std::log(-v);
        }
        for (int j = 0; j < prog.dim; ++j) {
            if (prog.lower[j] > -kInf) phi -= std::log(x[j] - prog.lower[j]);
            if (prog.upper[j] < kInf) phi -= std::log(prog.upper[j] - x[j]);
        }
        return prog.objective->eval(x, nullptr) + phi / t;
    }

    void gradient_hessian(const VecX& x, VecX& grad, MatX& hess) {
        grad.setZero(prog.dim);
        hess.setZero(prog.dim, prog.dim);
        prog.objective->eval(x, &obj_grad);
        for (const auto& [i, g] : obj_grad) grad[i] += g;
        prog.objective->add_hessian(x, 1.0, hess);

        for (std::size_t c = 0; c < prog.inequalities.size(); ++c) {
            const double v = prog.inequalities[c]->eval(x, &g_grads[c]);
            g_values[c] = v;
            const double inv = 1.0 / (t * (-v));
            for (const auto& [i, g] : g_grads[c]) grad[i] += inv * g;
            prog.inequalities[c]->add_hessian(x, inv, hess);
            for (const auto& [i, gi] : g_grads[c])
                for (const auto& [j, gj] : g_grads[c])
                    hess(i, j) += t * inv * inv * gi * gj;
        }
        for (int j = 0; j < prog.dim; ++j) {
            if (prog.lower[j] > -kInf) {
                const double d = x[j] - prog.lower[j];
                grad[j] -= 1.0 / (t * d);
                hess(j, j) += 1.0 / (t * d * d);
            }
            if (prog.upper[j] < kInf) {
                const double d = prog.upper[j] - x[j];
                grad[j] += 1.0 / (t * d);
                hess(j, j) += 1.0 / (t * d * d);
            }
        }
    }
};

int newton_minimize(BarrierState& state, VecX& x, int max_steps, double decrement_tol) {
    VecX grad;
    MatX hess;
    int steps = 0;
    int polish_left = 4;
    for (; steps < max_steps; ++steps) {
        state.gradient_hessian(x, grad, hess);
        VecX dx;
        double ridge = 0.0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            MatX h = hess;
            if (ridge > 0.0) h.diagonal().array() += ridge;
            Eigen::LDLT<MatX> ldlt(h);
            if (ldlt.info() == Eigen::Success) {
                dx = ldlt.solve(-grad);
                if (dx.allFinite() && grad.dot(dx) < 0.0) break;
            }
            ridge = (ridge == 0.0) ? 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff())
                                   : ridge * 100.0;
            dx.setZero();
        }
        if (dx.size() == 0 || dx.squaredNorm() == 0.0) break;
        const double merit0 = state.merit(x);
        const double decrement = -grad.dot(dx);

        if (decrement * 0.5 < decrement_tol * (1.0 + std::abs(merit0))) {
            // Quadratic tail: merit differences are below the floating-point
            // noise floor here, so take full steps judged by gradient-norm
            // decrease to finish centering (the multiplier estimates need it).
            if (polish_left-- <= 0) break;
            const VecX cand = x + dx;
            if (!std::isfinite(state.merit(cand))) break;
            VecX grad_cand;
            MatX hess_cand;
            state.gradient_hessian(cand, grad_cand, hess_cand);
            if (grad_cand.norm() < grad.norm()) {
                x = cand;
                continue;
            }
            break;
        }

        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const VecX cand = x + step * dx;
            const double m = state.merit(cand);
            if (m < merit0 - 1e-4 * step * decrement) {
                x = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    return steps;
}

// Wraps g(x) - slack for the phase-1 program.
class SlackedTerm final : public Term {
public:
    SlackedTerm(TermPtr inner, int slack_var) : inner_(std::move(inner)), slack_(slack_var) {}
    double eval(const VecX& x, SparseGrad* grad) const override {
        const double v = inner_->eval(x, grad) - x[slack_];
        if (grad) grad->emplace_back(slack_, -1.0);
        return v;
    }
    void add_hessian(const VecX& x, double w, MatX& hess) const override {
        inner_->add_hessian(x, w, hess);
    }
    bool in_domain(const VecX& x) const override { return inner_->in_domain(x); }

private:
    TermPtr inner_;
    int slack_;
};

// Minimizes the worst constraint violation to find a strictly feasible start.
bool phase1(const ConvexProgram& prog, VecX& x, const SolveOptions& opt) {
    ConvexProgram aux;
    aux.dim = prog.dim + 1;
    const int s = prog.dim;
    aux.lower = VecX::Constant(aux.dim, -kInf);
    aux.upper = VecX::Constant(aux.dim, kInf);
    aux.lower.head(prog.dim) = prog.lower;
    aux.upper.head(prog.dim) = prog.upper;
    aux.objective = std::make_shared<LinearTerm>(std::vector<int>{s},
                                                 std::vector<double>{1.0}, 0.0);
    for (const auto& g : prog.inequalities)
        aux.inequalities.push_back(std::make_shared<SlackedTerm>(g, s));

    // Project the start strictly inside the box, then lift the slack above the
    // worst violation.
    VecX x0(aux.dim);
    for (int j = 0; j < prog.dim; ++j) {
        double v = x[j];
        if (prog.lower[j] > -kInf && prog.upper[j] < kInf) {
            const double w = prog.upper[j] - prog.lower[j];
            v = std::clamp(v, prog.lower[j] + 1e-9 * w, prog.upper[j] - 1e-9 * w);
        } else if (prog.lower[j] > -kInf) {
            v = std::max(v, prog.lower[j] + 1e-9 * (1.0 + std::abs(prog.lower[j])));
        } else if (prog.upper[j] < kInf) {
            v = std::min(v, prog.upper[j] - 1e-9 * (1.0 + std::abs(prog.upper[j])));
        }
        x0[j] = v;
    }
    double worst = 0.0;
    bool domain_ok = true;
    for (std::size_t c = 0; c < prog.inequalities.size(); ++c) {
        const auto& g = prog.inequalities[c];
        if (!g->in_domain(x0)) {
            domain_ok = false;
            break;
        }
        const double v = g->eval(x0, nullptr);
        if (std::getenv("UAVFL_DEBUG_PHASE1") && v > 0.0)
            std::fprintf(stderr, "phase1 start violation %s = %.6g\n",
                         c < prog.inequality_names.size()
                             ? prog.inequality_names[c].c_str()
                             : "?",
                         v);
        worst = std::max(worst, v);
    }
    if (!domain_ok) return false;  // no recovery path when atoms are undefined
    x0[s] = worst + 1.0;

    BarrierState state(aux);
    state.t = 1.0;
    VecX xs = x0;
    const int stages = 40;
    for (int stage = 0; stage < stages; ++stage) {
        const int steps = newton_minimize(state, xs, 60, 1e-10);
        if (std::getenv("UAVFL_DEBUG_PHASE1"))
            std::fprintf(stderr, "phase1 stage %d t=%.3g s=%.6g steps=%d\n", stage,
                         state.t, xs[s], steps);
        if (xs[s] < -1e-9) break;  // strictly feasible point found
        const double gap = static_cast<double>(aux.inequalities.size() + 1) / state.t;
        if (gap < 1e-10) break;
        state.t *= opt.mu;
    }
    if (xs[s] >= 0.0) return false;
    x = xs.head(prog.dim);
    return true;
}

}  // namespace

SolveReport solve_traced(const ConvexProgram& prog, const VecX& x0,
                         const SolveOptions& opt, std::vector<SolveTraceRow>* trace) {
    SolveReport rep;
    rep.x = x0;

    BarrierState state(prog);
    VecX x = x0;
    if (!opt.skip_phase1 && !state.strictly_feasible(x, 0.0)) {
        if (!phase1(prog, x, opt)) {
            rep.converged = false;
            rep.message = "infeasible: phase-1 could not find a strictly feasible point";
            // Name the worst offenders at the returned point for diagnostics.
            double worst = 0;
            std::size_t worst_c = prog.inequalities.size();
            for (std::size_t c = 0; c < prog.inequalities.size(); ++c) {
                if (!prog.inequalities[c]->in_domain(x)) {
                    worst_c = c;
                    rep.message += "; constraint out of domain";
                    break;
                }
                const double v = prog.inequalities[c]->eval(x, nullptr);
                if (v > worst) {
                    worst = v;
                    worst_c = c;
                }
            }
            if (worst_c < prog.inequality_names.size())
                rep.message += " (worst: " + prog.inequality_names[worst_c] + ")";
            rep.objective = prog.objective->in_domain(x) ? prog.objective->eval(x, nullptr)
                                                         : std::nan("");
            return rep;
        }
    }

    const std::size_t n_ineq = prog.inequalities.size();
    int finite_bounds = 0;
    for (int j = 0; j < prog.dim; ++j) {
        if (prog.lower[j] > -kInf) ++finite_bounds;
        if (prog.upper[j] < kInf) ++finite_bounds;
    }
    const double m_total = static_cast<double>(n_ineq) + finite_bounds;

    state.t = opt.t_initial;
    int total_newton = 0;
    int stage = 0;
    while (true) {
        total_newton += newton_minimize(state, x, 80, 1e-12);
        if (trace) {
            trace->push_back({total_newton, state.t, prog.objective->eval(x, nullptr), 0.0});
        }
        const double gap = m_total / state.t;
        if (gap < opt.gap_tol || state.t >= opt.t_max || total_newton >= opt.max_iterations ||
            ++stage > 60)
            break;
        state.t = std::min(state.t * opt.mu, opt.t_max);
    }

    rep.x = x;
    rep.objective = prog.objective->eval(x, nullptr);
    rep.iterations = total_newton;

    // Multiplier estimates from the final barrier stage.
    rep.ineq_multipliers.setZero(static_cast<Eigen::Index>(n_ineq));
    rep.max_violation = -kInf;
    for (std::size_t c = 0; c < n_ineq; ++c) {
        const double v = prog.inequalities[c]->eval(x, nullptr);
        rep.max_violation = std::max(rep.max_violation, v);
        rep.ineq_multipliers[static_cast<Eigen::Index>(c)] = 1.0 / (state.t * (-v));
    }
    if (n_ineq == 0) rep.max_violation = 0.0;
    rep.box_lower_multipliers.setZero(prog.dim);
    rep.box_upper_multipliers.setZero(prog.dim);
    for (int j = 0; j < prog.dim; ++j) {
        if (prog.lower[j] > -kInf)
            rep.box_lower_multipliers[j] = 1.0 / (state.t * (x[j] - prog.lower[j]));
        if (prog.upper[j] < kInf)
            rep.box_upper_multipliers[j] = 1.0 / (state.t * (prog.upper[j] - x[j]));
    }

    // Stationarity residual of the Lagrangian with the estimated multipliers.
    VecX resid = VecX::Zero(prog.dim);
    SparseGrad grad;
    prog.objective->eval(x, &grad);
    for (const auto& [i, g] : grad) resid[i] += g;
    for (std::size_t c = 0; c < n_ineq; ++c) {
        prog.inequalities[c]->eval(x, &grad);
        const double lam = rep.ineq_multipliers[static_cast<Eigen::Index>(c)];
        for (const auto& [i, g] : grad) resid[i] += lam * g;
    }
    for (int j = 0; j < prog.dim; ++j)
        resid[j] += rep.box_upper_multipliers[j] - rep.box_lower_multipliers[j];
    rep.kkt_residual = resid.size() > 0 ? resid.cwiseAbs().maxCoeff() : 0.0;

    rep.converged = rep.max_violation <= opt.feas_tol && rep.kkt_residual <= opt.kkt_tol &&
                    total_newton < opt.max_iterations;
    if (!rep.converged && rep.message.empty())
        rep.message = "tolerances not reached within the iteration budget";
    return rep;
}

SolveReport solve(const ConvexProgram& prog, const VecX& x0, const SolveOptions& opt) {
    return solve_traced(prog, x0, opt, nullptr);
}

DualAscentResult dual_ascent(const std::function<VecX(const VecX&)>& primal_closed_form,
                             const std::function<VecX(const VecX&)>& constraint_values,
                             const StepSchedule& schedule, const VecX& multipliers0,
                             int max_iterations, double tol) {
    DualAscentResult res;
    VecX lambda = multipliers0.cwiseMax(0.0);
    VecX x;
    for (int k = 1; k <= max_iterations; ++k) {
        x = primal_closed_form(lambda);
        const VecX g = constraint_values(x);
        double slack = 0;
        for (Eigen::Index i = 0; i < g.size(); ++i)
            slack = std::max(slack, std::abs(lambda[i] * g[i]));
        const double gap = std::abs(lambda.dot(g));
        res.iterations = k;
        if (slack <= tol && g.maxCoeff() <= tol) {
            res.converged = true;
            res.multipliers = lambda;
            res.primal = x;
            res.duality_gap = gap;
            res.slackness_residual = slack;
            return res;
        }
        const double step = schedule.kind == StepSchedule::Kind::kConstant
                                ? schedule.scale
                                : schedule.scale / std::sqrt(static_cast<double>(k));
        lambda = (lambda + step * g).cwiseMax(0.0);
    }
    x = primal_closed_form(lambda);
    const VecX g = constraint_values(x);
    res.multipliers = lambda;
    res.primal = x;
    res.duality_gap = std::abs(lambda.dot(g));
    double slack = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        slack = std::max(slack, std::abs(lambda[i] * g[i]));
    res.slackness_residual = slack;
    res.converged = false;
    return res;
}

}  // namespace uavfl
