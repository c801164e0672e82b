#ifndef UAVFL_CONVEX_ENGINE_HPP
#define UAVFL_CONVEX_ENGINE_HPP

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace uavfl {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SparseGrad = std::vector<std::pair<int, double>>;

// A smooth scalar functional with sparse variable support. Programs are built
// from sums of these; every atom provides exact gradients and Hessians.
class Term {
public:
    virtual ~Term() = default;
    // Value at x; if grad is non-null it is filled with the sparse gradient.
    virtual double eval(const VecX& x, SparseGrad* grad) const = 0;
    // H += w * hessian(x), written only on the support block.
    virtual void add_hessian(const VecX& x, double w, MatX& hess) const = 0;
    // Domain membership (log arguments positive and similar). The line search
    // never leaves the domain.
    virtual bool in_domain(const VecX&) const { return true; }
};

using TermPtr = std::shared_ptr<const Term>;

// c^T x + const on an index subset.
class LinearTerm final : public Term {
public:
    LinearTerm(std::vector<int> vars, std::vector<double> coeffs, double constant);
    double eval(const VecX& x, SparseGrad* grad) const override;
    void add_hessian(const VecX&, double, MatX&) const override {}

private:
    std::vector<int> vars_;
    std::vector<double> coeffs_;
    double constant_;
};

// Separable sum of scalar atoms: sum_i c_i * phi_i(x_{v_i}) + const, with
// phi in {identity, square, reciprocal, gamma*(2^(1/gamma)-1)}.
class SeparableTerm final : public Term {
public:
    enum class Atom { kIdentity, kSquare, kReciprocal, kPowerXi };
    struct Element {
        int var;
        double coeff;
        Atom atom;
    };

    SeparableTerm(std::vector<Element> elems, double constant);
    double eval(const VecX& x, SparseGrad* grad) const override;
    void add_hessian(const VecX& x, double w, MatX& hess) const override;
    bool in_domain(const VecX& x) const override;

private:
    std::vector<Element> elems_;
    double constant_;
};

// coeff / (w^T x) + const; domain w^T x > 0.
class RecipOfLinearTerm final : public Term {
public:
    RecipOfLinearTerm(std::vector<int> vars, std::vector<double> weights, double coeff,
                      double constant);
    double eval(const VecX& x, SparseGrad* grad) const override;
    void add_hessian(const VecX& x, double w, MatX& hess) const override;
    bool in_domain(const VecX& x) const override;

private:
    std::vector<int> vars_;
    std::vector<double> weights_;
    double coeff_;
    double constant_;
};

// ||A x_sub + b||^2 + const over a small support.
class SquaredAffineTerm final : public Term {
public:
    SquaredAffineTerm(std::vector<int> vars, MatX a, VecX b, double constant);
    double eval(const VecX& x, SparseGrad* grad) const override;
    void add_hessian(const VecX& x, double w, MatX& hess) const override;

private:
    std::vector<int> vars_;
    MatX a_;
    VecX b_;
    double constant_;
};

// Weighted sum of terms plus a constant; used to build composite constraints.
class SumTerm final : public Term {
public:
    SumTerm(std::vector<TermPtr> parts, std::vector<double> weights, double constant);
    double eval(const VecX& x, SparseGrad* grad) const override;
    void add_hessian(const VecX& x, double w, MatX& hess) const override;
    bool in_domain(const VecX& x) const override;

private:
    std::vector<TermPtr> parts_;
    std::vector<double> weights_;
    double constant_;
};

struct ConvexProgram {
    int dim = 0;
    VecX lower;  // box bounds; +-inf allowed
    VecX upper;
    TermPtr objective;
    std::vector<TermPtr> inequalities;  // g_i(x) <= 0
    std::vector<std::string> inequality_names;

    static constexpr double kInf = std::numeric_limits<double>::infinity();
    void init_free_box() {
        lower = VecX::Constant(dim, -kInf);
        upper = VecX::Constant(dim, kInf);
    }
};

struct SolveOptions {
    double feas_tol = 1e-6;    // relative feasibility tolerance
    double kkt_tol = 1e-5;     // stationarity residual tolerance
    double gap_tol = 1e-9;     // barrier duality-gap target per constraint set
    double t_max = 1e9;        // cap on the barrier parameter
    int max_iterations = 5000;
    double t_initial = 1.0;
    double mu = 20.0;          // barrier growth factor
    bool skip_phase1 = false;  // callers that guarantee strict feasibility
};

struct SolveReport {
    VecX x;
    double objective = 0;
    double max_violation = 0;   // max_i g_i(x*), negative when strictly inside
    double kkt_residual = 0;    // inf-norm of the stationarity residual
    int iterations = 0;         // Newton steps across all barrier stages
    bool converged = false;
    std::string message;
    VecX ineq_multipliers;      // one per inequality
    VecX box_lower_multipliers;
    VecX box_upper_multipliers;
};

// Log-barrier interior-point solve. Runs a phase-1 push when x0 is not
// strictly feasible; deterministic for identical inputs.
SolveReport solve(const ConvexProgram& program, const VecX& x0,
                  const SolveOptions& options = {});

// Trace of one solve, for CSV debugging dumps.
struct SolveTraceRow {
    int iteration;
    double t;
    double objective;
    double newton_decrement;
};
SolveReport solve_traced(const ConvexProgram& program, const VecX& x0,
                         const SolveOptions& options, std::vector<SolveTraceRow>* trace);

// Projected-subgradient ascent on the dual of a convex program whose
// Lagrangian minimizer is available in closed form.
struct StepSchedule {
    enum class Kind { kConstant, kDiminishing } kind = Kind::kDiminishing;
    double scale = 1.0;  // step_k = scale (constant) or scale / sqrt(k)
};

struct DualAscentResult {
    VecX multipliers;
    VecX primal;
    double duality_gap = 0;          // |lambda^T g(x)| at the returned iterate
    double slackness_residual = 0;   // max_i |lambda_i g_i(x)|
    bool converged = false;
    int iterations = 0;
};

DualAscentResult dual_ascent(
    const std::function<VecX(const VecX& multipliers)>& primal_closed_form,
    const std::function<VecX(const VecX& primal)>& constraint_values,
    const StepSchedule& schedule, const VecX& multipliers0, int max_iterations = 5000,
    double tol = 1e-6);

}  // namespace uavfl

#endif
