#include "twoscale/solver.hpp"

#include "twoscale/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace twoscale {

std::string to_string(SolveMethod m) { return m == SolveMethod::direct ? "direct" : "backfit"; }

SolveMethod solve_method_from_string(const std::string& name) {
    if (name == "direct") return SolveMethod::direct;
    if (name == "backfit") return SolveMethod::backfit;
    throw std::invalid_argument("unknown solve method '" + name + "'");
}

DirectSolver::DirectSolver(const BlockOperator& op, double max_condition)
    : grid_(op.grid()), p_(op.p()), q_(op.q()), d_(op.d()) {
    const auto n = static_cast<Eigen::Index>(op.size());
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - op.dense();
    lu_.compute(system);
    const double rcond = lu_.rcond();
    condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition_ <= max_condition) || !lu_.matrixLU().allFinite()) {
        std::ostringstream msg;
        msg << "I - Ebar is numerically singular (condition estimate " << condition_
            << "); eigenvalue 1 of E likely has multiplicity other than d, see the spectral report";
        throw IdentificationError(msg.str());
    }
}

ThetaEstimate DirectSolver::solve(const ThetaEstimate& rhs) const {
    ThetaEstimate theta = ThetaEstimate::unstack(solve(rhs.stack()), grid_, p_, q_);
    // Origin rows of I - Ebar are identity rows; keep them at the rhs value
    // instead of the LU round-off (which would otherwise look like variance).
    theta.A.values.row(0) = rhs.A.values.row(0);
    theta.B.values.row(0) = rhs.B.values.row(0);
    return project_constraint(theta, d_);
}

ThetaEstimate project_constraint(const ThetaEstimate& theta, std::size_t d, double t_max, double a0) {
    if (d > std::min(theta.p(), theta.q())) throw std::invalid_argument("shared dimension exceeds min(p, q)");
    ThetaEstimate out = theta;
    if (out.A.size() == 0) return out;
    const Eigen::Index last = out.A.values.rows() - 1;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c) {
        const double slope = out.A.values(last, c) / t_max;
        out.A.values.col(c) -= slope * out.A.points;
        out.B.values.col(c) += slope * (out.B.points.array() - a0).matrix();
        out.A.values(last, c) = 0.0;  // exact, not just to rounding
    }
    return out;
}

ThetaEstimate project_constraint(const ThetaEstimate& theta, std::size_t d) {
    return project_constraint(theta, d, theta.A.points[theta.A.points.size() - 1], theta.B.points[0]);
}

double fixed_point_residual(const BlockOperator& op, const ThetaEstimate& m_hat, const ThetaEstimate& theta) {
    const Eigen::VectorXd v = theta.stack();
    const Eigen::VectorXd r = v - m_hat.stack() - op.dense() * v;
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

double constraint_residual(const ThetaEstimate& theta, std::size_t d) {
    double worst = 0.0;
    const Eigen::Index last = theta.A.values.rows() - 1;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c)
        worst = std::max(worst, std::abs(theta.A.values(last, c)));
    return worst;
}

std::pair<ThetaEstimate, SolveReport> solve_direct(const BlockOperator& op, const ThetaEstimate& m_hat) {
    const DirectSolver solver(op);
    SolveReport rep;
    rep.method = SolveMethod::direct;
    rep.condition = solver.condition();
    ThetaEstimate theta = solver.solve(m_hat);
    rep.residual = fixed_point_residual(op, m_hat, theta);
    rep.constraint_residual = constraint_residual(theta, op.d());
    return {std::move(theta), rep};
}

std::pair<ThetaEstimate, SolveReport> solve_backfit(const BlockOperator& op, const ThetaEstimate& m_hat,
                                                    double tol, std::size_t max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("backfit tolerance must be positive");
    if (max_iter < 1) throw std::invalid_argument("backfit needs at least one iteration");
    const Eigen::VectorXd m = m_hat.stack();
    const double m_norm = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    const double blowup = 1e6 * m_norm;

    SolveReport rep;
    rep.method = SolveMethod::backfit;
    rep.converged = false;
    Eigen::VectorXd theta = m;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd next = m + op.dense() * theta;
        const double change = (next - theta).cwiseAbs().maxCoeff();
        theta.swap(next);
        rep.iterations = it;
        const double size = theta.cwiseAbs().maxCoeff();
        if (!std::isfinite(size) || size > blowup) {
            std::ostringstream msg;
            msg << "backfitting diverged after " << it << " iterations (sup norm " << size
                << "); spectral radius of Ebar is at least 1, use the direct solver";
            throw DivergenceError(msg.str());
        }
        if (change < tol) {
            rep.converged = true;
            break;
        }
    }
    rep.spectral_warning = !rep.converged;
    ThetaEstimate out =
        project_constraint(ThetaEstimate::unstack(theta, op.grid(), op.p(), op.q()), op.d());
    rep.residual = fixed_point_residual(op, m_hat, out);
    rep.constraint_residual = constraint_residual(out, op.d());
    return {std::move(out), rep};
}

ThetaEstimate neumann_partial_sum(const BlockOperator& op, const ThetaEstimate& m_hat, std::size_t terms) {
    const Eigen::VectorXd m = m_hat.stack();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.size());
    Eigen::VectorXd term = m;
    for (std::size_t r = 0; r < terms; ++r) {
        sum += term;
        term = op.dense() * term;
    }
    return ThetaEstimate::unstack(sum, op.grid(), op.p(), op.q());
}

Fit fit_model(const SubjectCohort& cohort, const TwoScaleGrid& grid, const FitOptions& opts) {
    Fit fit;
    fit.inc = counting_increments(cohort, grid);
    fit.proj = marginal_projectors(fit.inc, opts.pinv_tol);
    fit.marginal = marginal_estimates(fit.inc, fit.proj);
    fit.op = assemble_block_operator(kernel_matrices(fit.inc, fit.proj), grid, cohort.p, cohort.q, cohort.d);
    if (opts.spectral) fit.spectral = spectral_report(fit.op, opts.spectral_tol);
    auto [theta, rep] = opts.method == SolveMethod::direct
                            ? solve_direct(fit.op, fit.marginal.m_hat)
                            : solve_backfit(fit.op, fit.marginal.m_hat, opts.tol, opts.max_iter);
    if (fit.spectral && !fit.spectral->identifiable) rep.spectral_warning = true;
    if (fit.spectral && opts.method == SolveMethod::backfit && fit.spectral->spectral_radius >= 1.0)
        rep.spectral_warning = true;
    fit.theta = std::move(theta);
    fit.report = rep;
    return fit;
}

}  // namespace twoscale
