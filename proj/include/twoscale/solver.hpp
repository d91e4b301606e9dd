#pragma once

#include "twoscale/event_data.hpp"
#include "twoscale/marginal.hpp"
#include "twoscale/operator.hpp"

#include <Eigen/LU>

#include <cstddef>
#include <optional>
#include <string>

namespace twoscale {

enum class SolveMethod { direct, backfit };
std::string to_string(SolveMethod m);
SolveMethod solve_method_from_string(const std::string& name);

struct SolveReport {
    SolveMethod method = SolveMethod::direct;
    std::size_t iterations = 0;
    bool converged = true;
    double residual = 0.0;             // sup |theta - m - Ebar theta|
    double constraint_residual = 0.0;  // max over shared components |A_c(t_max)|
    double condition = 0.0;            // direct solve only, estimated
    bool spectral_warning = false;
};

/// LU factorization of (I - Ebar^op), reusable across right-hand sides.
class DirectSolver {
public:
    explicit DirectSolver(const BlockOperator& op, double max_condition = 1e12);
    double condition() const { return condition_; }
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return lu_.solve(rhs); }
    // (I - Ebar)^{-1} rhs followed by project_constraint.
    ThetaEstimate solve(const ThetaEstimate& rhs) const;

private:
    TwoScaleGrid grid_;
    std::size_t p_ = 0, q_ = 0, d_ = 0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double condition_ = 0.0;
};

/// Removes the ramp component: A_c -= t A_c(t_max)/t_max and
/// B_c += (a - a0) A_c(t_max)/t_max for shared components c < d.
ThetaEstimate project_constraint(const ThetaEstimate& theta, std::size_t d);
ThetaEstimate project_constraint(const ThetaEstimate& theta, std::size_t d, double t_max, double a0);

double fixed_point_residual(const BlockOperator& op, const ThetaEstimate& m_hat, const ThetaEstimate& theta);
double constraint_residual(const ThetaEstimate& theta, std::size_t d);

std::pair<ThetaEstimate, SolveReport> solve_direct(const BlockOperator& op, const ThetaEstimate& m_hat);
std::pair<ThetaEstimate, SolveReport> solve_backfit(const BlockOperator& op, const ThetaEstimate& m_hat,
                                                    double tol = 1e-8, std::size_t max_iter = 1000);

/// sum_{r=0}^{terms-1} Ebar^r m_hat.
ThetaEstimate neumann_partial_sum(const BlockOperator& op, const ThetaEstimate& m_hat, std::size_t terms);

struct FitOptions {
    SolveMethod method = SolveMethod::direct;
    double tol = 1e-8;
    std::size_t max_iter = 1000;
    double pinv_tol = kDefaultPinvTol;
    double spectral_tol = 1e-6;
    bool spectral = true;
};

/// Whole estimation pipeline for one cohort on one grid.
struct Fit {
    IncrementMatrix inc;
    MarginalProjectors proj;
    MarginalEstimate marginal;
    BlockOperator op;
    std::optional<SpectralReport> spectral;
    ThetaEstimate theta;
    SolveReport report;
};

Fit fit_model(const SubjectCohort& cohort, const TwoScaleGrid& grid, const FitOptions& opts = {});

}  // namespace twoscale
