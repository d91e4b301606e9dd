#pragma once

#include "twoscale/solver.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace twoscale {

enum class WeightLaw { normal, rademacher };
std::string to_string(WeightLaw law);
WeightLaw weight_law_from_string(const std::string& name);

/// n i.i.d. multipliers with mean 0 and variance 1, deterministic in seed.
Eigen::VectorXd wild_weights(std::size_t n, std::uint64_t seed, WeightLaw law = WeightLaw::normal);

/// Per-entry residual increments dN - X dA - kappa Z dB at each subject-cell.
Eigen::VectorXd residual_increments(const IncrementMatrix& inc, const ThetaEstimate& theta_hat);

/// One error path (I - Ebar)^{-1} M for multipliers G. Variant 1 weights the
/// counting increments, variant 2 the residual increments.
ThetaEstimate bootstrap_replicate(const IncrementMatrix& inc, const MarginalProjectors& proj,
                                  const DirectSolver& solver, const ThetaEstimate& theta_hat,
                                  const Eigen::VectorXd& G, int variant);

struct BootstrapEnsemble {
    std::vector<ThetaEstimate> replicates;
    int variant = 1;
    WeightLaw law = WeightLaw::normal;
    std::uint64_t seed = 0;
    std::size_t size() const { return replicates.size(); }
};

/// Replicate r uses wild_weights(n, derive_seed(seed, stream, r)); results
/// are identical for any thread count.
BootstrapEnsemble run_bootstrap(const Fit& fit, std::size_t replicates, int variant, WeightLaw law,
                                std::uint64_t seed, std::size_t threads = 1, std::uint64_t stream = 0);

/// Componentwise sample standard deviation (divisor B - 1).
ThetaEstimate pointwise_se(const BootstrapEnsemble& ens);

struct BandResult {
    Axis axis = Axis::duration;
    std::size_t component = 0;
    Eigen::VectorXd sigma;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double c_quantile = 0.0;
    double alpha = 0.05;
    double nu1 = 0.0;
    double nu2 = 0.0;
    std::size_t points_used = 0;
};

/// z with P(|N(0,1)| <= z) = 1 - alpha.
double two_sided_normal_quantile(double alpha);

/// Index (1-based) of the order statistic used as the (1 - alpha) quantile.
std::size_t quantile_rank(std::size_t replicates, double alpha);

/// Uniform band over the grid points of [nu1, nu2] (whole axis if absent)
/// from replicate paths and their sd curve. Points whose sd is at most
/// 1e-12 of the largest sd on the range are left out of the sup.
BandResult uniform_band(const std::vector<Eigen::VectorXd>& paths, const Eigen::VectorXd& sigma,
                        const Eigen::VectorXd& estimate, const Eigen::VectorXd& points, double alpha,
                        std::optional<std::pair<double, double>> range = std::nullopt);
BandResult uniform_band(const BootstrapEnsemble& ens, const ThetaEstimate& sigma, const ThetaEstimate& theta_hat,
                        Axis axis, std::size_t component, double alpha,
                        std::optional<std::pair<double, double>> range = std::nullopt);

struct SurvivalCurve {
    Eigen::VectorXd t;
    Eigen::VectorXd cumhaz;
    Eigen::VectorXd survival;
    Eigen::VectorXd band_lower;  // exp(-upper cumulative-hazard band)
    Eigen::VectorXd band_upper;
    double c_quantile = 0.0;
};

/// Lambda(t) = x.A(t) + z.(B(a + t) - B(a)) on the duration grid for a subject
/// entering at age a, S = exp(-Lambda). Empty x / z mean all ones.
/// The band needs an ensemble of at least two replicates.
SurvivalCurve predict_survival(const ThetaEstimate& theta_hat, const BootstrapEnsemble* ens, double entry_age,
                               double alpha, Eigen::VectorXd x = {}, Eigen::VectorXd z = {});

}  // namespace twoscale
