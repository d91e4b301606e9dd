#pragma once

#include "twoscale/bootstrap.hpp"
#include "twoscale/event_data.hpp"
#include "twoscale/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twoscale {

/// Two-scale hazard alpha(t) + beta with alpha piecewise constant in
/// duration, a constant age effect, left-truncated entry and administrative
/// censoring. Designs are the at-risk indicator on both scales (p = q = d = 1).
struct Scenario {
    double beta = 0.067;
    std::vector<double> alpha_breaks = {0.0, 0.25, 0.5, 5.0};
    std::vector<double> alpha_rates = {0.32, 0.48, -0.2 / 4.5};
    double zero_entry_prob = 0.10;
    double entry_max = 30.0;
    double censor_time = 5.0;
    std::size_t grid_time = 100;
    std::size_t grid_age = 100;
    double t_max = 5.0;
    double a0 = 0.0;
    double a_max = 35.0;

    void validate() const;  // throws std::invalid_argument
    TwoScaleGrid grid() const { return TwoScaleGrid(t_max, a0, a_max, grid_time, grid_age); }
    double alpha(double t) const;
    double alpha_integral(double t) const;
    double total_hazard(double t) const { return alpha(t) + beta; }
    std::string fingerprint() const;  // FNV-1a hash of all parameters, hex
};

SubjectCohort simulate_cohort(std::size_t n, const Scenario& sc, std::uint64_t seed);

/// True (A, B) on the grid: A(t) = integral of alpha, B(a) = beta (a - a0).
ThetaEstimate true_cumulatives(const Scenario& sc, const TwoScaleGrid& grid);

/// Per-axis Monte Carlo summaries at every grid point (component 0).
struct AxisStudy {
    Eigen::VectorXd points;
    Eigen::VectorXd bias;
    Eigen::VectorXd mc_sd;      // divisor reps - 1 (0 when reps == 1)
    Eigen::VectorXd mean_se;    // coverage studies only
    Eigen::VectorXd coverage;   // pointwise, coverage studies only
    double band_coverage = 0.0;
};

struct StudyResult {
    std::size_t n = 0;
    std::size_t reps = 0;
    std::size_t boot = 0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    AxisStudy duration;
    AxisStudy age;
    const AxisStudy& axis(Axis a) const { return a == Axis::duration ? duration : age; }
};

/// Grid indices of the tabulated points (every 20th point of a 100-point axis,
/// last point included): 19, 39, 59, 79, 99.
std::vector<std::size_t> table_indices(std::size_t points);

StudyResult bias_study(std::size_t n, std::size_t reps, const Scenario& sc, std::uint64_t seed,
                       std::size_t threads = 0);
StudyResult coverage_study(std::size_t n, std::size_t reps, std::size_t boot, double alpha, const Scenario& sc,
                           std::uint64_t seed, std::size_t threads = 0, int variant = 1,
                           WeightLaw law = WeightLaw::normal);

}  // namespace twoscale
