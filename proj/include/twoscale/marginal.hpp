#pragma once

#include "twoscale/event_data.hpp"
#include "twoscale/grid.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace twoscale {

constexpr double kDefaultPinvTol = 1e-8;

/// Moore-Penrose solve C^- dN. Singular values below tol * sigma_max count as
/// zero; rank (if given) receives the numerical rank.
Eigen::VectorXd pinv_increment(const Eigen::MatrixXd& design, const Eigen::VectorXd& dN,
                               double tol = kDefaultPinvTol, Eigen::Index* rank = nullptr);
Eigen::MatrixXd pinv(const Eigen::MatrixXd& design, double tol = kDefaultPinvTol,
                     Eigen::Index* rank = nullptr);

/// Cached pseudo-inverse of one cell's stacked design. Rank-deficient or empty
/// cells keep a zero projector and are flagged.
struct CellProjector {
    std::vector<std::size_t> entries;
    Eigen::MatrixXd pinv;  // dim x entries.size()
    bool deficient = true;
};

/// Projectors of every cell on both axes. Reused by the kernels and by each
/// bootstrap replicate, which only changes the right-hand side.
struct MarginalProjectors {
    std::vector<CellProjector> duration;  // j cells, cell 0 empty
    std::vector<CellProjector> age;       // k cells, cell 0 empty
    const std::vector<CellProjector>& axis(Axis a) const { return a == Axis::duration ? duration : age; }
};

MarginalProjectors marginal_projectors(const IncrementMatrix& inc, double tol = kDefaultPinvTol);

struct MarginalEstimate {
    ThetaEstimate m_hat;
    std::vector<bool> rank_deficient_duration;
    std::vector<bool> rank_deficient_age;
    const std::vector<bool>& rank_flags(Axis a) const {
        return a == Axis::duration ? rank_deficient_duration : rank_deficient_age;
    }
};

/// Cumulated marginal estimators for an arbitrary per-entry increment vector
/// (length inc.entries.size()), e.g. multiplier-weighted dN.
ThetaEstimate marginal_from_increments(const IncrementMatrix& inc, const MarginalProjectors& proj,
                                       const Eigen::VectorXd& dn_entries);

MarginalEstimate marginal_estimates(const IncrementMatrix& inc, const MarginalProjectors& proj);
MarginalEstimate marginal_estimates(const IncrementMatrix& inc, double tol = kDefaultPinvTol);

}  // namespace twoscale
