#pragma once

#include "twoscale/event_data.hpp"
#include "twoscale/grid.hpp"
#include "twoscale/marginal.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <optional>

namespace twoscale {

/// Cumulated kernels on the grid, point-major blocks.
///   E1_mx(l*p + r, m*q + c): E1(s_l | u_m), a p x q block per point pair.
///   E2_mx(m*q + r, l*p + c): E2(u_m | s_l).
/// Row 0 of either axis is zero (nothing accumulated at the origin).
struct KernelMatrices {
    Eigen::MatrixXd E1_mx;
    Eigen::MatrixXd E2_mx;
};

KernelMatrices kernel_matrices(const IncrementMatrix& inc, const MarginalProjectors& proj);
KernelMatrices kernel_matrices(const IncrementMatrix& inc, double tol = kDefaultPinvTol);

/// Backward differences along the points of one axis, acting on a stacked
/// (points * dim) vector: (Delta h)_l = h_l - h_{l-1}, (Delta h)_0 = h_0.
Eigen::MatrixXd difference_matrix(std::size_t points, std::size_t dim);

/// Ebar^op = [[0, -E1^op], [-Ebar2^op, 0]] on the stacked (A, B) layout.
class BlockOperator {
public:
    BlockOperator() = default;
    BlockOperator(const KernelMatrices& km, const TwoScaleGrid& grid, std::size_t p, std::size_t q,
                  std::size_t d);

    const TwoScaleGrid& grid() const { return grid_; }
    std::size_t p() const { return p_; }
    std::size_t q() const { return q_; }
    std::size_t d() const { return d_; }
    std::size_t size() const { return static_cast<std::size_t>(ebar_.rows()); }

    const Eigen::MatrixXd& E1_op() const { return e1_; }        // (j p) x (k q)
    const Eigen::MatrixXd& E2_op() const { return e2_; }        // (k q) x (j p)
    const Eigen::MatrixXd& E2bar_op() const { return e2bar_; }  // E2_op minus the ramp correction
    const Eigen::MatrixXd& dense() const { return ebar_; }      // Ebar^op
    // Unconstrained E^op = [[0, -E1^op], [-E2^op, 0]].
    Eigen::MatrixXd E_op() const;

    BlockOperator scaled(double factor) const;

private:
    TwoScaleGrid grid_;
    std::size_t p_ = 0, q_ = 0, d_ = 0;
    Eigen::MatrixXd e1_, e2_, e2bar_, ebar_;
};

BlockOperator assemble_block_operator(const KernelMatrices& km, const TwoScaleGrid& grid, std::size_t p,
                                      std::size_t q, std::size_t d);

ThetaEstimate apply_operator(const BlockOperator& op, const ThetaEstimate& theta);

/// The linear eigenfunction f_c = (ramp in shared component c of A, negative
/// age ramp in component c of B), scaled by `scale`.
ThetaEstimate ramp_function(const TwoScaleGrid& grid, std::size_t p, std::size_t q, std::size_t c,
                            double scale = 1.0);

struct SpectralReport {
    std::size_t unit_multiplicity_E = 0;
    // Only defined when E2^op maps a grid onto itself (p == q, j == k, equal
    // spacing on both axes); otherwise empty.
    std::optional<std::size_t> unit_multiplicity_E2;
    double spectral_radius = 0.0;
    std::size_t power_iterations = 0;
    bool power_converged = false;
    bool identifiable = false;
    double tol = 1e-6;
};

SpectralReport spectral_report(const BlockOperator& op, double tol = 1e-6);
/// Power iteration on M^2 (eigenvalues of the block-antidiagonal operator
/// come in +/- pairs); returns sqrt of the dominant modulus estimate.
double spectral_radius(const Eigen::MatrixXd& m, std::size_t max_iter = 200, double rel_tol = 1e-10,
                       bool* converged = nullptr, std::size_t* iterations = nullptr);

/// Header of 8 doubles (p, q, j, k, d, t_max, a0, a_max), then Ebar^op
/// row-major, native endianness.
void write_operator_binary(std::ostream& out, const BlockOperator& op);

}  // namespace twoscale
