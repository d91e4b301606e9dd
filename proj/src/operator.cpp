#include "twoscale/operator.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace twoscale {

namespace {

// Running sum over blocks of `block` rows.
void cumulate_row_blocks(Eigen::MatrixXd& m, Eigen::Index block) {
    for (Eigen::Index r = block; r < m.rows(); r += block) m.middleRows(r, block) += m.middleRows(r - block, block);
}

}  // namespace

KernelMatrices kernel_matrices(const IncrementMatrix& inc, const MarginalProjectors& proj) {
    const auto p = static_cast<Eigen::Index>(inc.p), q = static_cast<Eigen::Index>(inc.q);
    const auto j = static_cast<Eigen::Index>(inc.grid.j()), k = static_cast<Eigen::Index>(inc.grid.k());
    KernelMatrices km;
    km.E1_mx = Eigen::MatrixXd::Zero(j * p, k * q);
    km.E2_mx = Eigen::MatrixXd::Zero(k * q, j * p);

    // Cell increments: entry e of duration cell l lands in age cell m(e) with
    // age design row kappa*Z_e, and symmetrically for age cells.
    for (Eigen::Index l = 1; l < j; ++l) {
        const auto& cp = proj.duration[static_cast<std::size_t>(l)];
        if (cp.deficient) continue;
        for (std::size_t r = 0; r < cp.entries.size(); ++r) {
            const auto e = cp.entries[r];
            const auto m = static_cast<Eigen::Index>(inc.entries[e].a_cell);
            km.E1_mx.block(l * p, m * q, p, q).noalias() +=
                inc.kappa * cp.pinv.col(static_cast<Eigen::Index>(r)) * inc.z_rows.row(static_cast<Eigen::Index>(e));
        }
    }
    for (Eigen::Index m = 1; m < k; ++m) {
        const auto& cp = proj.age[static_cast<std::size_t>(m)];
        if (cp.deficient) continue;
        for (std::size_t r = 0; r < cp.entries.size(); ++r) {
            const auto e = cp.entries[r];
            const auto l = static_cast<Eigen::Index>(inc.entries[e].t_cell);
            km.E2_mx.block(m * q, l * p, q, p).noalias() +=
                cp.pinv.col(static_cast<Eigen::Index>(r)) * inc.x_rows.row(static_cast<Eigen::Index>(e));
        }
    }
    cumulate_row_blocks(km.E1_mx, p);
    cumulate_row_blocks(km.E2_mx, q);
    return km;
}

KernelMatrices kernel_matrices(const IncrementMatrix& inc, double tol) {
    return kernel_matrices(inc, marginal_projectors(inc, tol));
}

Eigen::MatrixXd difference_matrix(std::size_t points, std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(points * dim), b = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index r = b; r < n; ++r) delta(r, r - b) = -1.0;
    return delta;
}

BlockOperator::BlockOperator(const KernelMatrices& km, const TwoScaleGrid& grid, std::size_t p, std::size_t q,
                             std::size_t d)
    : grid_(grid), p_(p), q_(q), d_(d) {
    if (d > std::min(p, q)) throw std::invalid_argument("shared dimension d exceeds min(p, q)");
    const auto jp = static_cast<Eigen::Index>(grid.j() * p), kq = static_cast<Eigen::Index>(grid.k() * q);
    if (km.E1_mx.rows() != jp || km.E1_mx.cols() != kq || km.E2_mx.rows() != kq || km.E2_mx.cols() != jp)
        throw std::invalid_argument("kernel matrices do not match grid and dimensions");

    e1_ = km.E1_mx * difference_matrix(grid.k(), q);
    e2_ = km.E2_mx * difference_matrix(grid.j(), p);
    e2bar_ = e2_;
    const auto& u = grid.a_points();
    const auto last = static_cast<Eigen::Index>((grid.j() - 1) * p);
    for (Eigen::Index m = 0; m < u.size(); ++m)
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c)
            e2bar_(m * static_cast<Eigen::Index>(q) + c, last + c) -= (u[m] - grid.a0()) / grid.t_max();

    ebar_ = Eigen::MatrixXd::Zero(jp + kq, jp + kq);
    ebar_.topRightCorner(jp, kq) = -e1_;
    ebar_.bottomLeftCorner(kq, jp) = -e2bar_;
}

Eigen::MatrixXd BlockOperator::E_op() const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(ebar_.rows(), ebar_.cols());
    e.topRightCorner(e1_.rows(), e1_.cols()) = -e1_;
    e.bottomLeftCorner(e2_.rows(), e2_.cols()) = -e2_;
    return e;
}

BlockOperator BlockOperator::scaled(double factor) const {
    BlockOperator out = *this;
    out.e1_ *= factor;
    out.e2_ *= factor;
    out.e2bar_ *= factor;
    out.ebar_ *= factor;
    return out;
}

BlockOperator assemble_block_operator(const KernelMatrices& km, const TwoScaleGrid& grid, std::size_t p,
                                      std::size_t q, std::size_t d) {
    return BlockOperator(km, grid, p, q, d);
}

ThetaEstimate apply_operator(const BlockOperator& op, const ThetaEstimate& theta) {
    if (theta.p() != op.p() || theta.q() != op.q() || theta.A.size() != op.grid().j() ||
        theta.B.size() != op.grid().k())
        throw std::invalid_argument("apply_operator: dimension mismatch");
    return ThetaEstimate::unstack(op.dense() * theta.stack(), op.grid(), op.p(), op.q());
}

ThetaEstimate ramp_function(const TwoScaleGrid& grid, std::size_t p, std::size_t q, std::size_t c, double scale) {
    if (c >= std::min(p, q)) throw std::invalid_argument("ramp component must be shared");
    ThetaEstimate f = ThetaEstimate::zeros(grid, p, q);
    const auto col = static_cast<Eigen::Index>(c);
    f.A.values.col(col) = scale * grid.t_points();
    f.B.values.col(col) = -scale * (grid.a_points().array() - grid.a0()).matrix();
    return f;
}

double spectral_radius(const Eigen::MatrixXd& m, std::size_t max_iter, double rel_tol, bool* converged,
                       std::size_t* iterations) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius needs a square matrix");
    if (converged) *converged = false;
    if (iterations) *iterations = 0;
    if (m.rows() == 0) return 0.0;
    // fixed, non-symmetric start so no eigenvector is missed by construction
    Eigen::VectorXd v(m.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
    v.normalize();
    double estimate = 0.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd w = m * (m * v);
        const double norm = w.norm();
        if (iterations) *iterations = it;
        if (norm == 0.0) {
            if (converged) *converged = true;
            return 0.0;
        }
        const double next = std::sqrt(norm);
        const bool done = std::abs(next - estimate) <= rel_tol * next;
        estimate = next;
        v = w / norm;
        if (done) {
            if (converged) *converged = true;
            break;
        }
    }
    return estimate;
}

SpectralReport spectral_report(const BlockOperator& op, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("spectral tolerance must be positive");
    SpectralReport rep;
    rep.tol = tol;
    auto count_small = [tol](const Eigen::MatrixXd& m) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
        return static_cast<std::size_t>((svd.singularValues().array() < tol).count());
    };
    const auto n = static_cast<Eigen::Index>(op.size());
    rep.unit_multiplicity_E = count_small(Eigen::MatrixXd::Identity(n, n) - op.E_op());

    const auto& g = op.grid();
    const bool square = op.p() == op.q() && g.j() == g.k() &&
                        std::abs(g.dt() - g.da()) <= 1e-12 * std::max(g.dt(), g.da());
    if (square) {
        const auto m = op.E2_op().rows();
        rep.unit_multiplicity_E2 = count_small(Eigen::MatrixXd::Identity(m, m) - op.E2_op());
    }
    rep.spectral_radius =
        spectral_radius(op.dense(), 200, 1e-10, &rep.power_converged, &rep.power_iterations);
    rep.identifiable = rep.unit_multiplicity_E == op.d() &&
                       (!rep.unit_multiplicity_E2 || *rep.unit_multiplicity_E2 == op.d());
    return rep;
}

void write_operator_binary(std::ostream& out, const BlockOperator& op) {
    const auto& g = op.grid();
    const double header[8] = {static_cast<double>(op.p()), static_cast<double>(op.q()),
                              static_cast<double>(g.j()),  static_cast<double>(g.k()),
                              static_cast<double>(op.d()), g.t_max(),
                              g.a0(),                      g.a_max()};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = op.dense();
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

}  // namespace twoscale
