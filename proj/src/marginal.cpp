#include "twoscale/marginal.hpp"

#include <Eigen/SVD>

#include <stdexcept>

namespace twoscale {

Eigen::MatrixXd pinv(const Eigen::MatrixXd& design, double tol, Eigen::Index* rank) {
    if (!(tol > 0.0)) throw std::invalid_argument("pinv tolerance must be positive");
    const Eigen::Index rows = design.rows(), cols = design.cols();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cols, rows);
    if (rank) *rank = 0;
    if (rows == 0 || cols == 0) return out;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] <= 0.0) return out;
    const double cut = tol * sv[0];
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] <= cut) break;
        out.noalias() += svd.matrixV().col(i) * (svd.matrixU().col(i).transpose() / sv[i]);
        ++r;
    }
    if (rank) *rank = r;
    return out;
}

Eigen::VectorXd pinv_increment(const Eigen::MatrixXd& design, const Eigen::VectorXd& dN, double tol,
                               Eigen::Index* rank) {
    if (design.rows() != dN.size()) throw std::invalid_argument("pinv_increment: dimension mismatch");
    return pinv(design, tol, rank) * dN;
}

MarginalProjectors marginal_projectors(const IncrementMatrix& inc, double tol) {
    MarginalProjectors proj;
    for (Axis axis : {Axis::duration, Axis::age}) {
        auto& cells = axis == Axis::duration ? proj.duration : proj.age;
        const auto dim = static_cast<Eigen::Index>(axis == Axis::duration ? inc.p : inc.q);
        cells.resize(inc.cells(axis));
        for (std::size_t c = 1; c < cells.size(); ++c) {
            auto& cp = cells[c];
            cp.entries = inc.cell_entries(axis, c);
            Eigen::Index rank = 0;
            cp.pinv = pinv(inc.design(axis, c), tol, &rank);
            cp.deficient = rank < dim;
            if (cp.deficient) cp.pinv.setZero();
        }
        cells[0].pinv = Eigen::MatrixXd::Zero(dim, 0);
    }
    return proj;
}

ThetaEstimate marginal_from_increments(const IncrementMatrix& inc, const MarginalProjectors& proj,
                                       const Eigen::VectorXd& dn_entries) {
    if (dn_entries.size() != static_cast<Eigen::Index>(inc.entries.size()))
        throw std::invalid_argument("increment vector must have one value per cell entry");
    ThetaEstimate theta = ThetaEstimate::zeros(inc.grid, inc.p, inc.q);
    for (Axis axis : {Axis::duration, Axis::age}) {
        auto& values = axis == Axis::duration ? theta.A.values : theta.B.values;
        const auto& cells = proj.axis(axis);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto& cp = cells[c];
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(cp.entries.size()));
            for (std::size_t r = 0; r < cp.entries.size(); ++r)
                rhs[static_cast<Eigen::Index>(r)] = dn_entries[static_cast<Eigen::Index>(cp.entries[r])];
            const auto row = static_cast<Eigen::Index>(c);
            values.row(row) = values.row(row - 1);
            if (!cp.deficient) values.row(row) += (cp.pinv * rhs).transpose();
        }
    }
    return theta;
}

MarginalEstimate marginal_estimates(const IncrementMatrix& inc, const MarginalProjectors& proj) {
    MarginalEstimate est;
    est.m_hat = marginal_from_increments(inc, proj, inc.dN());
    for (const auto& cp : proj.duration) est.rank_deficient_duration.push_back(cp.deficient);
    for (const auto& cp : proj.age) est.rank_deficient_age.push_back(cp.deficient);
    // the origin carries no cell; it is not a deficiency
    est.rank_deficient_duration[0] = false;
    est.rank_deficient_age[0] = false;
    return est;
}

MarginalEstimate marginal_estimates(const IncrementMatrix& inc, double tol) {
    return marginal_estimates(inc, marginal_projectors(inc, tol));
}

}  // namespace twoscale
