#include "twoscale/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace twoscale {

namespace {

constexpr double kSnapTol = 1e-9;

Eigen::VectorXd uniform_points(double lo, double hi, std::size_t count) {
    Eigen::VectorXd pts(static_cast<Eigen::Index>(count));
    const double h = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) pts[static_cast<Eigen::Index>(i)] = lo + h * static_cast<double>(i);
    // exact endpoints regardless of rounding in lo + h*(count-1)
    pts[0] = lo;
    pts[static_cast<Eigen::Index>(count - 1)] = hi;
    return pts;
}

}  // namespace

std::string to_string(Axis axis) { return axis == Axis::duration ? "duration" : "age"; }

Axis axis_from_string(const std::string& name) {
    if (name == "duration" || name == "time") return Axis::duration;
    if (name == "age") return Axis::age;
    throw std::invalid_argument("unknown axis '" + name + "'");
}

TwoScaleGrid::TwoScaleGrid(double t_max, double a0, double a_max, std::size_t j, std::size_t k) {
    if (j < 2 || k < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw std::invalid_argument("t_max must be positive");
    if (!(a0 < a_max) || !std::isfinite(a0) || !std::isfinite(a_max))
        throw std::invalid_argument("age range must satisfy a0 < a_max");
    t_points_ = uniform_points(0.0, t_max, j);
    a_points_ = uniform_points(a0, a_max, k);
    dt_ = t_max / static_cast<double>(j - 1);
    da_ = (a_max - a0) / static_cast<double>(k - 1);
}

const Eigen::VectorXd& TwoScaleGrid::points(Axis axis) const {
    return axis == Axis::duration ? t_points_ : a_points_;
}

bool TwoScaleGrid::contains(Axis axis, double x) const {
    const auto& pts = points(axis);
    const double h = spacing(axis);
    return x >= pts[0] - kSnapTol * h && x <= pts[pts.size() - 1] + kSnapTol * h;
}

std::size_t TwoScaleGrid::snap_up(Axis axis, double x) const {
    if (!contains(axis, x)) throw std::out_of_range(to_string(axis) + " value outside grid range");
    const auto& pts = points(axis);
    const double pos = (x - pts[0]) / spacing(axis);
    auto idx = static_cast<long>(std::ceil(pos - kSnapTol));
    idx = std::clamp<long>(idx, 0, static_cast<long>(pts.size()) - 1);
    return static_cast<std::size_t>(idx);
}

std::size_t TwoScaleGrid::snap_down(Axis axis, double x) const {
    if (!contains(axis, x)) throw std::out_of_range(to_string(axis) + " value outside grid range");
    const auto& pts = points(axis);
    const double pos = (x - pts[0]) / spacing(axis);
    auto idx = static_cast<long>(std::floor(pos + kSnapTol));
    idx = std::clamp<long>(idx, 0, static_cast<long>(pts.size()) - 1);
    return static_cast<std::size_t>(idx);
}

bool TwoScaleGrid::same_layout(const TwoScaleGrid& other) const {
    return t_points_.size() == other.t_points_.size() && a_points_.size() == other.a_points_.size() &&
           t_points_ == other.t_points_ && a_points_ == other.a_points_;
}

TwoScaleGrid build_grid(double t_max, double a0, double a_max, std::size_t j, std::size_t k) {
    return TwoScaleGrid(t_max, a0, a_max, j, k);
}

StepFunctionVec::StepFunctionVec(Axis axis_, Eigen::VectorXd points_, Eigen::MatrixXd values_)
    : axis(axis_), points(std::move(points_)), values(std::move(values_)) {
    if (values.rows() != points.size())
        throw std::invalid_argument("step function values must have one row per grid point");
}

StepFunctionVec StepFunctionVec::zeros(const TwoScaleGrid& grid, Axis axis, std::size_t dim) {
    const auto& pts = grid.points(axis);
    return StepFunctionVec(axis, pts, Eigen::MatrixXd::Zero(pts.size(), static_cast<Eigen::Index>(dim)));
}

Eigen::VectorXd step_eval(const StepFunctionVec& f, double x) {
    if (f.size() == 0) throw std::invalid_argument("empty step function");
    const double lo = f.points[0];
    const double hi = f.points[f.points.size() - 1];
    const double tol = 1e-9 * (f.size() > 1 ? (hi - lo) / static_cast<double>(f.size() - 1) : 1.0);
    if (x < lo - tol || x > hi + tol) throw std::out_of_range("step_eval: point outside axis range");
    // largest grid point <= x; grids are sorted so a binary search covers non-uniform input too
    const auto* begin = f.points.data();
    const auto* end = begin + f.points.size();
    const auto* it = std::upper_bound(begin, end, x + tol);
    const auto idx = static_cast<Eigen::Index>(it - begin) - 1;
    return f.values.row(std::max<Eigen::Index>(idx, 0)).transpose();
}

Eigen::MatrixXd increments(const Eigen::MatrixXd& values) {
    Eigen::MatrixXd inc = values;
    for (Eigen::Index l = values.rows() - 1; l > 0; --l) inc.row(l) -= values.row(l - 1);
    return inc;
}

Eigen::MatrixXd increments(const StepFunctionVec& f) { return increments(f.values); }

Eigen::MatrixXd cumulative(const Eigen::MatrixXd& inc) {
    Eigen::MatrixXd out = inc;
    for (Eigen::Index l = 1; l < out.rows(); ++l) out.row(l) += out.row(l - 1);
    return out;
}

ThetaEstimate ThetaEstimate::zeros(const TwoScaleGrid& grid, std::size_t p, std::size_t q) {
    return {StepFunctionVec::zeros(grid, Axis::duration, p), StepFunctionVec::zeros(grid, Axis::age, q)};
}

Eigen::VectorXd ThetaEstimate::stack() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(stacked_size()));
    Eigen::Index pos = 0;
    for (Eigen::Index l = 0; l < A.values.rows(); ++l)
        for (Eigen::Index c = 0; c < A.values.cols(); ++c) v[pos++] = A.values(l, c);
    for (Eigen::Index m = 0; m < B.values.rows(); ++m)
        for (Eigen::Index c = 0; c < B.values.cols(); ++c) v[pos++] = B.values(m, c);
    return v;
}

ThetaEstimate ThetaEstimate::unstack(const Eigen::VectorXd& v, const TwoScaleGrid& grid, std::size_t p,
                                     std::size_t q) {
    if (static_cast<std::size_t>(v.size()) != grid.j() * p + grid.k() * q)
        throw std::invalid_argument("stacked vector has wrong length");
    ThetaEstimate theta = zeros(grid, p, q);
    Eigen::Index pos = 0;
    for (Eigen::Index l = 0; l < theta.A.values.rows(); ++l)
        for (Eigen::Index c = 0; c < theta.A.values.cols(); ++c) theta.A.values(l, c) = v[pos++];
    for (Eigen::Index m = 0; m < theta.B.values.rows(); ++m)
        for (Eigen::Index c = 0; c < theta.B.values.cols(); ++c) theta.B.values(m, c) = v[pos++];
    return theta;
}

double sup_norm(const ThetaEstimate& theta) {
    double s = 0.0;
    if (theta.A.values.size() > 0) s = theta.A.values.cwiseAbs().maxCoeff();
    if (theta.B.values.size() > 0) s = std::max(s, theta.B.values.cwiseAbs().maxCoeff());
    return s;
}

ThetaEstimate operator-(const ThetaEstimate& lhs, const ThetaEstimate& rhs) {
    ThetaEstimate out = lhs;
    out.A.values -= rhs.A.values;
    out.B.values -= rhs.B.values;
    return out;
}

}  // namespace twoscale
