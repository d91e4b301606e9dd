#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

namespace twoscale {

enum class Axis { duration, age };

std::string to_string(Axis axis);
Axis axis_from_string(const std::string& name);

/// Uniform product discretization of the duration axis [0, t_max] and the
/// age axis [a0, a_max]. Cell l of an axis is the half-open interval
/// (x_{l-1}, x_l]; point 0 is the axis origin and carries no cell.
class TwoScaleGrid {
public:
    TwoScaleGrid() = default;
    TwoScaleGrid(double t_max, double a0, double a_max, std::size_t j, std::size_t k);

    const Eigen::VectorXd& t_points() const { return t_points_; }
    const Eigen::VectorXd& a_points() const { return a_points_; }
    const Eigen::VectorXd& points(Axis axis) const;

    std::size_t j() const { return static_cast<std::size_t>(t_points_.size()); }
    std::size_t k() const { return static_cast<std::size_t>(a_points_.size()); }
    std::size_t size(Axis axis) const { return axis == Axis::duration ? j() : k(); }

    double t_max() const { return t_points_[t_points_.size() - 1]; }
    double a0() const { return a_points_[0]; }
    double a_max() const { return a_points_[a_points_.size() - 1]; }
    double dt() const { return dt_; }
    double da() const { return da_; }
    double spacing(Axis axis) const { return axis == Axis::duration ? dt_ : da_; }

    // Index of the smallest grid point >= x (right-snapping). Values within
    // a relative 1e-9 of a grid point snap onto it. x must lie in the range.
    std::size_t snap_up(Axis axis, double x) const;
    // Index of the largest grid point <= x, same tolerance.
    std::size_t snap_down(Axis axis, double x) const;
    bool contains(Axis axis, double x) const;

    bool same_layout(const TwoScaleGrid& other) const;

private:
    Eigen::VectorXd t_points_;
    Eigen::VectorXd a_points_;
    double dt_ = 0.0;
    double da_ = 0.0;
};

TwoScaleGrid build_grid(double t_max, double a0, double a_max, std::size_t j, std::size_t k);

/// Right-continuous step function on one axis of the grid; values(l, c) is
/// component c at grid point l.
struct StepFunctionVec {
    Axis axis = Axis::duration;
    Eigen::VectorXd points;
    Eigen::MatrixXd values;

    StepFunctionVec() = default;
    StepFunctionVec(Axis axis_, Eigen::VectorXd points_, Eigen::MatrixXd values_);

    static StepFunctionVec zeros(const TwoScaleGrid& grid, Axis axis, std::size_t dim);

    std::size_t size() const { return static_cast<std::size_t>(points.size()); }
    std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

Eigen::VectorXd step_eval(const StepFunctionVec& f, double x);

/// Backward differences f(x_l) - f(x_{l-1}); the first row is differenced
/// against zero.
Eigen::MatrixXd increments(const StepFunctionVec& f);
Eigen::MatrixXd increments(const Eigen::MatrixXd& values);
/// Running sum over rows; inverse of increments().
Eigen::MatrixXd cumulative(const Eigen::MatrixXd& increments);

/// theta = (A, B): A on the duration axis (dim p), B on the age axis (dim q).
struct ThetaEstimate {
    StepFunctionVec A;
    StepFunctionVec B;

    static ThetaEstimate zeros(const TwoScaleGrid& grid, std::size_t p, std::size_t q);

    std::size_t p() const { return A.dim(); }
    std::size_t q() const { return B.dim(); }
    std::size_t stacked_size() const { return A.size() * p() + B.size() * q(); }

    // Point-major layout: A(l, c) at l*p + c, then B(m, c) at j*p + m*q + c.
    Eigen::VectorXd stack() const;
    static ThetaEstimate unstack(const Eigen::VectorXd& v, const TwoScaleGrid& grid,
                                 std::size_t p, std::size_t q);
};

double sup_norm(const ThetaEstimate& theta);
ThetaEstimate operator-(const ThetaEstimate& lhs, const ThetaEstimate& rhs);

}  // namespace twoscale
