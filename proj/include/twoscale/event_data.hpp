#pragma once

#include "twoscale/grid.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace twoscale {

/// Piecewise-constant, left-continuous covariate path on (0, exit].
/// Piece r holds on (breaks[r], breaks[r+1]]; the last piece runs to exit.
class CovariatePath {
public:
    CovariatePath() = default;
    CovariatePath(std::vector<double> breaks, Eigen::MatrixXd values);
    static CovariatePath constant(const Eigen::VectorXd& value);

    std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
    std::size_t pieces() const { return breaks_.size(); }
    const std::vector<double>& breaks() const { return breaks_; }
    const Eigen::MatrixXd& values() const { return values_; }

    // Value at duration x > 0 (left limit at change points). x <= 0 gives zero.
    Eigen::VectorXd at(double x) const;

private:
    std::vector<double> breaks_;
    Eigen::MatrixXd values_;
};

struct SubjectRecord {
    std::string id;
    double entry_age = 0.0;
    double exit_time = 0.0;
    bool event = false;
    CovariatePath x;
    CovariatePath z;

    // Design rows on the duration scale; zero outside the window (0, exit_time].
    Eigen::VectorXd x_at(double s) const;
    Eigen::VectorXd z_at(double s) const;
    // Age-shifted rows C_i^{-a_i}(u) = C_i(u - a_i).
    Eigen::VectorXd x_shifted(double u) const { return x_at(u - entry_age); }
    Eigen::VectorXd z_shifted(double u) const { return z_at(u - entry_age); }
};

/// Validated cohort. Columns 0..d-1 of the X and Z paths coincide.
struct SubjectCohort {
    std::vector<SubjectRecord> subjects;
    std::size_t p = 0;
    std::size_t q = 0;
    std::size_t d = 0;
    double t_max = 0.0;
    double a0 = 0.0;
    double a_max = 0.0;
    // Column names: shared (d), X-only (p-d), Z-only (q-d). Optional.
    std::vector<std::string> covariate_names;

    std::size_t n() const { return subjects.size(); }
    std::size_t event_count() const;
    void validate() const;  // throws std::invalid_argument
};

/// Column mapping for CSV ingestion. Empty name lists mean "positional":
/// the covariate columns after the four fixed ones are shared, X-only and
/// Z-only, in that order.
struct CohortSchema {
    std::vector<std::string> shared;
    std::vector<std::string> x_only;
    std::vector<std::string> z_only;
    std::size_t p = 1;
    std::size_t q = 1;
    std::size_t d = 1;
    char delimiter = ',';
    std::optional<double> t_max;
    std::optional<double> a0;
    std::optional<double> a_max;

    bool named() const { return !shared.empty() || !x_only.empty() || !z_only.empty(); }
};

SubjectCohort parse_subjects(std::istream& in, const CohortSchema& schema);
SubjectCohort parse_subjects_file(const std::string& path, const CohortSchema& schema);
/// Inverse of parse_subjects for time-constant covariates; doubles are
/// written with 17 significant digits so a re-parse is bit-identical.
void write_subjects(std::ostream& out, const SubjectCohort& cohort);

/// One (subject, duration cell) pair at which the subject is at risk.
struct CellEntry {
    std::size_t subject = 0;
    std::size_t t_cell = 0;  // 1..j-1
    std::size_t a_cell = 0;  // age cell containing a_i + s_{t_cell}
    double dN = 0.0;
};

/// Grid-aligned counting-process data. Every observation lives on a
/// subject-duration cell; the same observation enters the age axis through
/// the age cell that contains its age, with design row kappa * Z where
/// kappa = dt / da is the cell exposure in age-cell units.
struct IncrementMatrix {
    TwoScaleGrid grid;
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t q = 0;
    std::size_t d = 0;
    double kappa = 1.0;

    std::vector<CellEntry> entries;  // sorted by (t_cell, subject)
    Eigen::MatrixXd x_rows;          // entries x p
    Eigen::MatrixXd z_rows;          // entries x q, unscaled
    std::vector<std::size_t> t_offsets;  // j+1 CSR offsets into entries
    std::vector<std::size_t> a_order;    // entry indices grouped by age cell
    std::vector<std::size_t> a_offsets;  // k+1 CSR offsets into a_order
    std::vector<double> entry_ages;

    std::size_t cells(Axis axis) const { return grid.size(axis); }
    // Entry indices observed in a cell of either axis.
    std::vector<std::size_t> cell_entries(Axis axis, std::size_t cell) const;
    // Stacked design rows of a cell: X rows (duration) or kappa*Z rows (age).
    Eigen::MatrixXd design(Axis axis, std::size_t cell) const;
    // n-vector of event increments in a cell.
    Eigen::VectorXd delta_n(Axis axis, std::size_t cell) const;
    double total_events() const;
    Eigen::VectorXd dN() const;
};

IncrementMatrix counting_increments(const SubjectCohort& cohort, const TwoScaleGrid& grid);

}  // namespace twoscale
