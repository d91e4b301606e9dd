#pragma once

#include "twoscale/bootstrap.hpp"
#include "twoscale/marginal.hpp"
#include "twoscale/operator.hpp"
#include "twoscale/simulation.hpp"
#include "twoscale/solver.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace twoscale {

/// Shortest round-trip text for a double (17 significant digits).
std::string format_double(double v);

/// `axis,point,component,<value_name>`.
void write_step_csv(std::ostream& out, const ThetaEstimate& theta, const std::string& value_name = "value");
/// Same with a trailing `rank_deficient` column (0/1).
void write_marginal_csv(std::ostream& out, const MarginalEstimate& est);
/// Reads back the output of write_step_csv (any value column name); grid and
/// dimensions are taken from the file. Extra trailing columns are ignored.
ThetaEstimate read_step_csv(std::istream& in);

/// Bands from the bootstrap ensemble for every axis and component.
struct InferenceSummary {
    ThetaEstimate estimate;
    ThetaEstimate sigma;
    std::vector<BandResult> bands;  // duration components first, then age
    double alpha = 0.05;
    double z = 1.959964;
};

/// An axis/component whose bootstrap sd is zero everywhere gets a degenerate
/// band equal to the estimate (c = 0).
InferenceSummary summarize_inference(const ThetaEstimate& theta, const BootstrapEnsemble& ens, double alpha);

/// `axis,point,component,estimate,se,ci_lower,ci_upper,band_lower,band_upper`.
void write_summary_csv(std::ostream& out, const InferenceSummary& s);
/// `t,survival,band_lower,band_upper`.
void write_survival_csv(std::ostream& out, const SurvivalCurve& curve);
/// key=value lines.
void write_solve_report(std::ostream& out, const SolveReport& rep, const SpectralReport* spectral);

/// `axis,point,n,bias` at the tabulated points.
void write_bias_table(std::ostream& out, const std::vector<StudyResult>& studies);
/// `axis,point,n,mean_se,sd,coverage` at the tabulated points.
void write_coverage_table(std::ostream& out, const std::vector<StudyResult>& studies);
/// `n,coverage_age,coverage_time`.
void write_band_table(std::ostream& out, const std::vector<StudyResult>& studies);

}  // namespace twoscale
