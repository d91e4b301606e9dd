#include "twoscale/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace twoscale {

namespace {


template <class RowFn>
void for_each_point(const ThetaEstimate& theta, RowFn&& fn) {
    for (Axis axis : {Axis::duration, Axis::age}) {
        const auto& f = axis == Axis::duration ? theta.A : theta.B;
        for (Eigen::Index c = 0; c < f.values.cols(); ++c)
            for (Eigen::Index l = 0; l < f.values.rows(); ++l) fn(axis, l, c, f);
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_step_csv(std::ostream& out, const ThetaEstimate& theta, const std::string& value_name) {
    out << "axis,point,component," << value_name << '\n';
    for_each_point(theta, [&](Axis axis, Eigen::Index l, Eigen::Index c, const StepFunctionVec& f) {
        out << to_string(axis) << ',' << format_double(f.points[l]) << ',' << c << ','
            << format_double(f.values(l, c)) << '\n';
    });
}

void write_marginal_csv(std::ostream& out, const MarginalEstimate& est) {
    out << "axis,point,component,value,rank_deficient\n";
    for_each_point(est.m_hat, [&](Axis axis, Eigen::Index l, Eigen::Index c, const StepFunctionVec& f) {
        out << to_string(axis) << ',' << format_double(f.points[l]) << ',' << c << ','
            << format_double(f.values(l, c)) << ',' << (est.rank_flags(axis)[static_cast<std::size_t>(l)] ? 1 : 0)
            << '\n';
    });
}

ThetaEstimate read_step_csv(std::istream& in) {
    struct Row {
        Axis axis;
        double point;
        std::size_t comp;
        double value;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.rfind("axis,", 0) == 0) continue;
        std::istringstream ss(line);
        std::string axis_s, point_s, comp_s, value_s;
        if (!std::getline(ss, axis_s, ',') || !std::getline(ss, point_s, ',') || !std::getline(ss, comp_s, ',') ||
            !std::getline(ss, value_s, ','))
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected axis,point,component,value");
        try {
            rows.push_back({axis_from_string(axis_s), std::stod(point_s), std::stoul(comp_s), std::stod(value_s)});
        } catch (const std::logic_error&) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": malformed estimate row");
        }
    }
    std::vector<double> t, u;
    std::size_t p = 0, q = 0;
    for (const auto& r : rows) {
        auto& pts = r.axis == Axis::duration ? t : u;
        if (r.comp == 0) pts.push_back(r.point);
        (r.axis == Axis::duration ? p : q) = std::max(r.axis == Axis::duration ? p : q, r.comp + 1);
    }
    if (t.size() < 2 || u.size() < 2) throw std::runtime_error("estimate file needs both axes");
    const TwoScaleGrid grid(t.back(), u.front(), u.back(), t.size(), u.size());
    ThetaEstimate theta = ThetaEstimate::zeros(grid, p, q);
    if (rows.size() != theta.stacked_size()) throw std::runtime_error("estimate file does not cover a full grid");
    for (const auto& r : rows) {
        auto& f = r.axis == Axis::duration ? theta.A : theta.B;
        f.values(static_cast<Eigen::Index>(grid.snap_down(r.axis, r.point)), static_cast<Eigen::Index>(r.comp)) =
            r.value;
    }
    return theta;
}

InferenceSummary summarize_inference(const ThetaEstimate& theta, const BootstrapEnsemble& ens, double alpha) {
    InferenceSummary s;
    s.estimate = theta;
    s.sigma = pointwise_se(ens);
    s.alpha = alpha;
    s.z = two_sided_normal_quantile(alpha);
    for (Axis axis : {Axis::duration, Axis::age}) {
        const std::size_t dim = axis == Axis::duration ? theta.p() : theta.q();
        const auto& sig = axis == Axis::duration ? s.sigma.A : s.sigma.B;
        const auto& est = axis == Axis::duration ? theta.A : theta.B;
        for (std::size_t c = 0; c < dim; ++c) {
            const auto col = static_cast<Eigen::Index>(c);
            if (sig.values.col(col).maxCoeff() > 0.0) {
                s.bands.push_back(uniform_band(ens, s.sigma, theta, axis, c, alpha));
                continue;
            }
            BandResult flat;
            flat.axis = axis;
            flat.component = c;
            flat.alpha = alpha;
            flat.sigma = sig.values.col(col);
            flat.lower = flat.upper = est.values.col(col);
            flat.nu1 = est.points[0];
            flat.nu2 = est.points[est.points.size() - 1];
            s.bands.push_back(flat);
        }
    }
    return s;
}

void write_summary_csv(std::ostream& out, const InferenceSummary& s) {
    out << "axis,point,component,estimate,se,ci_lower,ci_upper,band_lower,band_upper\n";
    for_each_point(s.estimate, [&](Axis axis, Eigen::Index l, Eigen::Index c, const StepFunctionVec& f) {
        const double est = f.values(l, c);
        const double se = (axis == Axis::duration ? s.sigma.A : s.sigma.B).values(l, c);
        const BandResult* band = nullptr;
        for (const auto& b : s.bands)
            if (b.axis == axis && b.component == static_cast<std::size_t>(c)) band = &b;
        if (!band) throw std::invalid_argument("summary is missing a band");
        out << to_string(axis) << ',' << format_double(f.points[l]) << ',' << c << ',' << format_double(est) << ','
            << format_double(se) << ',' << format_double(est - s.z * se) << ',' << format_double(est + s.z * se)
            << ',' << format_double(band->lower[l]) << ',' << format_double(band->upper[l]) << '\n';
    });
}

void write_survival_csv(std::ostream& out, const SurvivalCurve& curve) {
    out << "t,survival,band_lower,band_upper\n";
    for (Eigen::Index l = 0; l < curve.t.size(); ++l)
        out << format_double(curve.t[l]) << ',' << format_double(curve.survival[l]) << ','
            << format_double(curve.band_lower[l]) << ',' << format_double(curve.band_upper[l]) << '\n';
}

void write_solve_report(std::ostream& out, const SolveReport& rep, const SpectralReport* spectral) {
    out << "method=" << to_string(rep.method) << '\n'
        << "iterations=" << rep.iterations << '\n'
        << "converged=" << (rep.converged ? "true" : "false") << '\n'
        << "residual=" << format_double(rep.residual) << '\n'
        << "constraint_residual=" << format_double(rep.constraint_residual) << '\n'
        << "condition=" << format_double(rep.condition) << '\n'
        << "spectral_warning=" << (rep.spectral_warning ? "true" : "false") << '\n';
    if (!spectral) return;
    out << "unit_multiplicity_E=" << spectral->unit_multiplicity_E << '\n'
        << "unit_multiplicity_E2="
        << (spectral->unit_multiplicity_E2 ? std::to_string(*spectral->unit_multiplicity_E2) : std::string("n/a"))
        << '\n'
        << "spectral_radius=" << format_double(spectral->spectral_radius) << '\n'
        << "power_iterations=" << spectral->power_iterations << '\n'
        << "power_converged=" << (spectral->power_converged ? "true" : "false") << '\n'
        << "identifiable=" << (spectral->identifiable ? "true" : "false") << '\n';
}

void write_bias_table(std::ostream& out, const std::vector<StudyResult>& studies) {
    out << "axis,point,n,bias\n";
    for (Axis axis : {Axis::age, Axis::duration})
        for (const auto& st : studies) {
            const auto& a = st.axis(axis);
            for (auto i : table_indices(static_cast<std::size_t>(a.points.size())))
                out << to_string(axis) << ',' << format_double(a.points[static_cast<Eigen::Index>(i)]) << ',' << st.n
                    << ',' << format_double(a.bias[static_cast<Eigen::Index>(i)]) << '\n';
        }
}

void write_coverage_table(std::ostream& out, const std::vector<StudyResult>& studies) {
    out << "axis,point,n,mean_se,sd,coverage\n";
    for (Axis axis : {Axis::age, Axis::duration})
        for (const auto& st : studies) {
            const auto& a = st.axis(axis);
            if (a.mean_se.size() == 0) throw std::invalid_argument("coverage table needs a coverage study");
            for (auto i : table_indices(static_cast<std::size_t>(a.points.size()))) {
                const auto k = static_cast<Eigen::Index>(i);
                out << to_string(axis) << ',' << format_double(a.points[k]) << ',' << st.n << ','
                    << format_double(a.mean_se[k]) << ',' << format_double(a.mc_sd[k]) << ','
                    << format_double(a.coverage[k]) << '\n';
            }
        }
}

void write_band_table(std::ostream& out, const std::vector<StudyResult>& studies) {
    out << "n,coverage_age,coverage_time\n";
    for (const auto& st : studies)
        out << st.n << ',' << format_double(st.age.band_coverage) << ',' << format_double(st.duration.band_coverage)
            << '\n';
}

}  // namespace twoscale
