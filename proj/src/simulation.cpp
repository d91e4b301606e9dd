#include "twoscale/simulation.hpp"

#include "twoscale/parallel.hpp"
#include "twoscale/solver.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>

namespace twoscale {

namespace {

constexpr double kCoverTol = 1e-10;


struct RepOutcome {
    ThetaEstimate error;  // theta_hat - theta_true
    ThetaEstimate se;
    bool band_duration = false;
    bool band_age = false;
};

AxisStudy summarize(const std::vector<RepOutcome>& reps, Axis axis, const Eigen::VectorXd& points,
                    bool with_se, double z) {
    const auto pick = [axis](const ThetaEstimate& t) { return (axis == Axis::duration ? t.A : t.B).values.col(0); };
    const auto np = points.size();
    const double r = static_cast<double>(reps.size());
    AxisStudy out;
    out.points = points;
    out.bias = Eigen::VectorXd::Zero(np);
    out.mc_sd = Eigen::VectorXd::Zero(np);
    for (const auto& rep : reps) out.bias += pick(rep.error);
    out.bias /= r;
    if (reps.size() > 1) {
        for (const auto& rep : reps) out.mc_sd.array() += (pick(rep.error) - out.bias).array().square();
        out.mc_sd = (out.mc_sd / (r - 1.0)).cwiseSqrt();
    }
    if (!with_se) return out;
    out.mean_se = Eigen::VectorXd::Zero(np);
    out.coverage = Eigen::VectorXd::Zero(np);
    std::size_t band_hits = 0;
    for (const auto& rep : reps) {
        const Eigen::VectorXd err = pick(rep.error), se = pick(rep.se);
        out.mean_se += se;
        for (Eigen::Index i = 0; i < np; ++i)
            if (std::abs(err[i]) <= z * se[i] + kCoverTol) out.coverage[i] += 1.0;
        band_hits += axis == Axis::duration ? rep.band_duration : rep.band_age;
    }
    out.mean_se /= r;
    out.coverage /= r;
    out.band_coverage = static_cast<double>(band_hits) / r;
    return out;
}

bool band_covers(const BandResult& band, const Eigen::VectorXd& truth) {
    for (Eigen::Index i = 0; i < truth.size(); ++i)
        if (truth[i] < band.lower[i] - kCoverTol || truth[i] > band.upper[i] + kCoverTol) return false;
    return true;
}

FitOptions study_fit_options() {
    FitOptions opts;
    opts.method = SolveMethod::direct;
    opts.spectral = false;
    return opts;
}

}  // namespace

void Scenario::validate() const {
    if (alpha_breaks.size() < 2 || alpha_rates.size() + 1 != alpha_breaks.size())
        throw std::invalid_argument("scenario: need one alpha rate per interval between breaks");
    if (alpha_breaks.front() != 0.0) throw std::invalid_argument("scenario: alpha breaks must start at 0");
    for (std::size_t r = 1; r < alpha_breaks.size(); ++r)
        if (!(alpha_breaks[r] > alpha_breaks[r - 1]))
            throw std::invalid_argument("scenario: alpha breaks must increase");
    for (double rate : alpha_rates)
        if (!(rate + beta > 0.0)) throw std::invalid_argument("scenario: total hazard alpha + beta must be positive");
    if (!(zero_entry_prob >= 0.0 && zero_entry_prob <= 1.0))
        throw std::invalid_argument("scenario: zero-entry probability must lie in [0, 1]");
    if (!(entry_max >= 0.0)) throw std::invalid_argument("scenario: entry_max must be non-negative");
    if (!(censor_time > 0.0) || censor_time > t_max)
        throw std::invalid_argument("scenario: censoring time must lie in (0, t_max]");
    if (a0 > 0.0) throw std::invalid_argument("scenario: a0 must not exceed the smallest entry age 0");
    if (entry_max + censor_time > a_max) throw std::invalid_argument("scenario: entry_max + censor_time exceeds a_max");
    if (grid_time < 2 || grid_age < 2) throw std::invalid_argument("scenario: grids need at least 2 points");
}

double Scenario::alpha(double t) const {
    // piece r covers (b_r, b_{r+1}]; t = 0 belongs to the first piece; beyond the last break the last rate holds
    for (std::size_t r = 0; r + 1 < alpha_breaks.size(); ++r)
        if (t <= alpha_breaks[r + 1]) return alpha_rates[r];
    return alpha_rates.back();
}

double Scenario::alpha_integral(double t) const {
    double sum = 0.0;
    for (std::size_t r = 0; r < alpha_rates.size(); ++r) {
        const double lo = alpha_breaks[r];
        const double hi = r + 1 == alpha_rates.size() ? std::max(t, alpha_breaks[r + 1]) : alpha_breaks[r + 1];
        if (t <= lo) break;
        sum += alpha_rates[r] * (std::min(t, hi) - lo);
    }
    return sum;
}

std::string Scenario::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](double v) {
        unsigned char bytes[sizeof v];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char b : bytes) h = (h ^ b) * 0x100000001b3ULL;
    };
    mix(beta);
    for (double b : alpha_breaks) mix(b);
    for (double r : alpha_rates) mix(r);
    for (double v : {zero_entry_prob, entry_max, censor_time, static_cast<double>(grid_time),
                     static_cast<double>(grid_age), t_max, a0, a_max})
        mix(v);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SubjectCohort simulate_cohort(std::size_t n, const Scenario& sc, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("simulate_cohort needs n >= 1");
    sc.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    SubjectCohort cohort;
    cohort.p = cohort.q = cohort.d = 1;
    cohort.t_max = sc.t_max;
    cohort.a0 = sc.a0;
    cohort.a_max = sc.a_max;
    cohort.covariate_names = {"at_risk"};
    cohort.subjects.reserve(n);
    const auto& br = sc.alpha_breaks;
    for (std::size_t i = 0; i < n; ++i) {
        SubjectRecord s;
        s.id = std::to_string(i + 1);
        const double mix = unif(rng);
        const double u = unif(rng);
        s.entry_age = mix < sc.zero_entry_prob ? 0.0 : u * sc.entry_max;
        // invert the piecewise-linear cumulative hazard at an Exp(1) draw
        double target = expo(rng);
        double t = 0.0;
        for (std::size_t r = 0;; ++r) {
            const double rate = sc.alpha_rates[std::min(r, sc.alpha_rates.size() - 1)] + sc.beta;
            const double end = r + 1 < br.size() ? br[r + 1] : std::numeric_limits<double>::infinity();
            const double mass = rate * (end - t);
            if (target <= mass) {
                t += target / rate;
                break;
            }
            target -= mass;
            t = end;
        }
        s.event = t <= sc.censor_time;
        s.exit_time = s.event ? t : sc.censor_time;
        s.x = CovariatePath::constant(Eigen::VectorXd::Ones(1));
        s.z = s.x;
        cohort.subjects.push_back(std::move(s));
    }
    return cohort;
}

ThetaEstimate true_cumulatives(const Scenario& sc, const TwoScaleGrid& grid) {
    ThetaEstimate truth = ThetaEstimate::zeros(grid, 1, 1);
    for (Eigen::Index l = 0; l < truth.A.points.size(); ++l) truth.A.values(l, 0) = sc.alpha_integral(truth.A.points[l]);
    for (Eigen::Index m = 0; m < truth.B.points.size(); ++m)
        truth.B.values(m, 0) = sc.beta * (truth.B.points[m] - grid.a0());
    return truth;
}

std::vector<std::size_t> table_indices(std::size_t points) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 1; r <= 5; ++r) idx.push_back(std::min(points, r * points / 5) - 1);
    return idx;
}

StudyResult bias_study(std::size_t n, std::size_t reps, const Scenario& sc, std::uint64_t seed, std::size_t threads) {
    if (reps < 1) throw std::invalid_argument("bias_study needs reps >= 1");
    sc.validate();
    const TwoScaleGrid grid = sc.grid();
    const ThetaEstimate truth = true_cumulatives(sc, grid);
    std::vector<RepOutcome> out(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
        const SubjectCohort cohort = simulate_cohort(n, sc, derive_seed(seed, 1, r));
        const Fit fit = fit_model(cohort, grid, study_fit_options());
        out[r].error = fit.theta - truth;
    });
    StudyResult res;
    res.n = n;
    res.reps = reps;
    res.seed = seed;
    res.duration = summarize(out, Axis::duration, grid.t_points(), false, 0.0);
    res.age = summarize(out, Axis::age, grid.a_points(), false, 0.0);
    return res;
}

StudyResult coverage_study(std::size_t n, std::size_t reps, std::size_t boot, double alpha, const Scenario& sc,
                           std::uint64_t seed, std::size_t threads, int variant, WeightLaw law) {
    if (reps < 1) throw std::invalid_argument("coverage_study needs reps >= 1");
    if (boot < 2) throw std::invalid_argument("coverage_study needs at least 2 bootstrap replicates");
    sc.validate();
    const TwoScaleGrid grid = sc.grid();
    const ThetaEstimate truth = true_cumulatives(sc, grid);
    const double z = two_sided_normal_quantile(alpha);
    std::vector<RepOutcome> out(reps);
    // parallel over repetitions; each bootstrap runs serially inside its worker
    parallel_for(reps, threads, [&](std::size_t r) {
        const SubjectCohort cohort = simulate_cohort(n, sc, derive_seed(seed, 1, r));
        const Fit fit = fit_model(cohort, grid, study_fit_options());
        const BootstrapEnsemble ens = run_bootstrap(fit, boot, variant, law, derive_seed(seed, 2, r), 1);
        auto& o = out[r];
        o.error = fit.theta - truth;
        o.se = pointwise_se(ens);
        o.band_duration =
            band_covers(uniform_band(ens, o.se, fit.theta, Axis::duration, 0, alpha), truth.A.values.col(0));
        o.band_age = band_covers(uniform_band(ens, o.se, fit.theta, Axis::age, 0, alpha), truth.B.values.col(0));
    });
    StudyResult res;
    res.n = n;
    res.reps = reps;
    res.boot = boot;
    res.alpha = alpha;
    res.seed = seed;
    res.duration = summarize(out, Axis::duration, grid.t_points(), true, z);
    res.age = summarize(out, Axis::age, grid.a_points(), true, z);
    return res;
}

}  // namespace twoscale
