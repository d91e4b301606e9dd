#include "twoscale/bootstrap.hpp"

#include "twoscale/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace twoscale {

namespace {

constexpr double kSigmaFloor = 1e-12;

Eigen::VectorXd survival_functional(const ThetaEstimate& theta, double entry_age, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& z) {
    const auto& t = theta.A.points;
    const Eigen::VectorXd b0 = step_eval(theta.B, entry_age);
    Eigen::VectorXd out(t.size());
    for (Eigen::Index l = 0; l < t.size(); ++l)
        out[l] = x.dot(theta.A.values.row(l).transpose()) + z.dot(step_eval(theta.B, entry_age + t[l]) - b0);
    return out;
}

}  // namespace

std::string to_string(WeightLaw law) { return law == WeightLaw::normal ? "normal" : "rademacher"; }

WeightLaw weight_law_from_string(const std::string& name) {
    if (name == "normal") return WeightLaw::normal;
    if (name == "rademacher") return WeightLaw::rademacher;
    throw std::invalid_argument("unknown weight distribution '" + name + "'");
}

Eigen::VectorXd wild_weights(std::size_t n, std::uint64_t seed, WeightLaw law) {
    if (n == 0) throw std::invalid_argument("wild_weights needs n >= 1");
    std::mt19937_64 rng(seed);
    Eigen::VectorXd g(static_cast<Eigen::Index>(n));
    if (law == WeightLaw::normal) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
    } else {
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = (rng() >> 63) ? 1.0 : -1.0;
    }
    return g;
}

Eigen::VectorXd residual_increments(const IncrementMatrix& inc, const ThetaEstimate& theta_hat) {
    const Eigen::MatrixXd dA = increments(theta_hat.A);
    const Eigen::MatrixXd dB = increments(theta_hat.B);
    Eigen::VectorXd r(static_cast<Eigen::Index>(inc.entries.size()));
    for (std::size_t e = 0; e < inc.entries.size(); ++e) {
        const auto& ce = inc.entries[e];
        const auto ei = static_cast<Eigen::Index>(e);
        r[ei] = ce.dN - inc.x_rows.row(ei).dot(dA.row(static_cast<Eigen::Index>(ce.t_cell))) -
                inc.kappa * inc.z_rows.row(ei).dot(dB.row(static_cast<Eigen::Index>(ce.a_cell)));
    }
    return r;
}

ThetaEstimate bootstrap_replicate(const IncrementMatrix& inc, const MarginalProjectors& proj,
                                  const DirectSolver& solver, const ThetaEstimate& theta_hat,
                                  const Eigen::VectorXd& G, int variant) {
    if (G.size() != static_cast<Eigen::Index>(inc.n)) throw std::invalid_argument("one multiplier per subject");
    if (variant != 1 && variant != 2) throw std::invalid_argument("bootstrap variant must be 1 or 2");
    Eigen::VectorXd w = variant == 1 ? inc.dN() : residual_increments(inc, theta_hat);
    for (std::size_t e = 0; e < inc.entries.size(); ++e)
        w[static_cast<Eigen::Index>(e)] *= G[static_cast<Eigen::Index>(inc.entries[e].subject)];
    return solver.solve(marginal_from_increments(inc, proj, w));
}

BootstrapEnsemble run_bootstrap(const Fit& fit, std::size_t replicates, int variant, WeightLaw law,
                                std::uint64_t seed, std::size_t threads, std::uint64_t stream) {
    if (variant != 1 && variant != 2) throw std::invalid_argument("bootstrap variant must be 1 or 2");
    BootstrapEnsemble ens;
    ens.variant = variant;
    ens.law = law;
    ens.seed = seed;
    ens.replicates.resize(replicates);
    if (replicates == 0) return ens;
    const DirectSolver solver(fit.op);
    // the residual increments do not depend on G; weight a shared copy per replicate
    const Eigen::VectorXd base = variant == 1 ? fit.inc.dN() : residual_increments(fit.inc, fit.theta);
    parallel_for(replicates, threads, [&](std::size_t r) {
        const Eigen::VectorXd G = wild_weights(fit.inc.n, derive_seed(seed, stream, r), law);
        Eigen::VectorXd w = base;
        for (std::size_t e = 0; e < fit.inc.entries.size(); ++e)
            w[static_cast<Eigen::Index>(e)] *= G[static_cast<Eigen::Index>(fit.inc.entries[e].subject)];
        ens.replicates[r] = solver.solve(marginal_from_increments(fit.inc, fit.proj, w));
    });
    return ens;
}

ThetaEstimate pointwise_se(const BootstrapEnsemble& ens) {
    const std::size_t b = ens.size();
    if (b < 2) throw std::invalid_argument("pointwise_se needs at least 2 replicates");
    ThetaEstimate mean = ens.replicates.front();
    for (std::size_t r = 1; r < b; ++r) {
        mean.A.values += ens.replicates[r].A.values;
        mean.B.values += ens.replicates[r].B.values;
    }
    mean.A.values /= static_cast<double>(b);
    mean.B.values /= static_cast<double>(b);
    ThetaEstimate sd = mean;
    sd.A.values.setZero();
    sd.B.values.setZero();
    for (const auto& rep : ens.replicates) {
        sd.A.values.array() += (rep.A.values - mean.A.values).array().square();
        sd.B.values.array() += (rep.B.values - mean.B.values).array().square();
    }
    sd.A.values = (sd.A.values / static_cast<double>(b - 1)).cwiseSqrt();
    sd.B.values = (sd.B.values / static_cast<double>(b - 1)).cwiseSqrt();
    return sd;
}

double two_sided_normal_quantile(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    double lo = 0.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (std::erfc(mid / std::sqrt(2.0)) > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::size_t quantile_rank(std::size_t replicates, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    // guard against (1 - alpha) * B landing a rounding error above an integer
    const double x = (1.0 - alpha) * static_cast<double>(replicates);
    auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
    return std::clamp<std::size_t>(k, 1, replicates);
}

BandResult uniform_band(const std::vector<Eigen::VectorXd>& paths, const Eigen::VectorXd& sigma,
                        const Eigen::VectorXd& estimate, const Eigen::VectorXd& points, double alpha,
                        std::optional<std::pair<double, double>> range) {
    if (paths.empty()) throw std::invalid_argument("uniform_band needs replicates");
    const std::size_t rank = quantile_rank(paths.size(), alpha);
    BandResult band;
    band.alpha = alpha;
    band.sigma = sigma;
    band.nu1 = range ? range->first : points[0];
    band.nu2 = range ? range->second : points[points.size() - 1];
    const double tol = 1e-9 * std::max(1.0, std::abs(band.nu2 - band.nu1));

    std::vector<Eigen::Index> use;
    double max_sigma = 0.0;
    for (Eigen::Index i = 0; i < points.size(); ++i)
        if (points[i] >= band.nu1 - tol && points[i] <= band.nu2 + tol) max_sigma = std::max(max_sigma, sigma[i]);
    for (Eigen::Index i = 0; i < points.size(); ++i)
        if (points[i] >= band.nu1 - tol && points[i] <= band.nu2 + tol && sigma[i] > kSigmaFloor * max_sigma &&
            sigma[i] > 0.0)
            use.push_back(i);
    if (use.empty()) throw std::invalid_argument("uniform_band: no grid point with positive sd in range");
    band.points_used = use.size();

    std::vector<double> sups;
    sups.reserve(paths.size());
    for (const auto& path : paths) {
        double s = 0.0;
        for (auto i : use) s = std::max(s, std::abs(path[i]) / sigma[i]);
        sups.push_back(s);
    }
    std::nth_element(sups.begin(), sups.begin() + static_cast<std::ptrdiff_t>(rank - 1), sups.end());
    band.c_quantile = sups[rank - 1];
    band.lower = estimate - band.c_quantile * sigma;
    band.upper = estimate + band.c_quantile * sigma;
    return band;
}

BandResult uniform_band(const BootstrapEnsemble& ens, const ThetaEstimate& sigma, const ThetaEstimate& theta_hat,
                        Axis axis, std::size_t component, double alpha,
                        std::optional<std::pair<double, double>> range) {
    const auto pick = [axis](const ThetaEstimate& t) -> const StepFunctionVec& {
        return axis == Axis::duration ? t.A : t.B;
    };
    const auto c = static_cast<Eigen::Index>(component);
    if (component >= pick(theta_hat).dim()) throw std::invalid_argument("uniform_band: component out of range");
    std::vector<Eigen::VectorXd> paths;
    paths.reserve(ens.size());
    for (const auto& rep : ens.replicates) paths.push_back(pick(rep).values.col(c));
    BandResult band = uniform_band(paths, pick(sigma).values.col(c), pick(theta_hat).values.col(c),
                                   pick(theta_hat).points, alpha, range);
    band.axis = axis;
    band.component = component;
    return band;
}

SurvivalCurve predict_survival(const ThetaEstimate& theta_hat, const BootstrapEnsemble* ens, double entry_age,
                               double alpha, Eigen::VectorXd x, Eigen::VectorXd z) {
    if (x.size() == 0) x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(theta_hat.p()));
    if (z.size() == 0) z = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(theta_hat.q()));
    if (x.size() != static_cast<Eigen::Index>(theta_hat.p()) || z.size() != static_cast<Eigen::Index>(theta_hat.q()))
        throw std::invalid_argument("predict_survival: covariate vector length mismatch");
    const auto& u = theta_hat.B.points;
    const double a0 = u[0], a_max = u[u.size() - 1];
    const double t_max = theta_hat.A.points[theta_hat.A.points.size() - 1];
    const double tol = 1e-9 * (a_max - a0);
    if (entry_age < a0 - tol || entry_age + t_max > a_max + tol)
        throw std::out_of_range("entry age outside the age grid (need a0 <= a and a + t_max <= a_max)");

    SurvivalCurve out;
    out.t = theta_hat.A.points;
    out.cumhaz = survival_functional(theta_hat, entry_age, x, z);
    out.survival = (-out.cumhaz.array()).exp();
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    out.band_lower = Eigen::VectorXd::Constant(out.t.size(), nan);
    out.band_upper = out.band_lower;
    if (ens && ens->size() >= 2) {
        std::vector<Eigen::VectorXd> paths;
        paths.reserve(ens->size());
        for (const auto& rep : ens->replicates) paths.push_back(survival_functional(rep, entry_age, x, z));
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(out.t.size());
        for (const auto& p : paths) mean += p;
        mean /= static_cast<double>(paths.size());
        Eigen::VectorXd sd = Eigen::VectorXd::Zero(out.t.size());
        for (const auto& p : paths) sd.array() += (p - mean).array().square();
        sd = (sd / static_cast<double>(paths.size() - 1)).cwiseSqrt();
        if (sd.maxCoeff() > 0.0) {
            const BandResult band = uniform_band(paths, sd, out.cumhaz, out.t, alpha);
            out.c_quantile = band.c_quantile;
            out.band_lower = (-band.upper.array()).exp();
            out.band_upper = (-band.lower.array()).exp();
        } else {
            out.band_lower = out.band_upper = out.survival;
        }
    }
    return out;
}

}  // namespace twoscale
