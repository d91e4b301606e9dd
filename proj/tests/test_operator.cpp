#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "twoscale/operator.hpp"
#include "twoscale/simulation.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <sstream>

using namespace twoscale;

namespace {

// No covariates, everyone enters at age 0 and stays at risk to t_max.
SubjectCohort full_risk(int n, double t_max) {
    std::vector<oracle::Row> rows;
    for (int i = 0; i < n; ++i) rows.push_back({0.0, t_max, false, {}, {}});
    rows[0].event = true;
    return oracle::cohort(rows, 1, 1, 1, t_max, 0.0, t_max);
}

SubjectCohort covariate_cohort(std::size_t n, std::uint64_t seed, std::size_t p, std::size_t q, std::size_t d) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<oracle::Row> rows;
    for (std::size_t i = 0; i < n; ++i) {
        oracle::Row r{10.0 * u(rng), 0.2 + 0.8 * u(rng), u(rng) < 0.6, {}, {}};
        std::vector<double> shared(d, 1.0);
        for (std::size_t c = 1; c < d; ++c) shared[c] = u(rng);
        r.x = shared;
        r.z = shared;
        for (std::size_t c = d; c < p; ++c) r.x.push_back(u(rng) + (c == 0 ? 0.5 : 0.0));
        for (std::size_t c = d; c < q; ++c) r.z.push_back(u(rng) + (c == 0 ? 0.5 : 0.0));
        rows.push_back(r);
    }
    return oracle::cohort(rows, p, q, d, 1.0, 0.0, 11.0);
}

}  // namespace

TEST_CASE("E1 without covariates is the indicator u <= s") {
    const auto c = full_risk(5, 1.0);
    const auto g = build_grid(1, 0, 1, 11, 11);
    const auto km = kernel_matrices(counting_increments(c, g));
    for (Eigen::Index l = 0; l < 11; ++l) {
        for (Eigen::Index m = 0; m < 11; ++m) CHECK(km.E1_mx(l, m) == doctest::Approx(m >= 1 && m <= l ? 1.0 : 0.0));
        CHECK(km.E1_mx.row(l).sum() * g.da() == doctest::Approx(g.t_points()[l]));
    }
    // symmetric roles with a_i = 0 and X = Z
    CHECK((km.E1_mx - km.E2_mx).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("single subject kernel is the indicator of its window") {
    const auto c = oracle::cohort({{0.3, 0.6, false, {}, {}}}, 1, 1, 1, 1.0, 0.0, 2.0);
    const auto g = build_grid(1, 0, 2, 11, 11);
    const auto km = kernel_matrices(counting_increments(c, g));
    // kappa = 1/2; E1 picks up kappa at the age cell of each observed duration cell
    CHECK(km.E1_mx(6, 5) == doctest::Approx(0.5));
    CHECK(km.E1_mx.row(6).sum() == doctest::Approx(6 * 0.5));
    CHECK(km.E1_mx.row(10).sum() == doctest::Approx(6 * 0.5));
    CHECK(km.E1_mx.row(0).isZero(0));
    CHECK((km.E1_mx - oracle::kernel_E1(c, g)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("kernels match nested-loop evaluation") {
    const auto g = build_grid(1, 0, 2, 10, 10);
    const auto toy = oracle::toy3();
    const auto km = kernel_matrices(counting_increments(toy, g));
    CHECK((km.E1_mx - oracle::kernel_E1(toy, g)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((km.E2_mx - oracle::kernel_E2(toy, g)).cwiseAbs().maxCoeff() < 1e-13);

    const auto c = covariate_cohort(80, 4, 2, 3, 1);
    const auto g2 = build_grid(1, 0, 11, 8, 12);
    const auto km2 = kernel_matrices(counting_increments(c, g2));
    CHECK((km2.E1_mx - oracle::kernel_E1(c, g2)).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((km2.E2_mx - oracle::kernel_E2(c, g2)).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("operator blocks") {
    const auto c = covariate_cohort(60, 9, 2, 2, 1);
    const auto g = build_grid(1, 0, 11, 10, 10);
    const auto km = kernel_matrices(counting_increments(c, g));
    const auto op = assemble_block_operator(km, g, 2, 2, 1);
    const auto jp = static_cast<Eigen::Index>(g.j() * 2);
    CHECK(op.dense().topLeftCorner(jp, jp).isZero(0));
    CHECK(op.dense().bottomRightCorner(op.dense().rows() - jp, op.dense().cols() - jp).isZero(0));

    const auto op0 = assemble_block_operator(km, g, 2, 2, 0);
    CHECK(op0.E2bar_op() == op0.E2_op());
    CHECK_THROWS(assemble_block_operator(km, g, 2, 2, 3));
    CHECK_THROWS(assemble_block_operator(km, g, 2, 3, 1));

    SUBCASE("linearity and Stieltjes sums") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> nd;
        auto random_theta = [&] {
            ThetaEstimate t = ThetaEstimate::zeros(g, 2, 2);
            for (Eigen::Index i = 0; i < t.A.values.size(); ++i) t.A.values.data()[i] = nd(rng);
            for (Eigen::Index i = 0; i < t.B.values.size(); ++i) t.B.values.data()[i] = nd(rng);
            return t;
        };
        const auto u = random_theta(), v = random_theta();
        CHECK(sup_norm(apply_operator(op, ThetaEstimate::zeros(g, 2, 2))) == 0.0);
        ThetaEstimate mix = u;
        mix.A.values = 2.0 * u.A.values - 3.0 * v.A.values;
        mix.B.values = 2.0 * u.B.values - 3.0 * v.B.values;
        const auto lhs = apply_operator(op, mix);
        auto rhs = apply_operator(op, u);
        const auto av = apply_operator(op, v);
        rhs.A.values = 2.0 * rhs.A.values - 3.0 * av.A.values;
        rhs.B.values = 2.0 * rhs.B.values - 3.0 * av.B.values;
        CHECK(sup_norm(lhs - rhs) < 1e-12);

        // A block of apply((0, B)) = -sum_m E1(s_l | u_m) (B(u_m) - B(u_{m-1}))
        ThetaEstimate only_b = u;
        only_b.A.values.setZero();
        const auto out = apply_operator(op, only_b);
        for (Eigen::Index l = 0; l < 10; ++l)
            for (Eigen::Index r = 0; r < 2; ++r) {
                double s = 0.0;
                for (Eigen::Index m = 0; m < 10; ++m)
                    for (Eigen::Index cc = 0; cc < 2; ++cc) {
                        const double dB = u.B.values(m, cc) - (m > 0 ? u.B.values(m - 1, cc) : 0.0);
                        s += km.E1_mx(l * 2 + r, m * 2 + cc) * dB;
                    }
                CHECK(out.A.values(l, r) == doctest::Approx(-s).epsilon(1e-12));
            }
        CHECK(out.B.values.isZero(0));
    }
}

TEST_CASE("ramp pair is an eigenfunction and the constrained block annihilates it") {
    for (std::size_t pts : {20, 40}) {
        const auto c = full_risk(7, 2.0);
        const auto g = build_grid(2, 0, 2, pts, pts);
        const auto op = assemble_block_operator(kernel_matrices(counting_increments(c, g)), g, 1, 1, 1);
        const auto f1 = ramp_function(g, 1, 1, 0, 0.7);
        const auto E = op.E_op();
        const Eigen::VectorXd v = f1.stack();
        CHECK((E * v - v).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::VectorXd lin = 0.7 * g.t_points();
        CHECK((op.E2bar_op() * lin).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("spectral report") {
    SUBCASE("identified scalar design") {
        // staggered entries on the grid: every cell is linked to its neighbours
        std::vector<oracle::Row> rows;
        for (int i = 0; i < 6; ++i) rows.push_back({0.1 * i, 1.0 - 0.1 * i, i % 2 == 1, {}, {}});
        const auto c = oracle::cohort(rows, 1, 1, 1, 1.0, 0.0, 1.0);
        const auto g = build_grid(1, 0, 1, 11, 11);
        const auto op = assemble_block_operator(kernel_matrices(counting_increments(c, g)), g, 1, 1, 1);
        const auto rep = spectral_report(op);
        CHECK(rep.unit_multiplicity_E == 1);
        REQUIRE(rep.unit_multiplicity_E2.has_value());
        CHECK(*rep.unit_multiplicity_E2 == 1);
        CHECK(rep.identifiable);
    }
    SUBCASE("d = 0 with separate designs") {
        const auto c = covariate_cohort(80, 12, 1, 1, 0);
        const auto g = build_grid(1, 0, 11, 12, 12);
        const auto op = assemble_block_operator(kernel_matrices(counting_increments(c, g)), g, 1, 1, 0);
        const auto rep = spectral_report(op);
        CHECK(rep.unit_multiplicity_E == 0);
        CHECK(!rep.unit_multiplicity_E2.has_value());
        CHECK(rep.identifiable);
    }
    SUBCASE("power iteration against a dense eigensolver") {
        Scenario sc;
        const auto c = simulate_cohort(150, sc, 2);
        const auto g = build_grid(5, 0, 35, 30, 30);
        const auto op = assemble_block_operator(kernel_matrices(counting_increments(c, g)), g, 1, 1, 1);
        const auto rep = spectral_report(op);
        Eigen::EigenSolver<Eigen::MatrixXd> es(op.dense(), false);
        const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(rep.power_converged);
        CHECK(rep.spectral_radius == doctest::Approx(radius).epsilon(1e-6));
        CHECK(rep.unit_multiplicity_E == 1);
        const auto half = spectral_report(op.scaled(0.5));
        CHECK(half.spectral_radius == doctest::Approx(0.5 * rep.spectral_radius).epsilon(1e-8));
    }
}

TEST_CASE("binary dump") {
    const auto c = full_risk(3, 1.0);
    const auto g = build_grid(1, 0, 1, 5, 4);
    const auto op = assemble_block_operator(kernel_matrices(counting_increments(c, g)), g, 1, 1, 1);
    std::ostringstream out;
    write_operator_binary(out, op);
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == (8 + 9 * 9) * sizeof(double));
    const auto* d = reinterpret_cast<const double*>(bytes.data());
    CHECK(d[0] == 1);
    CHECK(d[2] == 5);
    CHECK(d[3] == 4);
    CHECK(d[5] == 1.0);
    CHECK(d[8 + 0 * 9 + 5] == op.dense()(0, 5));
    CHECK(d[8 + 7 * 9 + 2] == op.dense()(7, 2));
}
