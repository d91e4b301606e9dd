#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "twoscale/grid.hpp"
#include "twoscale/simulation.hpp"

#include <random>

using namespace twoscale;

TEST_CASE("uniform grids include both endpoints") {
    const auto g = build_grid(5, 0, 35, 100, 100);
    CHECK(g.j() == 100);
    CHECK(g.t_points()[0] == 0.0);
    CHECK(g.t_points()[99] == 5.0);
    CHECK(g.a_points()[99] == 35.0);
    CHECK(g.t_points()[19] == doctest::Approx(5.0 * 19 / 99).epsilon(1e-15));
    CHECK(g.t_points()[19] == doctest::Approx(0.96).epsilon(1e-3));
    CHECK(g.a_points()[19] == doctest::Approx(6.717).epsilon(1e-4));
    for (Eigen::Index l = 1; l < 100; ++l)
        CHECK(g.t_points()[l] - g.t_points()[l - 1] == doctest::Approx(5.0 / 99).epsilon(1e-12));

    const auto tiny = build_grid(1, 0, 1, 2, 2);
    CHECK(tiny.t_points() == Eigen::Vector2d(0, 1));
    CHECK(tiny.a_points() == Eigen::Vector2d(0, 1));
}

TEST_CASE("invalid grids are rejected") {
    CHECK_THROWS(build_grid(0, 0, 1, 10, 10));
    CHECK_THROWS(build_grid(1, 1, 1, 10, 10));
    CHECK_THROWS(build_grid(1, 0, 1, 1, 10));
    CHECK_THROWS(build_grid(1, 0, 1, 10, 1));
}

TEST_CASE("snapping") {
    const auto g = build_grid(1, 0, 2, 11, 11);
    CHECK(g.snap_up(Axis::duration, 0.5) == 5);
    CHECK(g.snap_up(Axis::duration, 0.51) == 6);
    CHECK(g.snap_up(Axis::duration, 0.5 + 1e-13) == 5);
    CHECK(g.snap_down(Axis::duration, 0.59) == 5);
    CHECK(g.snap_up(Axis::age, 2.0) == 10);
    CHECK_THROWS(g.snap_up(Axis::duration, 1.2));
}

TEST_CASE("step_eval is right-continuous") {
    StepFunctionVec f(Axis::duration, Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(0, 1, 3));
    CHECK(step_eval(f, 1.5)[0] == 1.0);
    CHECK(step_eval(f, 2.0)[0] == 3.0);
    CHECK(step_eval(f, 1.0)[0] == 1.0);
    CHECK(step_eval(f, 0.999)[0] == 0.0);
    CHECK_THROWS(step_eval(f, 2.5));
    CHECK_THROWS(step_eval(f, -0.5));

    Scenario sc;
    const auto truth = true_cumulatives(sc, sc.grid());
    // one cell of the largest hazard is the worst-case discretization error
    CHECK(std::abs(step_eval(truth.A, 0.25)[0] - 0.08) <= 0.48 * sc.grid().dt());
}

TEST_CASE("increments and cumulative are inverse") {
    CHECK(increments(Eigen::MatrixXd(Eigen::Vector3d(0, 1, 3))) == Eigen::MatrixXd(Eigen::Vector3d(0, 1, 2)));
    const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(5, 2, 4.0);
    const Eigen::MatrixXd dc = increments(c);
    CHECK(dc.row(0) == c.row(0));
    CHECK(dc.bottomRows(4).isZero(0));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd r(37, 3);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = nd(rng);
    CHECK((cumulative(increments(r)) - r).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((increments(cumulative(r)) - r).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("stacking is a bijection with point-major layout") {
    const auto g = build_grid(1, 0, 2, 4, 3);
    ThetaEstimate t = ThetaEstimate::zeros(g, 2, 1);
    CHECK(t.stacked_size() == 4 * 2 + 3 * 1);
    t.A.values(2, 1) = 7;
    t.B.values(1, 0) = -3;
    const Eigen::VectorXd v = t.stack();
    CHECK(v[2 * 2 + 1] == 7);
    CHECK(v[4 * 2 + 1] == -3);
    const auto back = ThetaEstimate::unstack(v, g, 2, 1);
    CHECK(back.A.values == t.A.values);
    CHECK(back.B.values == t.B.values);
    CHECK(sup_norm(t) == 7);
    CHECK(sup_norm(t - back) == 0);
    CHECK_THROWS(ThetaEstimate::unstack(Eigen::VectorXd::Zero(3), g, 2, 1));
}
