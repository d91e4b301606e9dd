#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "twoscale/simulation.hpp"

#include <cmath>

using namespace twoscale;

TEST_CASE("scenario hazard") {
    Scenario sc;
    CHECK(sc.total_hazard(0.3) == doctest::Approx(0.547));
    CHECK(sc.total_hazard(0.1) == doctest::Approx(0.387));
    CHECK(sc.alpha_integral(0.25) == doctest::Approx(0.08));
    CHECK(sc.alpha_integral(0.5) == doctest::Approx(0.2));
    CHECK(std::abs(sc.alpha_integral(5.0)) < 1e-15);
    CHECK(sc.fingerprint() == Scenario{}.fingerprint());
    Scenario other = sc;
    other.beta = 0.07;
    CHECK(sc.fingerprint() != other.fingerprint());

    Scenario bad = sc;
    bad.alpha_rates.pop_back();
    CHECK_THROWS(bad.validate());
    bad = sc;
    bad.zero_entry_prob = 1.5;
    CHECK_THROWS(bad.validate());
    bad = sc;
    bad.entry_max = 40.0;  // entries beyond the age grid
    CHECK_THROWS(bad.validate());
}

TEST_CASE("true cumulatives on the grid") {
    Scenario sc;
    const auto g = sc.grid();
    const auto th = true_cumulatives(sc, g);
    CHECK(th.A.values(5, 0) == doctest::Approx(0.32 * 0.25 + 0.48 * (5 * 5.0 / 99 - 0.25)));
    CHECK(th.A.values(5, 0) == doctest::Approx(sc.alpha_integral(g.t_points()[5])));
    CHECK(std::abs(th.A.values(99, 0)) < 1e-15);
    CHECK(th.B.values(99, 0) == doctest::Approx(2.345));
    CHECK(th.B.values(0, 0) == 0.0);
}

TEST_CASE("simulated cohorts") {
    Scenario sc;
    const auto c = simulate_cohort(20000, sc, 3);
    CHECK(c.n() == 20000);
    std::size_t zero = 0;
    for (const auto& s : c.subjects) {
        CHECK(s.entry_age >= 0.0);
        CHECK(s.entry_age <= sc.entry_max);
        CHECK(s.exit_time > 0.0);
        CHECK(s.exit_time <= sc.censor_time);
        if (!s.event) CHECK(s.exit_time == sc.censor_time);
        zero += s.entry_age == 0.0;
    }
    CHECK(static_cast<double>(zero) / 20000.0 == doctest::Approx(0.10).epsilon(0.1));

    // empirical survival vs exp(-A(t) - beta t)
    for (double t : {0.25, 1.0, 2.5, 4.9}) {
        std::size_t alive = 0;
        for (const auto& s : c.subjects) alive += s.exit_time > t;
        const double emp = static_cast<double>(alive) / 20000.0;
        CHECK(std::abs(emp - std::exp(-sc.alpha_integral(t) - sc.beta * t)) < 0.01);
    }

    const auto a = simulate_cohort(50, sc, 11), b = simulate_cohort(50, sc, 11);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(a.subjects[i].entry_age == b.subjects[i].entry_age);
        CHECK(a.subjects[i].exit_time == b.subjects[i].exit_time);
    }
    CHECK_THROWS(simulate_cohort(0, sc, 1));
}

TEST_CASE("inverse transform with a constant hazard") {
    Scenario sc;
    sc.beta = 0.0;
    sc.alpha_breaks = {0.0, 5.0};
    sc.alpha_rates = {0.4};
    sc.censor_time = 5.0;
    const auto c = simulate_cohort(100000, sc, 21);
    // mean of min(T, 5) for T ~ Exp(0.4)
    const double expected = (1.0 - std::exp(-0.4 * 5.0)) / 0.4;
    double mean = 0.0;
    for (const auto& s : c.subjects) mean += s.exit_time / 100000.0;
    CHECK(mean == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("table indices") {
    CHECK(table_indices(100) == std::vector<std::size_t>{19, 39, 59, 79, 99});
    CHECK(table_indices(50).back() == 49);
}

TEST_CASE("small studies") {
    Scenario sc;
    const auto one = bias_study(100, 1, sc, 5, 1);
    CHECK(one.reps == 1);
    CHECK((one.duration.mc_sd.array() == 0.0).all());
    const auto again = bias_study(100, 1, sc, 5, 2);
    CHECK(one.duration.bias == again.duration.bias);
    CHECK(one.age.bias == again.age.bias);
    CHECK(one.duration.bias[99] == 0.0);

    const auto cov = coverage_study(100, 4, 20, 0.05, sc, 9, 1);
    CHECK((cov.duration.coverage.array() >= 0.0).all());
    CHECK((cov.duration.coverage.array() <= 1.0).all());
    CHECK(cov.duration.coverage[99] == 1.0);
    CHECK(cov.age.band_coverage >= 0.0);
    CHECK(cov.age.band_coverage <= 1.0);
    CHECK(cov.age.mean_se[0] == 0.0);
    CHECK(cov.age.mean_se[50] > 0.0);
}
