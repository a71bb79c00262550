// Copyright 2026 The tdlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "tdlearn/schedule.h"
#include "oracles.h"

using namespace tdl;

using namespace tdl::testutil;


TEST(schedule, eval_and_derivative_linear) {
    PolySchedule s = PolySchedule::from_monomial(1.0, {0.5, 0.3});
    EXPECT_NEAR(s.eval(0.5), 0.65, 1e-15);
    PolySchedule d = s.derivative();
    EXPECT_EQ(d.degree(), 0);
    EXPECT_NEAR(d.eval(0.1), 0.3, 1e-15);
    EXPECT_NEAR(d.eval(0.9), 0.3, 1e-15);
    PolySchedule c = PolySchedule::constant(2.0, 4.0).derivative();
    EXPECT_EQ(c.degree(), 0);
    EXPECT_EQ(c.eval(1.0), 0.0);
}

TEST(schedule, chebyshev_identity) {
    // T_3(cos(pi/6)) = cos(pi/2) = 0, at the time mapped to x = cos(pi/6).
    double T = 2.0;
    PolySchedule t3(T, {0, 0, 0, 1});
    double t = T * (std::cos(std::numbers::pi / 6) + 1) / 2;
    EXPECT_NEAR(t3.eval(t), 0.0, 1e-14);
    for (double theta : {0.1, 0.7, 1.3, 2.9}) {
        double tt = T * (std::cos(theta) + 1) / 2;
        EXPECT_NEAR(t3.eval(tt), std::cos(3 * theta), 1e-14);
    }
}

TEST(schedule, monomial_round_trip_and_derivative_oracle) {
    Rng rng(5);
    for (int trial = 0; trial < 50; trial++) {
        int m = (int)rng.below(8);
        double T = 0.5 + 2 * rng.uniform01();
        std::vector<double> a(m + 1);
        for (double &v : a) {
            v = rng.uniform(-1, 1);
        }
        PolySchedule p = PolySchedule::from_monomial(T, a);
        EXPECT_EQ(p.degree(), m);
        auto back = p.monomial_coeffs();
        for (int k = 0; k <= m; k++) {
            EXPECT_NEAR(back[k], a[k], 1e-11);
        }
        auto da = power_rule(a);
        PolySchedule dp = p.derivative();
        for (double t : {0.0, 0.3 * T, 0.77 * T, T}) {
            EXPECT_NEAR(p.eval(t), horner(a, t), 1e-12);
            EXPECT_NEAR(dp.eval(t), horner(da, t), 1e-10);
        }
    }
}

TEST(schedule, sup_norm_matches_dense_grid) {
    Rng rng(9);
    for (int trial = 0; trial < 30; trial++) {
        PolySchedule p(1.5, {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        double grid = grid_sup([&](double t) { return p.eval(t); }, 0, 1.5, 200000);
        EXPECT_GE(p.sup_norm(), grid - 1e-12);
        EXPECT_LE(p.sup_norm(), grid + 1e-9);
    }
}

TEST(schedule, markov_constant_values) {
    EXPECT_EQ(markov_constant(3, 1), 18);
    EXPECT_EQ(markov_constant(0, 5), 0);
    EXPECT_EQ(markov_constant(10, 2), 100);
}

TEST(schedule, markov_inequality_random_polynomials) {
    Rng rng(17);
    for (int trial = 0; trial < 1000; trial++) {
        int m = (int)rng.below(11);
        double T = 0.25 + 3 * rng.uniform01();
        std::vector<double> a(m + 1);
        for (double &v : a) {
            v = rng.uniform(-1, 1) / std::pow(T, (double)(&v - a.data()));
        }
        auto da = power_rule(a);
        double sup_p = grid_sup([&](double t) { return horner(a, t); }, 0, T, 4000);
        double sup_d = grid_sup([&](double t) { return horner(da, t); }, 0, T, 4000);
        ASSERT_LE(sup_d, markov_constant(m, T) * sup_p * (1 + 1e-9) + 1e-12) << "trial " << trial;
    }
}

TEST(schedule, dyson_degree_values) {
    EXPECT_EQ(dyson_degree(2, 3), 9);
    EXPECT_EQ(dyson_degree(5, 0), 0);
    EXPECT_EQ(dyson_degree(0, 4), 4);
}

TEST(schedule, extrapolation_factor_values) {
    EXPECT_NEAR(extrapolation_factor(4, 2.0, 2.0), 1.0, 1e-15);
    EXPECT_NEAR(extrapolation_factor(1, 1, 2), 3.0, 1e-12);
    EXPECT_NEAR(extrapolation_factor(3, 1, 1.5), 26.0, 1e-10);
    EXPECT_THROW(extrapolation_factor(1, 1, 0.5), ValueError);
}

TEST(schedule, extrapolation_bounds_random_polynomials) {
    Rng rng(23);
    for (int trial = 0; trial < 200; trial++) {
        int m = (int)rng.below(7);
        double T = 0.5 + rng.uniform01();
        PolySchedule p = random_polynomial(T, m, rng, 1.0);
        for (int k = 1; k <= 400; k++) {
            double t = T + T * k / 400.0;
            ASSERT_LE(std::abs(p.eval(t)), extrapolation_factor(m, T, t) * (1 + 1e-9));
        }
    }
}

TEST(schedule, chebyshev_nodes_follow_arcsine_law) {
    Rng rng(101);
    size_t N = 100000;
    auto nodes = chebyshev_nodes(1.0, N, rng);
    ASSERT_EQ(nodes.size(), N);
    double ks = 0;
    for (size_t i = 0; i < N; i++) {
        ASSERT_GT(nodes[i], 0.0);
        ASSERT_LT(nodes[i], 1.0);
        // Inverse-CDF oracle: F(t) = arccos(1 - 2t) / pi.
        double F = std::acos(1 - 2 * nodes[i]) / std::numbers::pi;
        ks = std::max(ks, std::max(std::abs(F - (double)i / N), std::abs(F - (double)(i + 1) / N)));
    }
    EXPECT_LT(ks, 0.01);
}

TEST(schedule, chebyshev_nodes_min_scales_like_inverse_square) {
    Rng rng(4);
    for (int m : {2, 5, 10}) {
        double total = 0;
        int trials = 10000;
        for (int k = 0; k < trials; k++) {
            total += chebyshev_nodes(1.0, (size_t)m, rng).front();
        }
        double mean = total / trials;
        // E[min] is of order 1/m^2 (arcsine density near 0); c = 0.1 is a loose floor.
        EXPECT_GE(mean, 0.1 / (m * m)) << m;
    }
}

TEST(schedule, chebyshev_nodes_reproducible) {
    Rng a(77), b(77);
    EXPECT_EQ(chebyshev_nodes(2.0, 50, a), chebyshev_nodes(2.0, 50, b));
}

TEST(schedule, node_count_rule) {
    EXPECT_EQ(node_count(0, 0.1), 1u);
    EXPECT_EQ(node_count(2, 0.1), (size_t)std::ceil(4 * 2 * std::log(4 / 0.1)));
    EXPECT_GE(node_count(5, 0.01), 6u);
    NodePlan plan = make_node_plan(1.0, 3, 0.05, 9);
    EXPECT_EQ(plan.nodes.size(), node_count(3, 0.05));
    EXPECT_TRUE(std::is_sorted(plan.nodes.begin(), plan.nodes.end()));
}

TEST(schedule, fit_exact_interpolation) {
    Rng rng(2);
    auto nodes = chebyshev_nodes(1.0, 10, rng);
    std::vector<double> y;
    for (double t : nodes) {
        y.push_back(2 - t + 0.5 * t * t);
    }
    auto a = robust_fit(1.0, nodes, y, 2).monomial_coeffs();
    EXPECT_NEAR(a[0], 2, 1e-10);
    EXPECT_NEAR(a[1], -1, 1e-10);
    EXPECT_NEAR(a[2], 0.5, 1e-10);
}

TEST(schedule, fit_minimal_nodes_reproduces_polynomial) {
    Rng rng(8);
    for (int trial = 0; trial < 50; trial++) {
        int m = 1 + (int)rng.below(8);
        PolySchedule p = random_polynomial(1.0, m, rng);
        auto nodes = chebyshev_nodes(1.0, (size_t)m + 1, rng);
        std::vector<double> y;
        for (double t : nodes) {
            y.push_back(p.eval(t));
        }
        PolySchedule q;
        try {
            q = robust_fit(1.0, nodes, y, m);
        } catch (const NumericalError &) {
            continue;  // clustered random draw; conditioning guard triggered
        }
        double err = 0;
        for (size_t k = 0; k < p.cheb.size(); k++) {
            err = std::max(err, std::abs(p.cheb[k] - q.cheb[k]));
        }
        EXPECT_LT(err, 1e-9) << "m=" << m;
    }
}

TEST(schedule, fit_errors) {
    EXPECT_THROW(robust_fit(1.0, {0.1, 0.2}, {1, 2}, 2), ValueError);
    EXPECT_THROW(robust_fit(1.0, {0.1, 0.1, 0.3}, {1, 2, 3}, 1), ValueError);
    EXPECT_THROW(robust_fit(1.0, {0.1, 0.1 + 1e-15, 0.1 + 2e-15, 0.1 + 3e-15}, {1, 2, 3, 4}, 3), NumericalError);
}

TEST(schedule, fit_with_noise) {
    for (uint64_t seed = 0; seed < 100; seed++) {
        Rng rng = Rng::stream(31, seed);
        auto nodes = chebyshev_nodes(1.0, 60, rng);
        std::vector<double> y;
        for (double t : nodes) {
            y.push_back(2 - t + 0.5 * t * t + rng.uniform(-1e-3, 1e-3));
        }
        PolySchedule p = robust_fit(1.0, nodes, y, 2);
        PolySchedule truth = PolySchedule::from_monomial(1.0, {2, -1, 0.5});
        EXPECT_LE((p - truth).sup_norm(), 5e-3) << seed;
    }
}

TEST(schedule, l1_robust_tolerates_outliers) {
    int good = 0;
    double noise = 1e-3;
    for (uint64_t seed = 0; seed < 100; seed++) {
        Rng rng = Rng::stream(57, seed);
        auto nodes = chebyshev_nodes(1.0, 80, rng);
        std::vector<double> y;
        for (double t : nodes) {
            y.push_back(t + rng.uniform(-noise, noise));
        }
        for (size_t i = 0; i < 8; i++) {
            y[rng.below(80)] = rng.uniform01() < 0.5 ? 1.0 : -1.0;
        }
        PolySchedule p = robust_fit(1.0, nodes, y, 1, FitMode::l1_robust);
        good += (p - PolySchedule::from_monomial(1.0, {0, 1})).sup_norm() <= 3 * noise;
    }
    EXPECT_GE(good, 95);
}

TEST(schedule, degree_for_schedule_examples) {
    EXPECT_EQ(degree_for_schedule([](double) { return 0.7; }, 1.0, 1e-12, 10), 0);
    EXPECT_EQ(degree_for_schedule([](double t) { return t * t * t; }, 1.0, 1e-12, 10), 3);
    int m = degree_for_schedule([](double t) { return std::cos(2 * std::numbers::pi * t); }, 1.0, 1e-6, 30);
    EXPECT_GE(m, 10);
    EXPECT_LE(m, 16);
    EXPECT_EQ(m, 10);  // regression baseline
    EXPECT_THROW(degree_for_schedule([](double t) { return std::exp(20 * t); }, 1.0, 1e-12, 5), LimitError);
}

TEST(schedule, builtins) {
    auto make = [](const char *kind, std::vector<double> params) { return BuiltinSchedule{kind, std::move(params)}; };
    EXPECT_NEAR(make("linear", {0.5, 0.3}).function()(0.5), 0.65, 1e-15);
    EXPECT_NEAR(make("cos", {1, 2, 0, 0.5}).function()(0.0), 1.5, 1e-15);
    EXPECT_NEAR(make("gaussian", {1, 0.5, 0.1}).function()(0.5), 1.0, 1e-15);
    PolySchedule p = make("cos", {0.5, 3.0}).to_poly(1.0, 1e-12);
    for (double t : {0.0, 0.25, 0.8, 1.0}) {
        EXPECT_NEAR(p.eval(t), 0.5 * std::cos(3 * t), 1e-12);
    }
    EXPECT_THROW(make("bogus", {}).function(), ParseError);
}

TEST(schedule, polynomial_family_contract) {
    static_assert(MarkovStableFamily<PolynomialFamily>);
    PolySchedule p = PolySchedule::from_monomial(1.0, {1, 2});
    EXPECT_EQ(PolynomialFamily::degree(p), 1);
    EXPECT_EQ(PolynomialFamily::dyson_degree(1, 3), 6);
    EXPECT_EQ(PolynomialFamily::markov_constant(1, 1.0), 2.0);
}

TEST(schedule, interpolation_constant_calibration) {
    double c = calibrate_interpolation_constant(3, 40, FitMode::least_squares, 200);
    EXPECT_GT(c, 0.1);
    EXPECT_LT(c, 10.0);
    EXPECT_EQ(c, calibrate_interpolation_constant(3, 40, FitMode::least_squares, 200));
}
