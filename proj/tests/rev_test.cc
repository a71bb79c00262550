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

#include "tdlearn/rev.h"
#include "test_util.h"

using namespace tdl;
using namespace tdl::testutil;

namespace {

LocalChannelEstimate oracle_channel(const LindbladAnsatz &a, double t, const std::vector<size_t> &region) {
    OracleOverlaps src(a, {t});
    return estimate_local_channel(src, a.n(), 0, region, 0);
}

LindbladAnsatz one_qubit(double hx, double hz, double lz, double lx = 0) {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(1);
    a.T = 2;
    if (hx != 0) {
        a.add_hamiltonian("X", PolySchedule::constant(2, hx));
    }
    if (hz != 0) {
        a.add_hamiltonian("Z", PolySchedule::constant(2, hz));
    }
    if (lz != 0) {
        a.add_dissipator(0, Axis::Z, PolySchedule::constant(2, lz));
    }
    if (lx != 0) {
        a.add_dissipator(0, Axis::X, PolySchedule::constant(2, lx));
    }
    return a;
}

/// Single-qubit objective in closed form: ||m_I I + m . sigma|| = |m_I| + |m|.
double qubit_norm(const Eigen::Vector4d &m) {
    // Local index: I = 0, X = 1, Z = 2, Y = 3 (x | z << 1).
    return std::abs(m[0]) + std::sqrt(m[1] * m[1] + m[2] * m[2] + m[3] * m[3]);
}

/// Zooming grid search for min ||A c - q|| over ||c|| <= 1 on one qubit.
double grid_optimum(const Eigen::Matrix4d &A, const Eigen::Vector4d &q) {
    double best = qubit_norm(A * Eigen::Vector4d::Zero() - q);
    Eigen::Vector4d center = Eigen::Vector4d::Zero();
    double step = 0.1;
    int half = 10;
    for (int level = 0; level < 7; level++) {
        Eigen::Vector4d best_c = center;
        for (int i0 = -half; i0 <= half; i0++) {
            for (int i1 = -half; i1 <= half; i1++) {
                for (int i2 = -half; i2 <= half; i2++) {
                    for (int i3 = -half; i3 <= half; i3++) {
                        Eigen::Vector4d c = center + step * Eigen::Vector4d(i0, i1, i2, i3);
                        if (qubit_norm(c) > 1) {
                            continue;
                        }
                        double f = qubit_norm(A * c - q);
                        if (f < best) {
                            best = f;
                            best_c = c;
                        }
                    }
                }
            }
        }
        center = best_c;
        step /= 4;
        half = 8;
    }
    return best;
}

}  // namespace

TEST(rev, identity_channel_and_time_zero) {
    LindbladAnsatz id;
    id.graph = InteractionGraph::path(2);
    LocalChannelEstimate est = oracle_channel(id, 0.7, {0, 1});
    EXPECT_LT((est.ptm - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-14);
    Rng rng(1);
    LocalChannelEstimate e0 = oracle_channel(random_small(2, rng), 0.0, {0, 1});
    EXPECT_LT((e0.ptm - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-14);
    RevResult r = rev(est, PauliString::from_str("ZI"), 1e-6);
    EXPECT_LT(r.objective, 1e-12);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(16);
    expect[(Eigen::Index)PauliString::from_str("ZI").index()] = 1;
    EXPECT_LT((r.coeffs - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(rev, rotation_channel_entries) {
    double t = 0.9;
    LocalChannelEstimate est = oracle_channel(one_qubit(1, 0, 0), t, {0});
    auto idx = [](const char *p) { return (Eigen::Index)PauliString::from_str(p).index(); };
    EXPECT_NEAR(est.ptm(idx("Z"), idx("Z")), std::cos(t), 1e-10);
    EXPECT_NEAR(est.ptm(idx("Y"), idx("Z")), std::sin(t), 1e-10);
    EXPECT_NEAR(est.ptm(idx("X"), idx("Z")), 0.0, 1e-12);
    EXPECT_NEAR(est.ptm(idx("X"), idx("X")), 1.0, 1e-12);
}

TEST(rev, closed_form_inverse_rotation) {
    double t = std::numbers::pi / 3;
    LocalChannelEstimate est = oracle_channel(one_qubit(1, 0, 0), t, {0});
    RevResult r = rev(est, PauliString::from_str("Z"), 1e-5);
    EXPECT_LE(r.objective, 1e-6);
    EXPECT_NEAR(r.coeffs[(Eigen::Index)PauliString::from_str("Z").index()], 0.5, 1e-6);
    EXPECT_NEAR(r.coeffs[(Eigen::Index)PauliString::from_str("Y").index()], -std::sqrt(3.0) / 2, 1e-6);
    EXPECT_LE(r.op_norm, 1 + 1e-9);
}

TEST(rev, strong_dissipation_is_not_invertible) {
    LocalChannelEstimate est = oracle_channel(one_qubit(0, 0, 5), 1.0, {0});
    EXPECT_NEAR(est.ptm(1, 1), std::exp(-5.0), 1e-9);
    RevResult r = rev(est, PauliString::from_str("X"), 1e-4);
    EXPECT_GE(r.objective, 1 - std::exp(-5.0) - 1e-6);
    EXPECT_LE(r.objective, 1 - std::exp(-5.0) + 1e-5);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.objective - r.lower_bound, 1e-5);
}

TEST(rev, spectral_norm_examples) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
    EXPECT_EQ(spectral_norm(c, 1), 0.0);
    c[2] = 1;  // Z
    EXPECT_NEAR(spectral_norm(c, 1), 1.0, 1e-15);
    c[1] = 1;  // X
    c /= std::sqrt(2.0);
    EXPECT_NEAR(spectral_norm(c, 1), 1.0, 1e-14);
    EXPECT_THROW(spectral_norm(Eigen::VectorXd::Zero(4), 1, 0), LimitError);
}

TEST(rev, matches_grid_search_on_random_qubit_channels) {
    Rng rng(31);
    for (int trial = 0; trial < 20; trial++) {
        LindbladAnsatz a = one_qubit(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 1.5), rng.uniform(0, 1.0));
        double t = rng.uniform(0.2, 1.5);
        LocalChannelEstimate est = oracle_channel(a, t, {0});
        auto target = PauliString::from_index(1, 1 + rng.below(3));
        Eigen::Vector4d q = Eigen::Vector4d::Zero();
        q[(Eigen::Index)target.index()] = 1;
        double grid = grid_optimum(est.ptm, q);
        RevResult r = rev(est, target, 1e-4);
        EXPECT_NEAR(r.objective, grid, 1e-3) << "trial " << trial;
        EXPECT_LE(r.objective, grid + 1e-5) << "trial " << trial;
        EXPECT_LE(r.op_norm, 1 + 1e-9);
        EXPECT_LE(r.lower_bound, grid + 1e-9);
    }
}

TEST(rev, certificate_on_noisy_estimates) {
    // Per-entry perturbations of size eps / 4^r; when the returned objective is at most 2 eps the
    // true residual obeys the same bound with 10% slack.
    Rng rng(9);
    const double eps = 0.02;
    std::vector<LindbladAnsatz> fixtures = {one_qubit(1, 0.3, 0), one_qubit(0.5, -1, 0.01), zz_x_chain(2, 0.8, 0.6)};
    for (const auto &a : fixtures) {
        std::vector<size_t> region(a.n());
        for (size_t q = 0; q < a.n(); q++) {
            region[q] = q;
        }
        for (double t : {0.3, 0.8}) {
            LocalChannelEstimate est = oracle_channel(a, t, region);
            double per_entry = eps / std::pow(4.0, (double)a.n());
            for (Eigen::Index i = 0; i < est.ptm.rows(); i++) {
                for (Eigen::Index j = 0; j < est.ptm.cols(); j++) {
                    est.ptm(i, j) += rng.uniform(-per_entry, per_entry);
                }
            }
            PauliString q = PauliString::single(a.n(), 0, Axis::Z);
            RevResult r = rev(est, q, eps);
            ASSERT_LE(r.objective, 2 * eps);
            DenseOperator o = RegionBasis(a.n()).to_operator(r.coeffs);
            DenseOperator to = evolve_observable(a, o, 0, t, OdeOptions{1e-12});
            double residual = spectral_norm(to - to_dense(q));
            EXPECT_LE(residual, 1.1 * 2 * eps);
            double overlap = (to * to_dense(q)).trace().real() / (double)to.rows();
            EXPECT_GE(overlap, 1 - 1.1 * 2 * eps);
        }
    }
}

TEST(rev, nonconvergence_carries_incumbent) {
    LocalChannelEstimate est = oracle_channel(one_qubit(0.4, 0.2, 2.0, 0.7), 1.0, {0});
    RevOptions opts;
    opts.max_iterations = 1;
    try {
        rev(est, PauliString::from_str("Y"), 1e-12, opts);
        FAIL() << "expected non-convergence";
    } catch (const RevNonConvergence &e) {
        EXPECT_EQ(e.best.coeffs.size(), 4);
        EXPECT_GT(e.best.objective, e.best.lower_bound);
    }
}

TEST(rev, region_cap_and_budget_checks) {
    Rng rng(2);
    LindbladAnsatz a = random_small(3, rng);
    OracleOverlaps src(a, {0.5});
    EXPECT_THROW(estimate_local_channel(src, 3, 0, {0, 1, 2}, 0.1, 2), LimitError);
    EXPECT_THROW(estimate_local_channel(src, 3, 0, {0, 1}, 0.1, 6, 100.0), ValueError);
    LocalChannelEstimate est = estimate_local_channel(src, 3, 0, {2, 0}, 0.0);
    // Region order defines the local labels: local qubit 0 is global qubit 2.
    PauliString out = PauliString::from_str("XI"), in = PauliString::from_str("IZ");
    double direct = src.overlap(0, embed_from_region(out, {2, 0}, 3), embed_from_region(in, {2, 0}, 3));
    EXPECT_EQ(est.ptm((Eigen::Index)out.index(), (Eigen::Index)in.index()), direct);
}
