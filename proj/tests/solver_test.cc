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

#include <gtest/gtest.h>

#include "tdlearn/rev.h"
#include "tdlearn/solver.h"
#include "test_util.h"

using namespace tdl;
using namespace tdl::testutil;

namespace {

/// Exact per-time system from an oracle: rev on `region_radius`-enlarged supports, dense
/// derivatives 2^{-n} tr[S(t)(T(0,t)(O)) Q_bar].
struct ExactNode {
    SystemStructure st;
    std::vector<ProbeObservable> obs;
    std::vector<double> deriv;
    TimeSystem sys;
};

ExactNode exact_node(const LindbladAnsatz &a, const std::vector<ProbeSpec> &probes, double t, int radius,
                     bool use_rev = true) {
    ExactNode node;
    node.st = build_structure(probes);
    const size_t n = a.n();
    OracleOverlaps src(a, {t});
    for (const auto &p : probes) {
        ProbeObservable o;
        if (use_rev) {
            auto region = a.graph.enlarge(support(p.Q), radius);
            LocalChannelEstimate est = estimate_local_channel(src, n, 0, region, 0);
            RevResult r;
            try {
                r = rev(est, restrict_to_region(p.Q, region), 1e-3);
            } catch (const RevNonConvergence &e) {
                r = e.best;
            }
            auto local = paulis_on_region(region.size(), [&] {
                std::vector<size_t> all(region.size());
                for (size_t k = 0; k < all.size(); k++) {
                    all[k] = k;
                }
                return all;
            }());
            for (const auto &lp : local) {
                double c = r.coeffs[(Eigen::Index)lp.index()];
                if (c != 0) {
                    o.terms.push_back({embed_from_region(lp, region, n), c});
                }
            }
        } else {
            o.terms.push_back({p.Q, 1.0});
        }
        DenseOperator od = DenseOperator::Zero((Eigen::Index)1 << n, (Eigen::Index)1 << n);
        for (const auto &[P, c] : o.terms) {
            od += c * to_dense(P);
        }
        DenseOperator evolved = evolve_observable(a, od, 0, t, OdeOptions{1e-13});
        DenseOperator s = apply_generator(a, t, evolved);
        node.deriv.push_back((s * to_dense(p.Q_bar)).trace().real() / (double)s.rows());
        node.obs.push_back(std::move(o));
    }
    std::vector<OverlapRequest> reqs;
    for (const auto &[P, pin] : system_pairs(node.st, node.obs)) {
        reqs.push_back({0, P, pin});
    }
    src.prepare(reqs);
    node.sys = assemble(
        node.st, node.obs, [&](const PauliString &P, const PauliString &pin) { return src.overlap(0, P, pin); },
        node.deriv, t);
    return node;
}

/// Truth values in system order (Hamiltonian h, physical rates l).
Eigen::VectorXd truth_vector(const LindbladAnsatz &a, const std::vector<CoeffIndex> &indices, double t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero((Eigen::Index)indices.size());
    for (size_t k = 0; k < indices.size(); k++) {
        for (const auto &term : a.terms) {
            if (term.index == indices[k]) {
                v[(Eigen::Index)k] = term.f.eval(t);
            }
        }
    }
    return v;
}

LindbladAnsatz mixed_qubit() {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(1);
    a.add_hamiltonian("X", PolySchedule::constant(1, 0.4));
    a.add_dissipator(0, Axis::X, PolySchedule::constant(1, 0.1));
    a.add_dissipator(0, Axis::Y, PolySchedule::constant(1, 0.2));
    a.add_dissipator(0, Axis::Z, PolySchedule::constant(1, 0.3));
    return a;
}

}  // namespace

TEST(solver, single_qubit_z_at_time_zero) {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(1);
    a.add_hamiltonian("Z", PolySchedule::from_monomial(1, {0.5, 0.3}));
    ExactNode node = exact_node(a, build_probes(a).specs, 0.0, 0);
    ASSERT_EQ(node.sys.A.rows(), 1);
    EXPECT_NEAR(node.sys.A(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(node.sys.b[0], 0.5, 1e-14);
    EXPECT_NEAR(solve(node.sys)[0], 0.5, 1e-14);
}

TEST(solver, single_qubit_z_at_interior_node) {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(1);
    a.add_hamiltonian("Z", PolySchedule::from_monomial(1, {0.5, 0.3}));
    ExactNode node = exact_node(a, build_probes(a).specs, 0.5, 0);
    EXPECT_NEAR(solve(node.sys)[0], 0.65, 1e-6);
}

TEST(solver, identity_dynamics_gives_identity) {
    LindbladAnsatz a = local_ansatz(InteractionGraph::path(3), true);
    for (auto &term : a.terms) {
        term.f = PolySchedule::constant(1, 0.0);
    }
    ExactNode node = exact_node(a, build_probes(a).specs, 0.7, 1, false);
    EXPECT_LT((node.sys.A - Eigen::MatrixXd::Identity(node.sys.A.rows(), node.sys.A.cols())).cwiseAbs().maxCoeff(),
              1e-13);
}

TEST(solver, dissipative_block_at_time_zero) {
    LindbladAnsatz a = mixed_qubit();
    ExactNode node = exact_node(a, build_probes(a).specs, 0.0, 0);
    EXPECT_LT((node.sys.A - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((gamma_similarity(node.sys) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(solver, known_rates_fixture_selects_gamma_form) {
    // Rates (0.1, 0.2, 0.3) and h_X = 0.4: solving A~ and mapping through Gamma recovers them; the
    // similarity form Gamma^{-1} A~ Gamma does not.
    LindbladAnsatz a = mixed_qubit();
    for (double t : {0.0, 0.35, 0.8}) {
        ExactNode node = exact_node(a, build_probes(a).specs, t, 0);
        Eigen::VectorXd truth = truth_vector(a, node.sys.indices, t);
        Eigen::VectorXd phys = to_physical(node.sys.indices, solve(node.sys));
        EXPECT_LT((phys - truth).cwiseAbs().maxCoeff(), 1e-9) << "t=" << t;
        Eigen::VectorXd direct = solve_system(physical_matrix(node.sys), node.sys.b);
        EXPECT_LT((direct - truth).cwiseAbs().maxCoeff(), 1e-9);
        Eigen::VectorXd similar = solve_system(gamma_similarity(node.sys), node.sys.b);
        EXPECT_GT((similar - truth).cwiseAbs().maxCoeff(), 0.1);
    }
}

TEST(solver, chain_recovery_with_truncated_observables) {
    // The identity b = A theta is exact for any O, so recovery only needs a well-posed system.
    Rng rng(5);
    LindbladAnsatz a = local_ansatz(InteractionGraph::path(3), true);
    for (auto &term : a.terms) {
        double base = term.index.is_hamiltonian() ? rng.uniform(-1, 1) : rng.uniform(0.01, 0.1);
        term.f = PolySchedule::from_monomial(1, {base, 0.1 * rng.uniform(-1, 1)});
    }
    ProbeSet probes = build_probes(a);
    for (double t : {0.2, 0.6}) {
        ExactNode node = exact_node(a, probes.specs, t, 1);
        Eigen::VectorXd phys = to_physical(node.sys.indices, solve(node.sys));
        EXPECT_LT((phys - truth_vector(a, node.sys.indices, t)).cwiseAbs().maxCoeff(), 1e-8) << "t=" << t;
        EXPECT_TRUE(check_dominance(node.sys.A)) << "margin " << node.sys.dominance_margin;
        // Pattern is contained in the symbolic prediction.
        for (Eigen::Index i = 0; i < node.sys.A.rows(); i++) {
            for (Eigen::Index j = 0; j < node.sys.A.cols(); j++) {
                bool predicted = false;
                for (const auto &e : node.st.rows[(size_t)i]) {
                    predicted |= (Eigen::Index)e.col == j;
                }
                if (!predicted) {
                    EXPECT_EQ(node.sys.A(i, j), 0.0);
                }
            }
        }
    }
}

TEST(solver, gamma_inflation_is_at_most_three) {
    LindbladAnsatz a = mixed_qubit();
    ExactNode node = exact_node(a, build_probes(a).specs, 0.6, 0);
    double base = inf_norm(node.sys.A - Eigen::MatrixXd::Identity(4, 4));
    double rotated = inf_norm(gamma_similarity(node.sys) - Eigen::MatrixXd::Identity(4, 4));
    EXPECT_LE(rotated, 3 * base + 1e-15);
    Rng rng(3);
    for (int trial = 0; trial < 100; trial++) {
        TimeSystem sys = node.sys;
        sys.A = Eigen::MatrixXd::Identity(4, 4);
        for (Eigen::Index i = 0; i < 4; i++) {
            for (Eigen::Index j = 0; j < 4; j++) {
                sys.A(i, j) += rng.uniform(-0.1, 0.1);
            }
        }
        EXPECT_LE(inf_norm(gamma_similarity(sys) - Eigen::MatrixXd::Identity(4, 4)),
                  3 * inf_norm(sys.A - Eigen::MatrixXd::Identity(4, 4)) + 1e-14);
    }
}

TEST(solver, incomplete_dissipative_site_is_rejected) {
    std::vector<CoeffIndex> idx = {CoeffIndex::dissipative(0, Axis::Z)};
    EXPECT_THROW(gamma_matrix(idx, GammaDirection::forward), ValueError);
}

TEST(solver, solve_examples) {
    Eigen::VectorXd b(3);
    b << 0.3, -2, 5;
    EXPECT_LT((solve_system(Eigen::MatrixXd::Identity(3, 3), b) - b).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::Matrix2d A;
    A << 1, 0.1, 0.1, 1;
    Eigen::Vector2d x = solve_system(A, Eigen::Vector2d(1, 0));
    EXPECT_NEAR(x[0], 100.0 / 99, 1e-14);
    EXPECT_NEAR(x[1], -10.0 / 99, 1e-14);
    EXPECT_LT((jacobi_solve(A, Eigen::Vector2d(1, 0)) - x).cwiseAbs().maxCoeff(), 1e-13);
    Eigen::Matrix2d S;
    S << 1, 2, 2, 4;
    EXPECT_THROW(solve_system(S, Eigen::Vector2d(1, 0)), NumericalError);
}

TEST(solver, varah_examples) {
    Eigen::Matrix2d A;
    A << 1, 0.2, 0.1, 1;
    VarahBounds v = varah_bound(A);
    EXPECT_NEAR(v.inf_norm, 1.25, 1e-15);
    EXPECT_NEAR(v.one_norm, 1 / 0.8, 1e-15);
    EXPECT_LE(inf_norm(A.inverse()), 1.25);
    EXPECT_EQ(varah_bound(Eigen::MatrixXd::Identity(4, 4)).inf_norm, 1.0);
    Eigen::Matrix2d N;
    N << 1, 2, 0, 1;
    EXPECT_TRUE(std::isinf(varah_bound(N).inf_norm));
    EXPECT_TRUE(check_dominance(Eigen::MatrixXd::Identity(5, 5)));
    EXPECT_FALSE(check_dominance(N));
}

TEST(solver, perturbation_bound_properties) {
    EXPECT_EQ(perturbation_bound(3, 0.0), 0.0);
    for (int s = 1; s <= 5; s++) {
        double zeta = 1.0 / (20 * s);
        EXPECT_LE(perturbation_bound(s, zeta, 1.0), DEFAULT_C_PERT * s * zeta);
    }
    EXPECT_TRUE(std::isinf(perturbation_bound(5, 0.2)));
}

/// Random matrix meeting the dominance thresholds with at most s nonzeros per row and column.
Eigen::MatrixXd dominant_matrix(Eigen::Index N, int s, Rng &rng) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    double dmin = 1;
    for (Eigen::Index i = 0; i < N; i++) {
        double d = rng.uniform(0.75, 1.5);
        A(i, i) = rng.uniform01() < 0.5 ? d : -d;
        dmin = std::min(dmin, d);
    }
    for (int k = 1; k < s; k++) {
        std::vector<Eigen::Index> perm(N);
        for (Eigen::Index i = 0; i < N; i++) {
            perm[i] = i;
        }
        for (Eigen::Index i = N - 1; i > 0; i--) {
            std::swap(perm[i], perm[rng.below(i + 1)]);
        }
        for (Eigen::Index i = 0; i < N; i++) {
            if (perm[i] != i) {
                A(i, perm[i]) += rng.uniform(-1, 1) * (dmin - 0.5) / (s - 1);
            }
        }
    }
    return A;
}

TEST(solver, randomized_stability_trials) {
    Rng rng(2718);
    for (int trial = 0; trial < 30; trial++) {
        auto N = (Eigen::Index)(2 + rng.below(80));
        int s = 1 + (int)rng.below(5);
        double zeta = 1.0 / (20 * s);
        Eigen::MatrixXd A = dominant_matrix(N, s, rng);
        ASSERT_TRUE(check_dominance(A));
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N, N);
        for (int k = 0; k < s; k++) {
            Eigen::Index shift = (Eigen::Index)rng.below((uint64_t)N);
            for (Eigen::Index i = 0; i < N; i++) {
                B(i, (i + shift) % N) = rng.uniform(-zeta, zeta);
            }
        }
        Eigen::VectorXd b(N), e(N);
        for (Eigen::Index i = 0; i < N; i++) {
            b[i] = rng.uniform(-1, 1);
            e[i] = rng.uniform(-zeta, zeta);
        }
        Eigen::MatrixXd Ainv = A.inverse();
        double diff = ((A + B).inverse() * (b + e) - Ainv * b).cwiseAbs().maxCoeff();
        EXPECT_LE(diff, perturbation_bound(s, zeta, b.cwiseAbs().maxCoeff()));
        EXPECT_LE(diff, DEFAULT_C_PERT * s * zeta);
        VarahBounds v = varah_bound(A);
        EXPECT_LE(inf_norm(Ainv), v.inf_norm * (1 + 1e-12));
        EXPECT_LE(inf_norm(Ainv.transpose()), v.one_norm * (1 + 1e-12));
        Eigen::VectorXd x = solve_system(A, b);
        EXPECT_LE((x - Ainv * b).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, (Ainv * b).cwiseAbs().maxCoeff()));
        EXPECT_LE((jacobi_solve(A, b) - x).cwiseAbs().maxCoeff(), 1e-10);
    }
}
