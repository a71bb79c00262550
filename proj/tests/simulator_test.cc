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

#include "tdlearn/simulator.h"
#include "test_util.h"

using namespace tdl;
using namespace tdl::testutil;

namespace {

DenseOperator dense(const std::string &p) {
    return to_dense(PhasedPauli::from_str(p));
}

LindbladAnsatz single(const std::string &what, double value) {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(1);
    if (what[0] == 'h') {
        a.add_hamiltonian(std::string(1, what[1]), PolySchedule::constant(1, value));
    } else {
        a.add_dissipator(0, axis_from_char(what[1]), PolySchedule::constant(1, value));
    }
    return a;
}

}  // namespace

TEST(simulator, bloch_rotation_closed_form) {
    LindbladAnsatz a = single("hX", 1.0);
    for (double t : {0.1, 0.7, 1.0, 2.5}) {
        DenseOperator z = evolve_observable(a, dense("Z"), 0, t);
        EXPECT_LT((z - (std::cos(t) * dense("Z") + std::sin(t) * dense("Y"))).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(simulator, dephasing_closed_form) {
    double g = 0.7;
    LindbladAnsatz a = single("lZ", g);
    for (double t : {0.2, 1.0, 3.0}) {
        DenseOperator x = evolve_observable(a, dense("X"), 0, t);
        EXPECT_LT((x - std::exp(-g * t) * dense("X")).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(simulator, identity_preserved_and_cocycle) {
    Rng rng(3);
    for (size_t n = 1; n <= 3; n++) {
        LindbladAnsatz a = random_small(n, rng);
        DenseOperator id = DenseOperator::Identity(1 << n, 1 << n);
        EXPECT_LT((evolve_observable(a, id, 0, 0.9) - id).cwiseAbs().maxCoeff(), 1e-12);
        DenseOperator o = dense("+" + std::string(n, 'X'));
        DenseOperator direct = evolve_observable(a, o, 0.1, 0.9);
        // T(s,t) = T(u,t) o T(s,u).
        DenseOperator cocycle = evolve_observable(a, evolve_observable(a, o, 0.1, 0.4), 0.4, 0.9);
        EXPECT_LT((direct - cocycle).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(simulator, heisenberg_contractivity) {
    Rng rng(4);
    for (int trial = 0; trial < 10; trial++) {
        LindbladAnsatz a = random_small(2, rng);
        DenseOperator o = random_density(2, rng);
        o -= DenseOperator::Identity(4, 4) * 0.25;
        double before = spectral_norm(o);
        EXPECT_LE(spectral_norm(evolve_observable(a, o, 0, 1.0)), before + 1e-8);
    }
}

TEST(simulator, state_evolution_properties) {
    Rng rng(5);
    for (size_t n = 1; n <= 3; n++) {
        LindbladAnsatz a = random_small(n, rng);
        Eigen::Index d = (Eigen::Index)1 << n;
        DenseOperator mixed = DenseOperator::Identity(d, d) / (double)d;
        EXPECT_LT((evolve_state(a, mixed, 0, 0.8) - mixed).cwiseAbs().maxCoeff(), 1e-10);
        DenseOperator rho = random_density(n, rng);
        DenseOperator rt = evolve_state(a, rho, 0.2, 0.9);
        EXPECT_NEAR(rt.trace().real(), 1.0, 1e-10);
        Eigen::SelfAdjointEigenSolver<DenseOperator> es(0.5 * (rt + rt.adjoint()));
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
        DenseOperator o = dense("+" + std::string(n, 'Y'));
        double lhs = (evolve_observable(a, o, 0.2, 0.9) * rho).trace().real();
        double rhs = (o * rt).trace().real();
        EXPECT_NEAR(lhs, rhs, 1e-8);
    }
}

TEST(simulator, pure_state_rotation) {
    LindbladAnsatz a = single("hX", 1.0);
    DenseOperator rho = product_eigenstate({Axis::Z}, {0});
    for (double t : {0.3, 1.2}) {
        DenseOperator rt = evolve_state(a, rho, 0, t);
        EXPECT_NEAR((dense("Z") * rt).trace().real(), std::cos(t), 1e-8);
        EXPECT_NEAR(rt.trace().real(), 1.0, 1e-10);
    }
}

TEST(simulator, step_size_underflow_is_reported) {
    LindbladAnsatz a = single("lZ", 1.0);
    OdeOptions opts;
    opts.tol = 1e-10;
    opts.h_min = 10;  // absurd floor forces the error path
    EXPECT_THROW(evolve_observable(a, dense("X"), 0, 1.0, opts), NumericalError);
}

TEST(simulator, region_reduction_round_trip) {
    Rng rng(6);
    DenseOperator local = random_density(2, rng);
    DenseOperator full = embed_operator(local, {1, 3}, 4);
    EXPECT_LT((reduce_to_region(full, {1, 3}) - local).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(operator_support(dense("IXIZ")), (std::vector<size_t>{1, 3}));
    // Cross-check the embedding against Kronecker structure: Z on qubit 3 of 4.
    EXPECT_LT((embed_operator(dense("Z"), {3}, 4) - dense("IIIZ")).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(simulator, truncated_evolution) {
    LindbladAnsatz a = zz_x_chain(4, 0.6, 0.8, 0.1);
    DenseOperator o = dense("IZII");
    EXPECT_LT((truncated_evolve(a, o, {0, 1, 2, 3}, 0, 0.5) - evolve_observable(a, o, 0, 0.5)).cwiseAbs().maxCoeff(), 1e-9);
    LindbladAnsatz zz_only;
    zz_only.graph = InteractionGraph::path(3);
    zz_only.add_hamiltonian("ZZI", PolySchedule::constant(1, 1));
    DenseOperator x2 = dense("IIX");
    EXPECT_LT((truncated_evolve(zz_only, x2, {2}, 0, 0.7) - x2).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_THROW(truncated_evolve(a, o, {2, 3}, 0, 0.5), ValueError);
}

TEST(simulator, pauli_evolver_matches_dense) {
    Rng rng(7);
    for (size_t n = 1; n <= 3; n++) {
        LindbladAnsatz a = random_small(n, rng);
        PauliGenerator gen(a);
        PauliString p = PauliString::single(n, 0, Axis::Z);
        auto vs = gen.evolve(gen.basis_vector(p), 0.1, {0.3, 0.8});
        auto ds = evolve_observable_at(a, to_dense(p), 0.1, {0.3, 0.8});
        for (int k = 0; k < 2; k++) {
            Eigen::VectorXcd c = pauli_vector(ds[k]);
            EXPECT_LT((c.real() - vs[k]).cwiseAbs().maxCoeff(), 1e-9);
            EXPECT_LT(c.imag().cwiseAbs().maxCoeff(), 1e-12);
        }
        // Generator matrix agrees with the dense generator on every Pauli.
        Eigen::MatrixXd g = gen.matrix(0.45);
        for (uint64_t idx = 0; idx < gen.dim(); idx++) {
            Eigen::VectorXcd c = pauli_vector(apply_generator(a, 0.45, to_dense(PauliString::from_index(n, idx))));
            EXPECT_LT((c.real() - g.col((Eigen::Index)idx)).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(simulator, dyson_tail_values) {
    EXPECT_NEAR(dyson_tail(1, 0.5, 3), std::pow(0.5, 4) / 24, 1e-18);
    EXPECT_EQ(dyson_tail(2, 0, 3), 0);
    double prev = dyson_tail(3, 1, 3);
    for (int K = 4; K < 30; K++) {
        double cur = dyson_tail(3, 1, K);
        EXPECT_LT(cur, prev);
        prev = cur;
    }
    EXPECT_EQ(dyson_order(1, 0.5, 0.01), 3);  // 0.5^3/6 > 0.01 >= 0.5^4/24
}

TEST(simulator, dyson_truncation_within_tail) {
    Rng rng(8);
    for (int trial = 0; trial < 4; trial++) {
        size_t n = 1 + trial % 2;
        LindbladAnsatz a = random_small(n, rng);
        double M = generator_norm_bound(a);
        for (double t : {0.2, 0.5}) {
            auto ds = dyson_superoperators(a, t, 4);
            for (int K = 1; K <= 4; K++) {
                double measured = superoperator_norm_inf(ds.exact - ds.partial[K], n, rng, 2, 50);
                EXPECT_LE(measured, dyson_tail(M, t, K) + 1e-10) << "K=" << K << " t=" << t;
            }
        }
    }
}

TEST(simulator, superoperator_norm_of_known_maps) {
    Rng rng(9);
    // Identity map: norm 1. Dephasing by -1 on X,Y (P -> Z P Z): unitary conjugation, norm 1.
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
    EXPECT_NEAR(superoperator_norm_inf(id, 1, rng), 1.0, 1e-12);
    Eigen::MatrixXd half = 0.5 * id;
    EXPECT_NEAR(superoperator_norm_inf(half, 1, rng), 0.5, 1e-12);
    // Transpose map (Y -> -Y) also has norm 1.
    Eigen::MatrixXd tr = id;
    tr(PauliString::from_str("Y").index(), PauliString::from_str("Y").index()) = -1;
    EXPECT_NEAR(superoperator_norm_inf(tr, 1, rng), 1.0, 1e-9);
}

TEST(simulator, lr_bound_shapes) {
    LRParams cal;
    cal.C3 = 2;
    cal.mu = 1.5;
    cal.v = 3;
    EXPECT_EQ(lr_bound(cal, 2, 0.0), 0.0);
    LRParams f;
    f.source = LRSource::formula;
    f.C1 = 1;
    f.k = 1;
    EXPECT_EQ(lr_bound(f, 2, 0.0), 0.0);
    for (int r = 0; r < 10; r++) {
        EXPECT_LT(lr_bound(cal, r + 1, 0.3), lr_bound(cal, r, 0.3));
    }
    // Formula mode decreases once r exceeds 2 C1 k^D 4^{C1 k^D} dt = 8 * 0.1.
    for (int r = 1; r < 20; r++) {
        EXPECT_LT(lr_bound(f, r + 1, 0.1), lr_bound(f, r, 0.1));
    }
    EXPECT_EQ(lr_radius(cal, 10.0, 0.3, 0, 5).radius, 0);
    EXPECT_EQ(lr_radius(cal, 1e-3, 0.0, 0, 5).radius, 0);
    LRRadius capped = lr_radius(cal, 1e-30, 0.3, 0, 4);
    EXPECT_TRUE(capped.capped);
    EXPECT_EQ(capped.radius, 4);
    int r1 = lr_radius(cal, 1e-4, 0.3, 0, 100).radius;
    int r2 = lr_radius(cal, 0.5e-4, 0.3, 0, 100).radius;
    EXPECT_LE(r2 - r1, 1);
    EXPECT_GE(r2, r1);
}

TEST(simulator, lr_calibration_bounds_chain_sweep) {
    LindbladAnsatz a = zz_x_chain(8, 1.0, 1.0);
    std::vector<double> times{0.1, 0.2, 0.4};
    auto samples = lr_truncation_sweep(a, PauliString::single(8, 3, Axis::Z), {0, 1, 2, 3}, times);
    LRParams p = calibrate_lr(samples);
    for (const auto &s : samples) {
        EXPECT_LE(s.err, lr_bound(p, s.r, s.t)) << s.r << " " << s.t;
    }
    // Held-out: a 6-qubit chain with weaker couplings and another observable.
    LindbladAnsatz b = zz_x_chain(6, 0.7, -0.9, 0.05, 0.2);
    auto held = lr_truncation_sweep(b, PauliString::single(6, 2, Axis::Z), {2}, {0.3});
    EXPECT_LE(held[0].err, lr_bound(p, 2, 0.3));
}

TEST(simulator, comparison_bound_single_qubit) {
    EXPECT_EQ(comparison_bound(0, 1, 0.5, {}), 0);
    EXPECT_EQ(comparison_bound(0.1, 1, 0, {}), 0);
    LindbladAnsatz h = single("hX", 1.0);
    LindbladAnsatz hd = h;
    hd.add_dissipator(0, Axis::Z, PolySchedule::constant(1, 0.01));
    DenseOperator z = dense("Z");
    double measured = spectral_norm(evolve_observable(h, z, 0, 0.5) - evolve_observable(hd, z, 0, 0.5));
    EXPECT_GT(measured, 0);
    EXPECT_LE(measured, comparison_bound(0.01, 0, 0.5, {}));
}
