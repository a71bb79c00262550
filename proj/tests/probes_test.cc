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

#include <sstream>

#include <gtest/gtest.h>

#include "tdlearn/probes.h"
#include "test_util.h"

using namespace tdl;
using namespace tdl::testutil;

namespace {

DenseOperator dense(const std::string &p) {
    return to_dense(PauliString::from_str(p));
}

/// Dense image of the system map of beta.
DenseOperator dense_map(const CoeffIndex &beta, const DenseOperator &o) {
    if (beta.is_hamiltonian()) {
        return apply_term(beta, o);
    }
    return tilde_dissipator(beta.site, beta.axis, o);
}

/// Normalised overlap 2^{-n} tr[P^dagger O].
cdouble coefficient(const DenseOperator &p, const DenseOperator &o) {
    return (p.adjoint() * o).trace() / (double)p.rows();
}

}  // namespace

TEST(probes, single_z_example) {
    auto beta = CoeffIndex::hamiltonian(PauliString::from_str("Z"));
    ProbeSpec s = hamiltonian_probe(beta);
    EXPECT_EQ(s.Q.str(), "X");
    EXPECT_EQ(s.Q_bar.str(), "Y");
    // Dense oracle: tr[X (1/2)[Z, Y]] / 2.
    DenseOperator comm = 0.5 * (dense("Z") * dense("Y") - dense("Y") * dense("Z"));
    cdouble phi = (dense("X") * comm).trace() / 2.0;
    EXPECT_NEAR(std::abs(s.phi() - phi), 0.0, 1e-15);
    EXPECT_EQ(phase_str(s.phase), "-i");
}

TEST(probes, zz_chain_example) {
    ProbeSpec s = hamiltonian_probe(CoeffIndex::hamiltonian(PauliString::from_str("ZZI")));
    EXPECT_EQ(s.Q.str(), "XII");
    EXPECT_EQ(s.Q_bar.str(), "YZI");
}

TEST(probes, tie_break_prefers_x_then_y) {
    EXPECT_EQ(hamiltonian_probe(CoeffIndex::hamiltonian(PauliString::from_str("IXZ"))).Q.str(), "IYI");
    EXPECT_EQ(hamiltonian_probe(CoeffIndex::hamiltonian(PauliString::from_str("IYZ"))).Q.str(), "IXI");
}

TEST(probes, dissipative_example) {
    ProbeSpec s = dissipative_probe(CoeffIndex::dissipative(0, Axis::X), 2);
    EXPECT_EQ(s.Q.str(), "XI");
    EXPECT_EQ(s.Q_bar.str(), "XI");
    EXPECT_EQ(s.phase, 0);
    DenseOperator img = tilde_dissipator(0, Axis::X, dense("XI"));
    EXPECT_NEAR(std::abs(coefficient(dense("XI"), img) - 1.0), 0.0, 1e-14);
}

TEST(probes, neighbor_examples) {
    auto z = CoeffIndex::hamiltonian(PauliString::from_str("Z"));
    auto nb = pauli_neighbors(z, PauliString::from_str("Y"));
    ASSERT_EQ(nb.size(), 1u);
    EXPECT_EQ(nb[0].p.str(), "X");
    EXPECT_EQ(phase_str(nb[0].phase), "+i");  // (1/2)[Z, X] = iY
    EXPECT_TRUE(pauli_neighbors(z, PauliString::from_str("Z")).empty());
    auto lx = CoeffIndex::dissipative(0, Axis::X);
    auto dn = pauli_neighbors(lx, PauliString::from_str("X"));
    ASSERT_EQ(dn.size(), 1u);
    EXPECT_EQ(dn[0].p.str(), "X");
    EXPECT_EQ(dn[0].phase, 0);
    EXPECT_TRUE(pauli_neighbors(lx, PauliString::from_str("Y")).empty());
    auto plain = pauli_neighbors(lx, PauliString::from_str("Y"), TermMap::dissipator);
    ASSERT_EQ(plain.size(), 1u);
    EXPECT_EQ(phase_str(plain[0].phase), "-1");
}

TEST(probes, neighbors_are_complete_and_forward_consistent) {
    // Against dense arithmetic: P is a neighbour iff K(P) is proportional to Q_bar.
    for (size_t n : {1, 2, 3}) {
        std::vector<CoeffIndex> betas;
        for (uint64_t i = 1; i < ((uint64_t)1 << (2 * n)); i++) {
            betas.push_back(CoeffIndex::hamiltonian(PauliString::from_index(n, i)));
        }
        for (size_t j = 0; j < n; j++) {
            for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
                betas.push_back(CoeffIndex::dissipative(j, a));
            }
        }
        for (size_t bi = 0; bi < betas.size(); bi += (n == 3 ? 7 : 1)) {
            const auto &beta = betas[bi];
            for (uint64_t qi = 0; qi < ((uint64_t)1 << (2 * n)); qi += (n == 3 ? 5 : 1)) {
                PauliString q_bar = PauliString::from_index(n, qi);
                auto nb = pauli_neighbors(beta, q_bar);
                DenseOperator dq = to_dense(q_bar);
                size_t expected = 0;
                for (uint64_t pi = 0; pi < ((uint64_t)1 << (2 * n)); pi++) {
                    PauliString p = PauliString::from_index(n, pi);
                    DenseOperator img = dense_map(beta, to_dense(p));
                    cdouble c = coefficient(dq, img);
                    bool proportional = std::abs(c) > 0.5 && (img - c * dq).norm() < 1e-12;
                    if (!proportional) {
                        continue;
                    }
                    expected++;
                    bool found = false;
                    for (const auto &x : nb) {
                        if (x.p == p) {
                            found = true;
                            EXPECT_NEAR(std::abs(phase_value(x.phase) - c), 0.0, 1e-14);
                        }
                    }
                    EXPECT_TRUE(found) << beta.str() << " " << q_bar.str() << " " << p.str();
                }
                EXPECT_EQ(nb.size(), expected) << beta.str() << " " << q_bar.str();
            }
        }
    }
}

TEST(probes, phases_match_dense_trace) {
    LindbladAnsatz a = local_ansatz(InteractionGraph::path(3), true);
    for (const auto &s : build_probes(a).specs) {
        cdouble phi = coefficient(to_dense(s.Q), dense_map(s.index, to_dense(s.Q_bar)));
        EXPECT_NEAR(std::abs(phi - s.phi()), 0.0, 1e-14) << s.index.str();
        if (s.index.is_hamiltonian()) {
            EXPECT_EQ(s.Q.weight(), 1u);
            EXPECT_TRUE(anticommutes(s.Q, s.index.alpha));
        }
    }
}

TEST(probes, stability_on_test_matrix) {
    std::vector<InteractionGraph> graphs;
    for (size_t n = 4; n <= 8; n++) {
        graphs.push_back(InteractionGraph::path(n));
    }
    graphs.push_back(InteractionGraph::ring(6));
    graphs.push_back(InteractionGraph::grid(4, 4));
    for (const auto &g : graphs) {
        for (bool dis : {false, true}) {
            LindbladAnsatz a = local_ansatz(g, dis);
            ProbeSet set = build_probes(a);
            StabilityReport rep = verify_stability(set.specs);
            EXPECT_TRUE(rep.ok) << g.name;
            EXPECT_EQ(set.specs.size(), a.terms.size());
            EXPECT_LE((double)rep.s(), instantiated_s_bound(2, g.dim)) << g.name;
            EXPECT_GE(rep.s(), 1u);
        }
    }
}

TEST(probes, five_qubit_chain_counts) {
    // ZZ+X+Z chain with all dissipators: the probe of Z_2 has Q_bar = Y_2, which is moved by the
    // Hamiltonian terms Z_1Z_2, Z_2Z_3, X_2, Z_2 and the tilde dissipator on (2, Y).
    LindbladAnsatz a = local_ansatz(InteractionGraph::path(5), true);
    ProbeSet set = build_probes(a);
    StabilityReport rep = verify_stability(set.specs);
    EXPECT_TRUE(rep.ok);
    for (const auto &s : set.specs) {
        if (s.index.str() == "H:IIZII") {
            EXPECT_EQ(s.Q_bar.str(), "IIYII");
        }
    }
    EXPECT_GE(rep.s_col, 5u);
    EXPECT_LE((double)rep.s(), instantiated_s_bound(2, a.graph.dim));
}

TEST(probes, corrupted_probe_is_flagged) {
    LindbladAnsatz a = local_ansatz(InteractionGraph::path(4), false);
    ProbeSet set = build_probes(a);
    set.specs[0].Q_bar = set.specs[0].index.alpha;  // commutes with P_alpha
    StabilityReport rep = verify_stability(set.specs);
    EXPECT_FALSE(rep.ok);
    ASSERT_FALSE(rep.violations.empty());
    EXPECT_NE(rep.violations[0].find("diagonal"), std::string::npos);
}

TEST(probes, duplicate_direction_breaks_orthogonality) {
    // Two probes that share Q and Q_bar cannot separate their terms.
    std::vector<ProbeSpec> specs = {dissipative_probe(CoeffIndex::dissipative(0, Axis::X), 1),
                                    dissipative_probe(CoeffIndex::dissipative(0, Axis::X), 1)};
    EXPECT_FALSE(verify_stability(specs).ok);
}

TEST(probes, single_term_has_unit_sparsity) {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(2);
    a.add_hamiltonian("XZ", PolySchedule::constant(1, 1.0));
    EXPECT_EQ(build_probes(a).s, 1u);
}

TEST(probes, dump_format) {
    LindbladAnsatz a;
    a.graph = InteractionGraph::path(1);
    a.add_hamiltonian("Z", PolySchedule::constant(1, 1.0));
    a.add_dissipator(0, Axis::Y, PolySchedule::constant(1, 0.1));
    std::ostringstream ss;
    dump_probes(build_probes(a).specs, ss);
    EXPECT_EQ(ss.str(), "H:Z X Y -i\nL:0:Y Y Y +1\n");
}
