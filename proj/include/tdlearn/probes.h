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

#ifndef TDLEARN_PROBES_H
#define TDLEARN_PROBES_H

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "tdlearn/lattice.h"
#include "tdlearn/lindblad.h"

namespace tdl {

/// Phase i^e rendered as +1, +i, -1, -i.
inline std::string phase_str(int e) {
    static const char *names[4] = {"+1", "+i", "-1", "-i"};
    return names[((e % 4) + 4) % 4];
}

inline cdouble phase_value(int e) {
    static const cdouble values[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return values[((e % 4) + 4) % 4];
}

/// Probe for one unknown: invert the evolution onto Q, measure against Q_bar.
struct ProbeSpec {
    CoeffIndex index;
    PauliString Q;
    PauliString Q_bar;
    TermMap map = TermMap::commutator;
    /// phi = i^phase = 2^{-n} tr[Q K(Q_bar)].
    int phase = 0;

    cdouble phi() const {
        return phase_value(phase);
    }
};

struct ProbeSet {
    std::vector<ProbeSpec> specs;
    size_t s = 0;
};

/// P with K_beta(P) = i^phase Q_bar.
struct PauliNeighbor {
    PauliString p;
    int phase = 0;
};

/// Every Pauli string P with K_beta(P) proportional to q_bar, together with the exact phase.
inline std::vector<PauliNeighbor> pauli_neighbors(const CoeffIndex &beta, const PauliString &q_bar,
                                                  TermMap map) {
    std::vector<PauliNeighbor> out;
    if (beta.is_hamiltonian()) {
        // (1/2)[P_a, P] = P_a P when they anticommute, so P is proportional to P_a Q_bar.
        if (!anticommutes(beta.alpha, q_bar)) {
            return out;
        }
        PauliString p = multiply(beta.alpha, q_bar).pauli;
        auto image = apply_term_symbolic(beta, map, p);
        if (image && image->pauli == q_bar) {
            out.push_back({p, image->phase});
        }
        return out;
    }
    // Dissipators are diagonal in the Pauli basis.
    auto image = apply_term_symbolic(beta, map, q_bar);
    if (image) {
        out.push_back({q_bar, image->phase});
    }
    return out;
}

inline std::vector<PauliNeighbor> pauli_neighbors(const CoeffIndex &beta, const PauliString &q_bar) {
    return pauli_neighbors(beta, q_bar, system_map(beta));
}

/// 2^{-n} tr[q K_beta(p)] as a phase exponent, or -1 when it vanishes.
inline int symbolic_overlap(const CoeffIndex &beta, TermMap map, const PauliString &q, const PauliString &p) {
    auto image = apply_term_symbolic(beta, map, p);
    if (!image || image->pauli != q) {
        return -1;
    }
    return image->phase;
}

/// Probe for a Hamiltonian term: Q is the first single-site Pauli (X < Y < Z) on the lowest support
/// site that anticommutes with P_alpha, and Q_bar is the canonical Pauli of (1/2)[P_alpha, Q].
inline ProbeSpec hamiltonian_probe(const CoeffIndex &beta) {
    const PauliString &alpha = beta.alpha;
    auto supp = support(alpha);
    if (supp.empty()) {
        throw ValueError("identity Hamiltonian term has no probe");
    }
    size_t q = supp.front();
    for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
        PauliString cand = PauliString::single(alpha.n, q, a);
        if (!anticommutes(cand, alpha)) {
            continue;
        }
        ProbeSpec spec;
        spec.index = beta;
        spec.Q = cand;
        spec.Q_bar = commutator_half(alpha, cand)->pauli;
        spec.map = TermMap::commutator;
        spec.phase = symbolic_overlap(beta, spec.map, spec.Q, spec.Q_bar);
        return spec;
    }
    throw ValueError("no anticommuting single-site Pauli for " + alpha.str());
}

inline ProbeSpec dissipative_probe(const CoeffIndex &beta, size_t n) {
    ProbeSpec spec;
    spec.index = beta;
    spec.Q = PauliString::single(n, beta.site, beta.axis);
    spec.Q_bar = spec.Q;
    spec.map = TermMap::tilde_dissipator;
    spec.phase = symbolic_overlap(beta, spec.map, spec.Q, spec.Q_bar);
    return spec;
}

struct StabilityReport {
    bool ok = true;
    size_t s_row = 0;
    size_t s_col = 0;
    std::vector<std::string> violations;

    size_t s() const {
        return std::max(s_row, s_col);
    }
};

/// Exhaustive symbolic check of the stability conditions for a probe family:
///  - diagonal 2^{-n} tr[Q_b K_b(Q_bar_b)] in {+-1, +-i} and equal to the recorded phase;
///  - off-diagonal tr[Q_b K_b'(Q_bar_b)] = 0 for b' != b;
///  - row counts |{b' : K_b(Q_bar_b') != 0}| and column counts |{b' : K_b'(Q_bar_b) != 0}|.
inline StabilityReport verify_stability(const std::vector<ProbeSpec> &specs) {
    StabilityReport rep;
    std::vector<size_t> rows(specs.size(), 0), cols(specs.size(), 0);
    for (size_t b = 0; b < specs.size(); b++) {
        const ProbeSpec &sb = specs[b];
        int diag = symbolic_overlap(sb.index, sb.map, sb.Q, sb.Q_bar);
        if (diag < 0) {
            rep.ok = false;
            rep.violations.push_back(cat_str("diagonal of ", sb.index.str(), " vanishes"));
        } else if (diag != sb.phase) {
            rep.ok = false;
            rep.violations.push_back(cat_str("diagonal phase of ", sb.index.str(), " is ", phase_str(diag),
                                             ", recorded ", phase_str(sb.phase)));
        }
        for (size_t c = 0; c < specs.size(); c++) {
            const ProbeSpec &sc = specs[c];
            auto col_image = apply_term_symbolic(sc.index, sc.map, sb.Q_bar);
            if (col_image) {
                cols[b]++;
                if (c != b && col_image->pauli == sb.Q) {
                    rep.ok = false;
                    rep.violations.push_back(
                        cat_str("off-diagonal overlap between probe ", sb.index.str(), " and term ", sc.index.str()));
                }
            }
            if (apply_term_symbolic(sb.index, sb.map, sc.Q_bar)) {
                rows[b]++;
            }
        }
    }
    for (size_t b = 0; b < specs.size(); b++) {
        rep.s_row = std::max(rep.s_row, rows[b]);
        rep.s_col = std::max(rep.s_col, cols[b]);
    }
    return rep;
}

/// Probes for every unknown of the ansatz (Hamiltonian terms first, in ansatz order).
inline ProbeSet build_probes(const LindbladAnsatz &a) {
    ProbeSet set;
    size_t n = a.n();
    for (const auto &t : a.terms) {
        if (t.index.is_hamiltonian()) {
            set.specs.push_back(hamiltonian_probe(t.index));
        }
    }
    for (const auto &t : a.terms) {
        if (!t.index.is_hamiltonian()) {
            set.specs.push_back(dissipative_probe(t.index, n));
        }
    }
    set.s = verify_stability(set.specs).s();
    return set;
}

/// Instantiated stability bound k^D 4^{C1 k^D} for the graph's ball-growth constants.
inline double instantiated_s_bound(int k, const DimParams &p) {
    double kd = std::pow((double)k, p.D);
    return kd * std::pow(4.0, p.C1 * kd);
}

/// One line per probe: `<index> <Q> <Q_bar> <phi>`.
inline void dump_probes(const std::vector<ProbeSpec> &specs, std::ostream &out) {
    for (const auto &s : specs) {
        out << s.index.str() << ' ' << s.Q.str() << ' ' << s.Q_bar.str() << ' ' << phase_str(s.phase) << '\n';
    }
}

}  // namespace tdl

#endif
