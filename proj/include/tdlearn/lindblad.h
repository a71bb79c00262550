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

#ifndef TDLEARN_LINDBLAD_H
#define TDLEARN_LINDBLAD_H

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdlearn/dense.h"
#include "tdlearn/lattice.h"
#include "tdlearn/pauli.h"
#include "tdlearn/schedule.h"

namespace tdl {

/// Label of one unknown coefficient function: a Hamiltonian Pauli term alpha or a single-site
/// dissipator (site j, axis P).
struct CoeffIndex {
    enum class Kind : uint8_t { hamiltonian = 0, dissipative = 1 };

    Kind kind = Kind::hamiltonian;
    PauliString alpha;  // hamiltonian only
    size_t site = 0;    // dissipative only
    Axis axis = Axis::X;

    static CoeffIndex hamiltonian(PauliString p) {
        CoeffIndex c;
        c.kind = Kind::hamiltonian;
        c.alpha = std::move(p);
        return c;
    }

    static CoeffIndex dissipative(size_t j, Axis a) {
        CoeffIndex c;
        c.kind = Kind::dissipative;
        c.site = j;
        c.axis = a;
        return c;
    }

    bool is_hamiltonian() const {
        return kind == Kind::hamiltonian;
    }

    /// The Pauli string carried by the term (P_alpha, or the jump Pauli P_j).
    PauliString pauli(size_t n) const {
        if (is_hamiltonian()) {
            return alpha;
        }
        return PauliString::single(n, site, axis);
    }

    std::string str() const {
        if (is_hamiltonian()) {
            return "H:" + alpha.str();
        }
        return cat_str("L:", site, ":", axis_char(axis));
    }

    static CoeffIndex from_str(const std::string &text) {
        if (text.starts_with("H:")) {
            return hamiltonian(PauliString::from_str(text.substr(2)));
        }
        if (text.starts_with("L:")) {
            size_t colon = text.rfind(':');
            if (colon <= 2 || colon + 2 != text.size()) {
                throw ParseError(cat_str("malformed dissipative index '", text, "'"));
            }
            return dissipative(std::stoul(text.substr(2, colon - 2)), axis_from_char(text[colon + 1]));
        }
        throw ParseError(cat_str("malformed coefficient index '", text, "'"));
    }

    bool operator==(const CoeffIndex &o) const {
        if (kind != o.kind) {
            return false;
        }
        return is_hamiltonian() ? alpha == o.alpha : (site == o.site && axis == o.axis);
    }
    bool operator!=(const CoeffIndex &o) const {
        return !(*this == o);
    }
    /// Hamiltonian terms first (Pauli order), then dissipators by (site, axis).
    bool operator<(const CoeffIndex &o) const {
        if (kind != o.kind) {
            return kind < o.kind;
        }
        if (is_hamiltonian()) {
            return alpha < o.alpha;
        }
        return site != o.site ? site < o.site : axis < o.axis;
    }
};

/// One generator term with its coefficient function.
struct LindbladTerm {
    CoeffIndex index;
    PolySchedule f;
};

/// The other two axes of a, in X < Y < Z order.
inline std::array<Axis, 2> other_axes(Axis a) {
    switch (a) {
        case Axis::X:
            return {Axis::Y, Axis::Z};
        case Axis::Y:
            return {Axis::X, Axis::Z};
        default:
            return {Axis::X, Axis::Y};
    }
}

/// Time-dependent Heisenberg-picture generator
///   S(t)(O) = sum_alpha i h_alpha(t) (1/2)[P_alpha, O] + sum_{j,P} l_{j,P}(t) (1/2)(P_j O P_j - O).
///
/// Note the factor 1/2 on the Hamiltonian piece: a term h_alpha contributes i h_alpha (1/2)[P,O],
/// not i[h_alpha P, O].
struct LindbladAnsatz {
    InteractionGraph graph;
    int k = 2;
    double T = 1;
    double tau = 1;
    std::vector<LindbladTerm> terms;

    size_t n() const {
        return graph.n;
    }

    void add_hamiltonian(const PauliString &p, PolySchedule f) {
        terms.push_back({CoeffIndex::hamiltonian(p), std::move(f)});
    }
    void add_hamiltonian(const std::string &p, PolySchedule f) {
        add_hamiltonian(PauliString::from_str(p), std::move(f));
    }
    void add_dissipator(size_t j, Axis a, PolySchedule f) {
        terms.push_back({CoeffIndex::dissipative(j, a), std::move(f)});
    }

    std::vector<CoeffIndex> indices() const {
        std::vector<CoeffIndex> out;
        for (const auto &t : terms) {
            out.push_back(t.index);
        }
        return out;
    }

    const LindbladTerm *find(const CoeffIndex &idx) const {
        for (const auto &t : terms) {
            if (t.index == idx) {
                return &t;
            }
        }
        return nullptr;
    }

    /// Coefficient value of term `idx` at time t (zero when the term is absent).
    double coefficient(const CoeffIndex &idx, double t) const {
        const LindbladTerm *term = find(idx);
        return term ? term->f.eval(t) : 0.0;
    }

    /// Stable textual digest of the ansatz (graph, terms, schedule coefficients).
    std::string fingerprint() const {
        std::string text = cat_str(graph.n, ";", k, ";", fmt_double(T), ";", fmt_double(tau));
        for (size_t v = 0; v < graph.n; v++) {
            for (size_t u : graph.adj[v]) {
                if (u > v) {
                    text += cat_str(";e", v, "-", u);
                }
            }
        }
        for (const auto &t : terms) {
            text += ";" + t.index.str() + "=";
            for (double c : t.f.cheb) {
                text += fmt_double(c) + ",";
            }
        }
        return hex64(fnv1a64(text));
    }

    /// Sub-ansatz on `region` (relabeled 0..|region|-1 in the given order): keeps Hamiltonian
    /// terms whose support lies inside the region and dissipators whose site does.
    LindbladAnsatz restrict_to(const std::vector<size_t> &region) const {
        std::map<size_t, size_t> pos;
        for (size_t r = 0; r < region.size(); r++) {
            graph.check_vertex(region[r]);
            pos[region[r]] = r;
        }
        std::vector<std::pair<size_t, size_t>> edges;
        for (size_t r = 0; r < region.size(); r++) {
            for (size_t u : graph.adj[region[r]]) {
                auto it = pos.find(u);
                if (it != pos.end() && it->second > r) {
                    edges.push_back({r, it->second});
                }
            }
        }
        LindbladAnsatz sub;
        sub.graph = InteractionGraph::from_edges(region.size(), edges, graph.dim, graph.name + "/region");
        sub.k = k;
        sub.T = T;
        sub.tau = tau;
        for (const auto &t : terms) {
            if (t.index.is_hamiltonian()) {
                bool inside = true;
                for (size_t q : t.index.alpha.support()) {
                    inside &= pos.count(q) > 0;
                }
                if (inside) {
                    sub.add_hamiltonian(restrict_to_region(t.index.alpha, region), t.f);
                }
            } else if (pos.count(t.index.site)) {
                sub.add_dissipator(pos[t.index.site], t.index.axis, t.f);
            }
        }
        return sub;
    }
};

/// Unit-coefficient action of one term: P_alpha -> (1/2)[P_alpha, O]; (j,P) -> (1/2)(P_j O P_j - O).
inline DenseOperator apply_term(const CoeffIndex &beta, const DenseOperator &o) {
    size_t n = qubits_of_dim(o.rows());
    PauliString p = beta.pauli(n);
    check_operator_size(p, o);
    DenseOperator out = DenseOperator::Zero(o.rows(), o.cols());
    if (beta.is_hamiltonian()) {
        add_commutator_half(1.0, p, o, out);
    } else {
        add_dissipator(1.0, p, o, out);
    }
    return out;
}

/// The tilde dissipator (1/2)(-L_{j,P1} - L_{j,P2} + L_{j,P}): projects single-site Paulis onto axis P.
inline DenseOperator tilde_dissipator(size_t j, Axis a, const DenseOperator &o) {
    size_t n = qubits_of_dim(o.rows());
    if (j >= n) {
        throw DimensionError(cat_str("site ", j, " outside a ", n, "-qubit operator"));
    }
    DenseOperator out = DenseOperator::Zero(o.rows(), o.cols());
    auto [a1, a2] = other_axes(a);
    add_dissipator(-0.5, PauliString::single(n, j, a1), o, out);
    add_dissipator(-0.5, PauliString::single(n, j, a2), o, out);
    add_dissipator(0.5, PauliString::single(n, j, a), o, out);
    return out;
}

namespace internal {

inline void check_generator_size(const LindbladAnsatz &a, const DenseOperator &o) {
    if (o.rows() != o.cols() || o.rows() != (Eigen::Index)((size_t)1 << a.n())) {
        throw DimensionError(cat_str("operator of size ", o.rows(), "x", o.cols(), " does not match a ", a.n(),
                                     "-qubit ansatz"));
    }
}

inline void add_generator(const LindbladAnsatz &a, double t, const DenseOperator &o, DenseOperator &out,
                          double hamiltonian_sign) {
    size_t n = a.n();
    for (const auto &term : a.terms) {
        double c = term.f.eval(t);
        if (c == 0) {
            continue;
        }
        if (term.index.is_hamiltonian()) {
            add_commutator_half(cdouble(0, hamiltonian_sign * c), term.index.alpha, o, out);
        } else {
            add_dissipator(c, PauliString::single(n, term.index.site, term.index.axis), o, out);
        }
    }
}

}  // namespace internal

/// S(t)(O) in the Heisenberg picture.
inline DenseOperator apply_generator(const LindbladAnsatz &a, double t, const DenseOperator &o) {
    internal::check_generator_size(a, o);
    DenseOperator out = DenseOperator::Zero(o.rows(), o.cols());
    internal::add_generator(a, t, o, out, +1);
    return out;
}

/// S(t)^*(rho), the Schroedinger-picture dual: tr[S(O) rho] = tr[O S^*(rho)].
inline DenseOperator adjoint_generator(const LindbladAnsatz &a, double t, const DenseOperator &rho) {
    internal::check_generator_size(a, rho);
    DenseOperator out = DenseOperator::Zero(rho.rows(), rho.cols());
    internal::add_generator(a, t, rho, out, -1);
    return out;
}

/// Which map a term contributes to the linear system: the Hamiltonian map i P_alpha(.), the plain
/// dissipator, or the tilde dissipator used for dissipative unknowns.
enum class TermMap : uint8_t { commutator, dissipator, tilde_dissipator };

/// Exact symbolic action of a unit term on a Pauli string: the result is zero or phase * Pauli.
///  - commutator:        P_alpha(P) = (1/2)[P_alpha, P] (no factor i)
///  - dissipator:        L_{j,A}(P) = -P if P_j is not in {I, A}, else 0
///  - tilde_dissipator:  L~_{j,A}(P) = P if P_j = A, else 0
inline std::optional<PhasedPauli> apply_term_symbolic(const CoeffIndex &beta, TermMap map, const PauliString &p) {
    if (beta.is_hamiltonian()) {
        if (map != TermMap::commutator) {
            throw ValueError("Hamiltonian terms act through the commutator map");
        }
        return commutator_half(beta.alpha, p);
    }
    if (beta.site >= p.n) {
        throw DimensionError("dissipator site outside the Pauli string");
    }
    char c = p.at(beta.site);
    char a = axis_char(beta.axis);
    if (map == TermMap::dissipator) {
        if (c == 'I' || c == a) {
            return std::nullopt;
        }
        return PhasedPauli{2, p};
    }
    if (map == TermMap::tilde_dissipator) {
        if (c != a) {
            return std::nullopt;
        }
        return PhasedPauli{0, p};
    }
    throw ValueError("dissipative terms act through a dissipator map");
}

/// The map K_beta used in the linear system for a given unknown.
inline TermMap system_map(const CoeffIndex &beta) {
    return beta.is_hamiltonian() ? TermMap::commutator : TermMap::tilde_dissipator;
}

enum class GammaDirection { forward, inverse };

/// Per-site basis change between tilde-dissipator rates and physical rates:
///   forward  Gamma   = (1/2)[[1,-1,-1],[-1,1,-1],[-1,-1,1]]
///   inverse  Gamma^-1 = [[0,-1,-1],[-1,0,-1],[-1,-1,0]].
inline std::array<double, 3> gamma_rotation(const std::array<double, 3> &v, GammaDirection dir) {
    if (dir == GammaDirection::forward) {
        return {0.5 * (v[0] - v[1] - v[2]), 0.5 * (-v[0] + v[1] - v[2]), 0.5 * (-v[0] - v[1] + v[2])};
    }
    return {-v[1] - v[2], -v[0] - v[2], -v[0] - v[1]};
}

struct AnsatzReport {
    bool ok = true;
    std::vector<std::string> violations;
};

/// Structural checks: locality, identity terms, |h| <= 1 and 0 <= l <= tau on [0, T], duplicates.
inline AnsatzReport validate(const LindbladAnsatz &a, size_t grid = 2000) {
    AnsatzReport rep;
    auto flag = [&](std::string msg) {
        rep.ok = false;
        rep.violations.push_back(std::move(msg));
    };
    for (size_t i = 0; i < a.terms.size(); i++) {
        const auto &t = a.terms[i];
        for (size_t j = 0; j < i; j++) {
            if (a.terms[j].index == t.index) {
                flag(cat_str("duplicate term ", t.index.str()));
            }
        }
        if (std::abs(t.f.T - a.T) > 1e-12 * a.T) {
            flag(cat_str("term ", t.index.str(), " schedule horizon ", t.f.T, " differs from T = ", a.T));
        }
        double sup = t.f.sup_norm();
        if (t.index.is_hamiltonian()) {
            if (t.index.alpha.n != a.n()) {
                flag(cat_str("term ", t.index.str(), " has wrong qubit count"));
                continue;
            }
            if (t.index.alpha.is_identity()) {
                flag("identity Hamiltonian term");
            }
            int d = geometric_diameter(t.index.alpha, a.graph);
            if (d < 0 || d > a.k) {
                flag(cat_str("locality violation: ", t.index.str(), " has diameter ", d, " > k = ", a.k));
            }
            if (sup > 1 + 1e-12) {
                flag(cat_str("norm cap violation: ", t.index.str(), " has sup norm ", sup, " > 1"));
            }
        } else {
            if (t.index.site >= a.n()) {
                flag(cat_str("dissipator site ", t.index.site, " outside the graph"));
                continue;
            }
            if (sup > a.tau + 1e-12) {
                flag(cat_str("dissipation cap violation: ", t.index.str(), " has sup ", sup, " > tau = ", a.tau));
            }
            double lo = std::numeric_limits<double>::infinity();
            for (size_t g = 0; g <= grid; g++) {
                lo = std::min(lo, t.f.eval(a.T * (double)g / (double)grid));
            }
            if (lo < -1e-12) {
                flag(cat_str("negative dissipation: ", t.index.str(), " reaches ", lo));
            }
        }
    }
    return rep;
}

/// M = sum of term sup norms; bounds sup_t ||S(t)||_{inf->inf} since each unit term map has
/// operator-norm-to-operator-norm gain at most one.
inline double generator_norm_bound(const LindbladAnsatz &a) {
    double m = 0;
    for (const auto &t : a.terms) {
        m += t.f.sup_norm();
    }
    return m;
}

}  // namespace tdl

#endif
