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

#ifndef TDLEARN_SOLVER_H
#define TDLEARN_SOLVER_H

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/probes.h"

namespace tdl {

/// Region observable O = sum_k coeff_k P_k (global Pauli strings).
struct ProbeObservable {
    std::vector<std::pair<PauliString, double>> terms;
};

/// Time-independent structure of the linear system: for every row (probe) the columns it touches,
/// the neighbour Pauli whose overlap enters, and the real weight multiplying that overlap.
struct SystemStructure {
    struct Entry {
        size_t col = 0;
        PauliString P;
        double weight = 0;
    };

    std::vector<CoeffIndex> indices;
    std::vector<double> orient;
    std::vector<std::vector<Entry>> rows;

    size_t size() const {
        return indices.size();
    }
};

/// Row/column structure from the probes. Column b' of row b collects every neighbour P with
/// K_b'(P) = phi Q_bar_b; Hamiltonian columns carry the factor i of the generator term i h P_a.
/// Rows are oriented so that the exact-probe diagonal is +1.
inline SystemStructure build_structure(const std::vector<ProbeSpec> &probes) {
    SystemStructure st;
    const size_t N = probes.size();
    for (const auto &p : probes) {
        st.indices.push_back(p.index);
    }
    st.rows.resize(N);
    st.orient.assign(N, 1.0);
    for (size_t b = 0; b < N; b++) {
        cdouble diag = 0;
        std::vector<std::pair<size_t, std::pair<PauliString, cdouble>>> raw;
        for (size_t c = 0; c < N; c++) {
            const CoeffIndex &col = probes[c].index;
            cdouble kappa = col.is_hamiltonian() ? cdouble(0, 1) : cdouble(1, 0);
            for (const auto &nb : pauli_neighbors(col, probes[b].Q_bar, probes[c].map)) {
                cdouble w = kappa * phase_value(nb.phase);
                raw.push_back({c, {nb.p, w}});
                if (c == b && nb.p == probes[b].Q) {
                    diag = w;
                }
            }
        }
        if (std::abs(diag) < 0.5) {
            throw ValueError(cat_str("probe ", probes[b].index.str(), " does not see its own term"));
        }
        // diag is +-1 (real), so its inverse is itself.
        st.orient[b] = diag.real();
        for (auto &[c, pw] : raw) {
            if (std::abs(pw.second.imag()) > 1e-12) {
                throw NumericalError("complex weight in the linear system");
            }
            st.rows[b].push_back({c, pw.first, st.orient[b] * pw.second.real()});
        }
    }
    return st;
}

/// Every (neighbour P, measured Pauli P_in) pair needed to assemble the system at one time.
inline std::vector<std::pair<PauliString, PauliString>> system_pairs(const SystemStructure &st,
                                                                      const std::vector<ProbeObservable> &obs) {
    std::vector<std::pair<PauliString, PauliString>> out;
    for (size_t b = 0; b < st.size(); b++) {
        for (const auto &e : st.rows[b]) {
            for (const auto &[pin, c] : obs[b].terms) {
                out.push_back({e.P, pin});
            }
        }
    }
    return out;
}

/// Overlap accessor at a fixed time: (prep Pauli, measured Pauli) -> 2^{-n} tr[T(meas) prep].
using OverlapFn = std::function<double(const PauliString &, const PauliString &)>;

struct TimeSystem {
    double t = 0;
    std::vector<CoeffIndex> indices;
    /// Oriented system in the tilde basis for dissipative unknowns.
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double dominance_margin = 0;
    size_t sparsity_s = 0;
};

/// min_i (|A_ii| - max(sum_{j != i} |A_ij|, sum_{j != i} |A_ji|)).
inline double dominance_margin(const Eigen::MatrixXd &A) {
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < A.rows(); i++) {
        double row = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
        double col = A.col(i).cwiseAbs().sum() - std::abs(A(i, i));
        margin = std::min(margin, std::abs(A(i, i)) - std::max(row, col));
    }
    return A.rows() ? margin : 0.0;
}

inline size_t sparsity(const Eigen::MatrixXd &A, double tol = 0) {
    size_t s = 0;
    for (Eigen::Index i = 0; i < A.rows(); i++) {
        size_t r = 0, c = 0;
        for (Eigen::Index j = 0; j < A.cols(); j++) {
            r += std::abs(A(i, j)) > tol;
            c += std::abs(A(j, i)) > tol;
        }
        s = std::max({s, r, c});
    }
    return s;
}

/// A_{b,b'} = orient_b sum_{P} weight * c_P with c_P = sum_in o_in overlap(P, P_in) and
/// b_b = orient_b * derivative_b.
inline TimeSystem assemble(const SystemStructure &st, const std::vector<ProbeObservable> &obs,
                           const OverlapFn &overlap, const std::vector<double> &derivatives, double t) {
    const size_t N = st.size();
    if (obs.size() != N || derivatives.size() != N) {
        throw DimensionError("assemble: one observable and one derivative per probe are required");
    }
    TimeSystem sys;
    sys.t = t;
    sys.indices = st.indices;
    sys.A = Eigen::MatrixXd::Zero((Eigen::Index)N, (Eigen::Index)N);
    sys.b.resize((Eigen::Index)N);
    for (size_t b = 0; b < N; b++) {
        for (const auto &e : st.rows[b]) {
            double cP = 0;
            for (const auto &[pin, c] : obs[b].terms) {
                cP += c * overlap(e.P, pin);
            }
            sys.A((Eigen::Index)b, (Eigen::Index)e.col) += e.weight * cP;
        }
        sys.b[(Eigen::Index)b] = st.orient[b] * derivatives[b];
    }
    sys.dominance_margin = dominance_margin(sys.A);
    sys.sparsity_s = sparsity(sys.A, 1e-14);
    return sys;
}

/// Direct solve with partial pivoting and a residual check.
inline Eigen::VectorXd solve_system(const Eigen::MatrixXd &A, const Eigen::VectorXd &b) {
    if (A.rows() != A.cols() || A.rows() != b.size()) {
        throw DimensionError("solve: system is not square or b has the wrong length");
    }
    if (A.rows() == 0) {
        return Eigen::VectorXd();
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (!(lu.rcond() > 1e-14)) {
        throw NumericalError(cat_str("numerically singular system (rcond ", lu.rcond(), ")"));
    }
    Eigen::VectorXd x = lu.solve(b);
    double res = (A * x - b).cwiseAbs().maxCoeff();
    double scale = b.cwiseAbs().maxCoeff();
    if (!(res <= 1e-10 * scale + 1e-300) && !(res <= 1e-14)) {
        throw NumericalError(cat_str("solve residual ", res, " exceeds tolerance"));
    }
    return x;
}

inline Eigen::VectorXd solve(const TimeSystem &sys) {
    return solve_system(sys.A, sys.b);
}

/// Jacobi iteration (cross-check for strictly row-dominant systems).
inline Eigen::VectorXd jacobi_solve(const Eigen::MatrixXd &A, const Eigen::VectorXd &b, int max_iterations = 10000,
                                    double tol = 1e-14) {
    Eigen::VectorXd d = A.diagonal();
    if ((d.array() == 0).any()) {
        throw NumericalError("Jacobi iteration needs a nonzero diagonal");
    }
    Eigen::VectorXd x = b.cwiseQuotient(d);
    for (int it = 0; it < max_iterations; it++) {
        Eigen::VectorXd next = (b - A * x + d.cwiseProduct(x)).cwiseQuotient(d);
        double change = (next - x).cwiseAbs().maxCoeff();
        x = next;
        if (change <= tol * std::max(1.0, x.cwiseAbs().maxCoeff())) {
            return x;
        }
    }
    throw NumericalError("Jacobi iteration did not converge");
}

struct VarahBounds {
    double inf_norm = std::numeric_limits<double>::infinity();  // bound on ||A^{-1}||_{inf->inf}
    double one_norm = std::numeric_limits<double>::infinity();  // bound on ||A^{-1}||_{1->1}
};

/// 1 / min_i(|A_ii| - sum_{j != i} |A_ij|) for rows, and the column analogue; +inf when not
/// strictly dominant.
inline VarahBounds varah_bound(const Eigen::MatrixXd &A) {
    VarahBounds v;
    double row_gap = std::numeric_limits<double>::infinity(), col_gap = row_gap;
    for (Eigen::Index i = 0; i < A.rows(); i++) {
        row_gap = std::min(row_gap, 2 * std::abs(A(i, i)) - A.row(i).cwiseAbs().sum());
        col_gap = std::min(col_gap, 2 * std::abs(A(i, i)) - A.col(i).cwiseAbs().sum());
    }
    if (row_gap > 0) {
        v.inf_norm = 1 / row_gap;
    }
    if (col_gap > 0) {
        v.one_norm = 1 / col_gap;
    }
    return v;
}

/// |A_ii| >= diag_min and |A_ii| >= gap + off-diagonal sum, for both rows and columns.
inline bool check_dominance(const Eigen::MatrixXd &A, double diag_min = 0.75, double gap = 0.5) {
    for (Eigen::Index i = 0; i < A.rows(); i++) {
        double d = std::abs(A(i, i));
        double row = A.row(i).cwiseAbs().sum() - d;
        double col = A.col(i).cwiseAbs().sum() - d;
        if (d < diag_min || d < gap + row || d < gap + col) {
            return false;
        }
    }
    return true;
}

/// Pinned constant: perturbation_bound(s, zeta, 1) <= C_PERT s zeta whenever zeta <= 1/(20 s).
constexpr double DEFAULT_C_PERT = 7.5;

/// Bound on ||(A+B)^{-1} b' - A^{-1} b||_inf for A with Varah bound 2 (the dominance thresholds),
/// B with at most s entries of size <= zeta per row and ||b' - b||_inf <= zeta:
///   ||A^{-1}|| / (1 - ||A^{-1}|| s zeta) * (zeta + s zeta ||A^{-1}|| ||b||),  ||A^{-1}|| <= 2.
/// Returns +inf when 2 s zeta >= 1 (the geometric series diverges).
inline double perturbation_bound(int s, double zeta, double b_norm = 1.0, double inverse_norm = 2.0) {
    if (s < 0 || zeta < 0) {
        throw ValueError("perturbation_bound requires s, zeta >= 0");
    }
    double q = inverse_norm * s * zeta;
    if (q >= 1) {
        return std::numeric_limits<double>::infinity();
    }
    return inverse_norm / (1 - q) * (zeta + s * zeta * inverse_norm * b_norm);
}

/// Positions of dissipative unknowns grouped per site as (X, Y, Z).
inline std::map<size_t, std::array<long, 3>> dissipative_sites(const std::vector<CoeffIndex> &indices) {
    std::map<size_t, std::array<long, 3>> sites;
    for (size_t k = 0; k < indices.size(); k++) {
        if (!indices[k].is_hamiltonian()) {
            auto it = sites.try_emplace(indices[k].site, std::array<long, 3>{-1, -1, -1}).first;
            it->second[(size_t)indices[k].axis] = (long)k;
        }
    }
    return sites;
}

/// Block-diagonal Gamma = I on Hamiltonian unknowns, Gamma_j on each complete site triple.
inline Eigen::MatrixXd gamma_matrix(const std::vector<CoeffIndex> &indices, GammaDirection dir) {
    const auto N = (Eigen::Index)indices.size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(N, N);
    for (const auto &[site, pos] : dissipative_sites(indices)) {
        if (pos[0] < 0 || pos[1] < 0 || pos[2] < 0) {
            throw ValueError(cat_str("site ", site, " lacks a complete set of dissipative unknowns"));
        }
        for (size_t a = 0; a < 3; a++) {
            std::array<double, 3> e{0, 0, 0};
            e[a] = 1;
            auto col = gamma_rotation(e, dir);
            for (size_t r = 0; r < 3; r++) {
                G(pos[r], pos[a]) = col[r];
            }
        }
    }
    return G;
}

/// Physical unknowns (h, l) from the tilde-basis solution: l_j = Gamma_j theta~_j.
inline Eigen::VectorXd to_physical(const std::vector<CoeffIndex> &indices, const Eigen::VectorXd &x) {
    return gamma_matrix(indices, GammaDirection::forward) * x;
}

/// System matrix for physical unknowns: A~ Gamma^{-1}.
inline Eigen::MatrixXd physical_matrix(const TimeSystem &sys) {
    return sys.A * gamma_matrix(sys.indices, GammaDirection::inverse);
}

/// The similarity form Gamma^{-1} A~ Gamma (kept for comparison with the physical form).
inline Eigen::MatrixXd gamma_similarity(const TimeSystem &sys) {
    return gamma_matrix(sys.indices, GammaDirection::inverse) * sys.A *
           gamma_matrix(sys.indices, GammaDirection::forward);
}

inline double inf_norm(const Eigen::MatrixXd &A) {
    return A.rows() ? A.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

/// Per-node dump: index map, nonzero triplets, b, margin, s.
inline void dump_system(const TimeSystem &sys, std::ostream &out) {
    out << "t=" << fmt_double(sys.t) << " size=" << sys.indices.size() << " margin=" << fmt_double(sys.dominance_margin)
        << " s=" << sys.sparsity_s << "\n";
    for (size_t k = 0; k < sys.indices.size(); k++) {
        out << "index " << k << " " << sys.indices[k].str() << " b=" << fmt_double(sys.b[(Eigen::Index)k]) << "\n";
    }
    for (Eigen::Index i = 0; i < sys.A.rows(); i++) {
        for (Eigen::Index j = 0; j < sys.A.cols(); j++) {
            if (sys.A(i, j) != 0) {
                out << "A " << i << " " << j << " " << fmt_double(sys.A(i, j)) << "\n";
            }
        }
    }
}

}  // namespace tdl

#endif
