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

#ifndef TDLEARN_DENSE_H
#define TDLEARN_DENSE_H

#include <bit>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/pauli.h"

namespace tdl {

using cdouble = std::complex<double>;

/// A 2^n x 2^n complex matrix. Qubit j of a Pauli string acts on bit (n-1-j) of the basis
/// index, so qubit 0 is the most significant bit (the usual Kronecker-product order).
using DenseOperator = Eigen::MatrixXcd;

constexpr size_t DEFAULT_DENSE_LIMIT = 12;

/// Basis-index masks of a Pauli string: P|c> = i^{ny} (-1)^{|zm & c|} |c ^ xm>.
struct BasisMasks {
    uint64_t xm = 0;
    uint64_t zm = 0;
    int ny = 0;
};

inline BasisMasks basis_masks(const PauliString &p) {
    if (p.n > 63) {
        throw LimitError("basis_masks: too many qubits for a dense basis");
    }
    BasisMasks m;
    for (size_t q = 0; q < p.n; q++) {
        uint64_t bit = 1ULL << (p.n - 1 - q);
        if (p.x(q)) {
            m.xm |= bit;
        }
        if (p.z(q)) {
            m.zm |= bit;
        }
    }
    m.ny = std::popcount(m.xm & m.zm);
    return m;
}

inline double parity_sign(uint64_t v) {
    return (std::popcount(v) & 1) ? -1.0 : 1.0;
}

inline size_t qubits_of_dim(Eigen::Index dim) {
    size_t n = 0;
    while (((Eigen::Index)1 << n) < dim) {
        n++;
    }
    if (((Eigen::Index)1 << n) != dim) {
        throw DimensionError(cat_str("dimension ", dim, " is not a power of two"));
    }
    return n;
}

inline void check_dense_limit(size_t n, size_t limit) {
    if (n > limit) {
        throw LimitError(cat_str("dense limit exceeded: ", n, " qubits > limit ", limit));
    }
}

inline void check_operator_size(const PauliString &p, const DenseOperator &op) {
    if (op.rows() != op.cols() || op.rows() != ((Eigen::Index)1 << p.n)) {
        throw DimensionError(cat_str("operator of size ", op.rows(), "x", op.cols(), " does not match ", p.n,
                                     "-qubit Pauli"));
    }
}

inline DenseOperator to_dense(const PhasedPauli &p, size_t dense_limit = DEFAULT_DENSE_LIMIT) {
    check_dense_limit(p.pauli.n, dense_limit);
    Eigen::Index dim = (Eigen::Index)1 << p.pauli.n;
    BasisMasks m = basis_masks(p.pauli);
    cdouble base = apply_phase((uint8_t)((p.phase + m.ny) & 3), cdouble(1, 0));
    DenseOperator out = DenseOperator::Zero(dim, dim);
    for (Eigen::Index c = 0; c < dim; c++) {
        out((Eigen::Index)((uint64_t)c ^ m.xm), c) = base * parity_sign(m.zm & (uint64_t)c);
    }
    return out;
}

inline DenseOperator to_dense(const PauliString &p, size_t dense_limit = DEFAULT_DENSE_LIMIT) {
    return to_dense(PhasedPauli{0, p}, dense_limit);
}

/// out += coef * P O.
inline void add_pauli_left(cdouble coef, const PauliString &p, const DenseOperator &o, DenseOperator &out) {
    BasisMasks m = basis_masks(p);
    cdouble f = apply_phase((uint8_t)(m.ny & 3), coef);
    Eigen::Index dim = o.rows();
    for (Eigen::Index c = 0; c < dim; c++) {
        for (Eigen::Index r = 0; r < dim; r++) {
            uint64_t k = (uint64_t)r ^ m.xm;
            out(r, c) += f * parity_sign(m.zm & k) * o((Eigen::Index)k, c);
        }
    }
}

/// out += coef * O P.
inline void add_pauli_right(cdouble coef, const DenseOperator &o, const PauliString &p, DenseOperator &out) {
    BasisMasks m = basis_masks(p);
    cdouble f = apply_phase((uint8_t)(m.ny & 3), coef);
    Eigen::Index dim = o.rows();
    for (Eigen::Index c = 0; c < dim; c++) {
        cdouble g = f * parity_sign(m.zm & (uint64_t)c);
        Eigen::Index src = (Eigen::Index)((uint64_t)c ^ m.xm);
        for (Eigen::Index r = 0; r < dim; r++) {
            out(r, c) += g * o(r, src);
        }
    }
}

/// out += coef * (1/2)[P, O].
///
/// Entry-wise: (PO)_{r,c} = i^{ny} s(r^x) O_{r^x,c} and (OP)_{r,c} = i^{ny} s(c) O_{r,c^x} with
/// s(v) = (-1)^{|z & v|}. Both terms read the same column block, so one pass suffices.
inline void add_commutator_half(cdouble coef, const PauliString &p, const DenseOperator &o, DenseOperator &out) {
    BasisMasks m = basis_masks(p);
    cdouble f = 0.5 * apply_phase((uint8_t)(m.ny & 3), coef);
    Eigen::Index dim = o.rows();
    const uint64_t xm = m.xm, zm = m.zm;
    for (Eigen::Index c = 0; c < dim; c++) {
        double sc = parity_sign(zm & (uint64_t)c);
        Eigen::Index cx = (Eigen::Index)((uint64_t)c ^ xm);
        for (Eigen::Index r = 0; r < dim; r++) {
            uint64_t rx = (uint64_t)r ^ xm;
            cdouble left = parity_sign(zm & rx) * o((Eigen::Index)rx, c);
            cdouble right = sc * o(r, cx);
            out(r, c) += f * (left - right);
        }
    }
}

/// out += coef * (1/2)(P O P - O), the single-Pauli dephasing dissipator (P Hermitian).
inline void add_dissipator(double coef, const PauliString &p, const DenseOperator &o, DenseOperator &out) {
    BasisMasks m = basis_masks(p);
    double phase = (m.ny & 1) ? -1.0 : 1.0;  // i^{2 ny}
    Eigen::Index dim = o.rows();
    const uint64_t xm = m.xm, zm = m.zm;
    double h = 0.5 * coef;
    for (Eigen::Index c = 0; c < dim; c++) {
        uint64_t cx = (uint64_t)c ^ xm;
        double sc = parity_sign(zm & (uint64_t)c);
        for (Eigen::Index r = 0; r < dim; r++) {
            uint64_t rx = (uint64_t)r ^ xm;
            double s = phase * sc * parity_sign(zm & rx);
            out(r, c) += h * (s * o((Eigen::Index)rx, (Eigen::Index)cx) - o(r, c));
        }
    }
}

inline DenseOperator commutator_half(const PauliString &p, const DenseOperator &o) {
    check_operator_size(p, o);
    DenseOperator out = DenseOperator::Zero(o.rows(), o.cols());
    add_commutator_half(1.0, p, o, out);
    return out;
}

/// 2^{-n} tr[P O].
inline cdouble pauli_overlap(const PauliString &p, const DenseOperator &o) {
    check_operator_size(p, o);
    BasisMasks m = basis_masks(p);
    cdouble acc = 0;
    Eigen::Index dim = o.rows();
    for (Eigen::Index c = 0; c < dim; c++) {
        uint64_t k = (uint64_t)c ^ m.xm;
        acc += parity_sign(m.zm & k) * o((Eigen::Index)k, c);
    }
    return apply_phase((uint8_t)(m.ny & 3), acc) / (double)dim;
}

/// Pauli coefficients c_P = 2^{-n} tr[P O] for every P, indexed by PauliString::index().
inline std::vector<cdouble> pauli_decompose(const DenseOperator &o) {
    size_t n = qubits_of_dim(o.rows());
    size_t total = (size_t)1 << (2 * n);
    std::vector<cdouble> out(total);
    for (size_t idx = 0; idx < total; idx++) {
        out[idx] = pauli_overlap(PauliString::from_index(n, idx), o);
    }
    return out;
}

/// Inverse of pauli_decompose for real coefficient vectors (Hermitian operators).
inline DenseOperator from_pauli_coeffs(size_t n, const std::vector<double> &coeffs) {
    size_t total = (size_t)1 << (2 * n);
    if (coeffs.size() != total) {
        throw DimensionError("from_pauli_coeffs: coefficient count is not 4^n");
    }
    Eigen::Index dim = (Eigen::Index)1 << n;
    DenseOperator out = DenseOperator::Zero(dim, dim);
    for (size_t idx = 0; idx < total; idx++) {
        if (coeffs[idx] == 0) {
            continue;
        }
        BasisMasks m = basis_masks(PauliString::from_index(n, idx));
        cdouble base = apply_phase((uint8_t)(m.ny & 3), cdouble(coeffs[idx], 0));
        for (Eigen::Index c = 0; c < dim; c++) {
            out((Eigen::Index)((uint64_t)c ^ m.xm), c) += base * parity_sign(m.zm & (uint64_t)c);
        }
    }
    return out;
}

inline bool is_hermitian(const DenseOperator &o, double tol = 1e-12) {
    return (o - o.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Operator (spectral) norm ||O||_inf. Hermitian inputs use the symmetric eigensolver.
inline double spectral_norm(const DenseOperator &o) {
    if (o.size() == 0) {
        return 0;
    }
    if (is_hermitian(o, 1e-13)) {
        DenseOperator h = 0.5 * (o + o.adjoint());
        Eigen::SelfAdjointEigenSolver<DenseOperator> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<DenseOperator> svd(o);
    return svd.singularValues()(0);
}

/// Trace norm ||O||_1.
inline double trace_norm(const DenseOperator &o) {
    if (is_hermitian(o, 1e-13)) {
        DenseOperator h = 0.5 * (o + o.adjoint());
        Eigen::SelfAdjointEigenSolver<DenseOperator> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().sum();
    }
    Eigen::JacobiSVD<DenseOperator> svd(o);
    return svd.singularValues().sum();
}

/// Product eigenstate (x) (I + s_j sigma_{b_j}) / 2 with signs s_j = +1 (bit 0) or -1 (bit 1).
inline DenseOperator product_eigenstate(const std::vector<Axis> &axes, const std::vector<uint8_t> &sign_bits) {
    DenseOperator rho = DenseOperator::Ones(1, 1);
    for (size_t q = 0; q < axes.size(); q++) {
        DenseOperator one = DenseOperator::Identity(2, 2) * 0.5;
        double s = sign_bits[q] ? -0.5 : 0.5;
        one += s * to_dense(PauliString::single(1, 0, axes[q]));
        DenseOperator next = DenseOperator::Zero(rho.rows() * 2, rho.cols() * 2);
        for (Eigen::Index i = 0; i < rho.rows(); i++) {
            for (Eigen::Index j = 0; j < rho.cols(); j++) {
                next.block(2 * i, 2 * j, 2, 2) = rho(i, j) * one;
            }
        }
        rho = next;
    }
    return rho;
}

/// Rewrites a Pauli string supported in `region` as a |region|-qubit string (region order).
inline PauliString restrict_to_region(const PauliString &p, const std::vector<size_t> &region) {
    PauliString out(region.size());
    size_t inside = 0;
    for (size_t r = 0; r < region.size(); r++) {
        out.set(r, p.x(region[r]), p.z(region[r]));
        inside += p.x(region[r]) || p.z(region[r]);
    }
    if (inside != p.weight()) {
        throw ValueError(cat_str("Pauli ", p.str(), " is not supported inside the region"));
    }
    return out;
}

/// Inverse of restrict_to_region.
inline PauliString embed_from_region(const PauliString &local, const std::vector<size_t> &region, size_t n) {
    PauliString out(n);
    for (size_t r = 0; r < region.size(); r++) {
        out.set(region[r], local.x(r), local.z(r));
    }
    return out;
}

}  // namespace tdl

#endif
