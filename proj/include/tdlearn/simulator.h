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

#ifndef TDLEARN_SIMULATOR_H
#define TDLEARN_SIMULATOR_H

#include <bit>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/dense.h"
#include "tdlearn/lindblad.h"
#include "tdlearn/ode.h"

namespace tdl {

// ---------------------------------------------------------------------------------------------
// Dense (matrix-on-matrix) evolution.
// ---------------------------------------------------------------------------------------------

/// Heisenberg evolution T(s,t)(O) at each of the sorted times (all >= s), solving dO/du = S(u)(O).
inline std::vector<DenseOperator> evolve_observable_at(const LindbladAnsatz &a, const DenseOperator &o, double s,
                                                       const std::vector<double> &times, OdeOptions opts = {}) {
    internal::check_generator_size(a, o);
    Dopri5<DenseOperator> ode(
        [&](double u, const DenseOperator &y, DenseOperator &dy) {
            dy.setZero();
            internal::add_generator(a, u, y, dy, +1);
        },
        opts);
    return ode.solve(s, o, times);
}

inline DenseOperator evolve_observable(const LindbladAnsatz &a, const DenseOperator &o, double s, double t,
                                       OdeOptions opts = {}) {
    if (t < s) {
        throw ValueError("evolve_observable requires s <= t");
    }
    return evolve_observable_at(a, o, s, {t}, opts)[0];
}

/// Schroedinger-picture dual T(s,t)^*(rho), defined by tr[T(s,t)(O) rho] = tr[O T(s,t)^*(rho)].
///
/// The dual of the time-ordered Heisenberg propagator applies the generators in reverse time
/// order, so it is integrated as d rho / d sigma = S^*(t - sigma)(rho) for sigma in [0, t - s].
inline DenseOperator evolve_state(const LindbladAnsatz &a, const DenseOperator &rho, double s, double t,
                                  OdeOptions opts = {}) {
    internal::check_generator_size(a, rho);
    if (t < s) {
        throw ValueError("evolve_state requires s <= t");
    }
    Dopri5<DenseOperator> ode(
        [&](double sigma, const DenseOperator &y, DenseOperator &dy) {
            dy.setZero();
            internal::add_generator(a, t - sigma, y, dy, -1);
        },
        opts);
    return ode.solve(0, rho, {t - s})[0];
}

/// Qubits on which O acts nontrivially (O fails to commute with X_q or Z_q).
inline std::vector<size_t> operator_support(const DenseOperator &o, double tol = 1e-12) {
    size_t n = qubits_of_dim(o.rows());
    double scale = std::max(1e-300, o.cwiseAbs().maxCoeff());
    std::vector<size_t> out;
    for (size_t q = 0; q < n; q++) {
        bool nontrivial = false;
        for (Axis ax : {Axis::X, Axis::Z}) {
            DenseOperator c = commutator_half(PauliString::single(n, q, ax), o);
            nontrivial |= c.cwiseAbs().maxCoeff() > tol * scale;
        }
        if (nontrivial) {
            out.push_back(q);
        }
    }
    return out;
}

namespace internal {

/// Splits a full basis index into (region index, environment index).
struct RegionIndexer {
    size_t n;
    std::vector<size_t> region;
    std::vector<size_t> env;

    RegionIndexer(size_t num_qubits, const std::vector<size_t> &reg) : n(num_qubits), region(reg) {
        std::vector<char> in(n, 0);
        for (size_t q : reg) {
            if (q >= n) {
                throw DimensionError("region vertex outside the system");
            }
            in[q] = 1;
        }
        for (size_t q = 0; q < n; q++) {
            if (!in[q]) {
                env.push_back(q);
            }
        }
    }

    uint64_t combine(uint64_t local, uint64_t outside) const {
        uint64_t full = 0;
        size_t kr = region.size(), ke = env.size();
        for (size_t r = 0; r < kr; r++) {
            if ((local >> (kr - 1 - r)) & 1) {
                full |= 1ULL << (n - 1 - region[r]);
            }
        }
        for (size_t e = 0; e < ke; e++) {
            if ((outside >> (ke - 1 - e)) & 1) {
                full |= 1ULL << (n - 1 - env[e]);
            }
        }
        return full;
    }
};

}  // namespace internal

/// O_R with O = O_R (x) I: the normalized partial trace over the complement of `region`.
inline DenseOperator reduce_to_region(const DenseOperator &o, const std::vector<size_t> &region) {
    size_t n = qubits_of_dim(o.rows());
    internal::RegionIndexer ix(n, region);
    uint64_t dr = 1ULL << region.size(), de = 1ULL << ix.env.size();
    DenseOperator out = DenseOperator::Zero((Eigen::Index)dr, (Eigen::Index)dr);
    for (uint64_t a = 0; a < dr; a++) {
        for (uint64_t b = 0; b < dr; b++) {
            cdouble acc = 0;
            for (uint64_t e = 0; e < de; e++) {
                acc += o((Eigen::Index)ix.combine(a, e), (Eigen::Index)ix.combine(b, e));
            }
            out((Eigen::Index)a, (Eigen::Index)b) = acc / (double)de;
        }
    }
    return out;
}

/// O_R (x) I on n qubits.
inline DenseOperator embed_operator(const DenseOperator &local, const std::vector<size_t> &region, size_t n,
                                    size_t dense_limit = DEFAULT_DENSE_LIMIT) {
    check_dense_limit(n, dense_limit);
    internal::RegionIndexer ix(n, region);
    uint64_t dr = 1ULL << region.size(), de = 1ULL << ix.env.size();
    if ((Eigen::Index)dr != local.rows()) {
        throw DimensionError("embed_operator: operator does not match region size");
    }
    Eigen::Index dim = (Eigen::Index)1 << n;
    DenseOperator out = DenseOperator::Zero(dim, dim);
    for (uint64_t e = 0; e < de; e++) {
        for (uint64_t a = 0; a < dr; a++) {
            for (uint64_t b = 0; b < dr; b++) {
                out((Eigen::Index)ix.combine(a, e), (Eigen::Index)ix.combine(b, e)) = local((Eigen::Index)a, (Eigen::Index)b);
            }
        }
    }
    return out;
}

/// Region-truncated evolution on the region alone: returns the |region|-qubit operator
/// T_{S_region}(s,t)(O_R) for each output time (O must be supported inside the region).
inline std::vector<DenseOperator> truncated_evolve_local(const LindbladAnsatz &a, const DenseOperator &o,
                                                         const std::vector<size_t> &region, double s,
                                                         const std::vector<double> &times, OdeOptions opts = {}) {
    internal::check_generator_size(a, o);
    std::vector<size_t> reg = region;
    std::sort(reg.begin(), reg.end());
    for (size_t q : operator_support(o)) {
        if (!std::binary_search(reg.begin(), reg.end(), q)) {
            throw ValueError(cat_str("region does not contain the support of O (qubit ", q, ")"));
        }
    }
    LindbladAnsatz sub = a.restrict_to(reg);
    return evolve_observable_at(sub, reduce_to_region(o, reg), s, times, opts);
}

/// Evolution under the sub-ansatz of terms contained in `region`, embedded back on n qubits.
inline DenseOperator truncated_evolve(const LindbladAnsatz &a, const DenseOperator &o,
                                      const std::vector<size_t> &region, double s, double t, OdeOptions opts = {}) {
    std::vector<size_t> reg = region;
    std::sort(reg.begin(), reg.end());
    auto local = truncated_evolve_local(a, o, reg, s, {t}, opts);
    return embed_operator(local[0], reg, a.n());
}

// ---------------------------------------------------------------------------------------------
// Pauli-basis evolution: O = sum_P v_P P with real v (Hermitian observables).
// ---------------------------------------------------------------------------------------------

/// The generator as a sparse real map on Pauli-coefficient vectors indexed by PauliString::index().
///
/// A Hamiltonian term sends P to +-h R with R = P_alpha P (when they anticommute); a dissipator
/// (j, A) scales P by -l when P_j is X, Y or Z but not A.
class PauliGenerator {
   public:
    static constexpr size_t MAX_QUBITS = 10;

    explicit PauliGenerator(const LindbladAnsatz &a) : n_(a.n()) {
        if (n_ > MAX_QUBITS) {
            throw LimitError(cat_str("Pauli-basis generator limited to ", MAX_QUBITS, " qubits"));
        }
        dim_ = (size_t)1 << (2 * n_);
        for (const auto &t : a.terms) {
            if (t.index.is_hamiltonian()) {
                Ham h;
                h.mask = t.index.alpha.index();
                h.f = t.f;
                uint64_t ax = h.mask & low_mask(), az = h.mask >> n_;
                int na = std::popcount(ax & az);
                h.sign.assign(dim_, 0);
                for (uint64_t i = 0; i < dim_; i++) {
                    uint64_t x = i & low_mask(), z = i >> n_;
                    if (!((std::popcount((ax & z) ^ (az & x))) & 1)) {
                        continue;
                    }
                    int e = na + std::popcount(x & z) + 2 * std::popcount(az & x) - std::popcount((ax ^ x) & (az ^ z));
                    e = ((e % 4) + 4) % 4;
                    // i * i^e with e odd: e = 1 -> -1, e = 3 -> +1.
                    h.sign[i] = e == 1 ? -1 : 1;
                }
                ham_.push_back(std::move(h));
            } else {
                Dis d;
                d.f = t.f;
                d.active.assign(dim_, 0);
                size_t j = t.index.site;
                bool ax = axis_x(t.index.axis), az = axis_z(t.index.axis);
                for (uint64_t i = 0; i < dim_; i++) {
                    bool x = (i >> j) & 1, z = (i >> (n_ + j)) & 1;
                    d.active[i] = (x || z) && !(x == ax && z == az);
                }
                dis_.push_back(std::move(d));
            }
        }
    }

    size_t n() const {
        return n_;
    }
    size_t dim() const {
        return dim_;
    }

    /// dv = S(t) v.
    void apply(double t, const Eigen::VectorXd &v, Eigen::VectorXd &dv) const {
        dv.setZero((Eigen::Index)dim_);
        for (const auto &h : ham_) {
            double c = h.f.eval(t);
            if (c == 0) {
                continue;
            }
            const int8_t *sg = h.sign.data();
            for (uint64_t i = 0; i < dim_; i++) {
                if (sg[i]) {
                    dv[(Eigen::Index)(i ^ h.mask)] += c * sg[i] * v[(Eigen::Index)i];
                }
            }
        }
        for (const auto &d : dis_) {
            double c = d.f.eval(t);
            if (c == 0) {
                continue;
            }
            const uint8_t *act = d.active.data();
            for (uint64_t i = 0; i < dim_; i++) {
                if (act[i]) {
                    dv[(Eigen::Index)i] -= c * v[(Eigen::Index)i];
                }
            }
        }
    }

    /// Dense matrix of S(t) in the Pauli basis (small n only).
    Eigen::MatrixXd matrix(double t) const {
        if (n_ > 5) {
            throw LimitError("PauliGenerator::matrix is limited to 5 qubits");
        }
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero((Eigen::Index)dim_, (Eigen::Index)dim_);
        Eigen::VectorXd e = Eigen::VectorXd::Zero((Eigen::Index)dim_), col;
        for (size_t i = 0; i < dim_; i++) {
            e.setZero();
            e[(Eigen::Index)i] = 1;
            apply(t, e, col);
            g.col((Eigen::Index)i) = col;
        }
        return g;
    }

    Eigen::VectorXd basis_vector(const PauliString &p) const {
        if (p.n != n_) {
            throw DimensionError("basis_vector: Pauli length mismatch");
        }
        Eigen::VectorXd v = Eigen::VectorXd::Zero((Eigen::Index)dim_);
        v[(Eigen::Index)p.index()] = 1;
        return v;
    }

    /// T(s, t)(v) at each sorted output time.
    void evolve(const Eigen::VectorXd &v0, double s, const std::vector<double> &times,
                const std::function<void(size_t, const Eigen::VectorXd &)> &emit, OdeOptions opts = {}) const {
        Dopri5<Eigen::VectorXd> ode([this](double u, const Eigen::VectorXd &y, Eigen::VectorXd &dy) { apply(u, y, dy); },
                                    opts);
        ode.run(s, v0, times, emit);
    }

    std::vector<Eigen::VectorXd> evolve(const Eigen::VectorXd &v0, double s, const std::vector<double> &times,
                                        OdeOptions opts = {}) const {
        std::vector<Eigen::VectorXd> out(times.size());
        evolve(v0, s, times, [&](size_t k, const Eigen::VectorXd &y) { out[k] = y; }, opts);
        return out;
    }

   private:
    struct Ham {
        uint64_t mask = 0;
        PolySchedule f;
        std::vector<int8_t> sign;
    };
    struct Dis {
        PolySchedule f;
        std::vector<uint8_t> active;
    };

    uint64_t low_mask() const {
        return n_ == 0 ? 0 : ((1ULL << n_) - 1);
    }

    size_t n_ = 0;
    size_t dim_ = 1;
    std::vector<Ham> ham_;
    std::vector<Dis> dis_;
};

/// Pauli coefficients of a dense operator as a complex vector (index = PauliString::index()).
inline Eigen::VectorXcd pauli_vector(const DenseOperator &o) {
    auto c = pauli_decompose(o);
    return Eigen::Map<Eigen::VectorXcd>(c.data(), (Eigen::Index)c.size());
}

/// Dense operator sum_P c_P P from complex Pauli coefficients.
inline DenseOperator dense_from_pauli_vector(size_t n, const Eigen::VectorXcd &c) {
    Eigen::Index dim = (Eigen::Index)1 << n;
    DenseOperator out = DenseOperator::Zero(dim, dim);
    for (Eigen::Index idx = 0; idx < c.size(); idx++) {
        if (c[idx] == cdouble(0)) {
            continue;
        }
        BasisMasks m = basis_masks(PauliString::from_index(n, (uint64_t)idx));
        cdouble base = apply_phase((uint8_t)(m.ny & 3), c[idx]);
        for (Eigen::Index col = 0; col < dim; col++) {
            out((Eigen::Index)((uint64_t)col ^ m.xm), col) += base * parity_sign(m.zm & (uint64_t)col);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Dyson series.
// ---------------------------------------------------------------------------------------------

/// (M dt)^{K+1} / (K+1)!, the remainder bound of the K-th order Dyson truncation.
inline double dyson_tail(double M, double dt, int K) {
    if (M < 0 || dt < 0 || K < 0) {
        throw ValueError("dyson_tail requires M, dt, K >= 0");
    }
    double x = M * dt;
    if (x == 0) {
        return 0;
    }
    return std::exp((K + 1) * std::log(x) - std::lgamma(K + 2.0));
}

/// Smallest K with dyson_tail(M, dt, K) <= eps.
inline int dyson_order(double M, double dt, double eps, int K_cap = 100000) {
    for (int K = 0; K <= K_cap; K++) {
        if (dyson_tail(M, dt, K) <= eps) {
            return K;
        }
    }
    throw LimitError("dyson_order: no order reaches the requested tail");
}

struct DysonSuperoperators {
    Eigen::MatrixXd exact;                 // T(0, t) in the Pauli basis
    std::vector<Eigen::MatrixXd> partial;  // partial[K] = D_K(t), K = 0..K_max
};

/// T(0,t) and the truncated Dyson sums D_K = sum_{j<=K} Y_j with Y_0 = id and
/// Y_j(u) = int_0^u S(r) Y_{j-1}(r) dr, integrated jointly as a coupled linear ODE.
inline DysonSuperoperators dyson_superoperators(const LindbladAnsatz &a, double t, int K_max, double tol = 1e-12) {
    PauliGenerator gen(a);
    Eigen::Index d = (Eigen::Index)gen.dim();
    Eigen::MatrixXd y0 = Eigen::MatrixXd::Zero(d, d * (K_max + 1));
    y0.leftCols(d).setIdentity();
    OdeOptions opts;
    opts.tol = tol;
    Dopri5<Eigen::MatrixXd> ode(
        [&](double u, const Eigen::MatrixXd &y, Eigen::MatrixXd &dy) {
            Eigen::MatrixXd g = gen.matrix(u);
            dy.setZero(d, d * (K_max + 1));
            dy.leftCols(d) = g * y.leftCols(d);
            for (int j = 1; j <= K_max; j++) {
                if (j == 1) {
                    dy.middleCols(d * j, d) = g;
                } else {
                    dy.middleCols(d * j, d) = g * y.middleCols(d * (j - 1), d);
                }
            }
        },
        opts);
    Eigen::MatrixXd y = ode.solve(0, y0, {t})[0];
    DysonSuperoperators out;
    out.exact = y.leftCols(d);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(d, d);
    out.partial.push_back(acc);
    for (int j = 1; j <= K_max; j++) {
        acc += y.middleCols(d * j, d);
        out.partial.push_back(acc);
    }
    return out;
}

/// Estimate of ||Phi||_{inf -> inf} for a map given by its real Pauli-basis matrix R
/// (R_{QP} = 2^{-n} tr[Q Phi(P)]), by multi-start ascent over unitaries:
/// O <- polar factor of Phi^dagger(u v^dagger), with (u, v) the top singular pair of Phi(O).
/// Every iterate is feasible, so the result is a certified lower bound that is tight in practice.
inline double superoperator_norm_inf(const Eigen::MatrixXd &R, size_t n, Rng &rng, int random_starts = 8,
                                     int iterations = 200) {
    Eigen::Index d = (Eigen::Index)1 << n;
    if (R.rows() != d * d || R.cols() != d * d) {
        throw DimensionError("superoperator_norm_inf: matrix is not 4^n x 4^n");
    }
    auto apply = [&](const DenseOperator &o, bool adjoint) {
        Eigen::VectorXcd c = pauli_vector(o);
        Eigen::VectorXcd r = adjoint ? Eigen::VectorXcd(R.transpose().cast<cdouble>() * c)
                                     : Eigen::VectorXcd(R.cast<cdouble>() * c);
        return dense_from_pauli_vector(n, r);
    };
    std::vector<DenseOperator> starts;
    for (uint64_t idx = 0; idx < (uint64_t)(d * d); idx++) {
        starts.push_back(to_dense(PauliString::from_index(n, idx)));
    }
    for (int k = 0; k < random_starts; k++) {
        DenseOperator g(d, d);
        for (Eigen::Index i = 0; i < d; i++) {
            for (Eigen::Index j = 0; j < d; j++) {
                g(i, j) = {rng.normal(), rng.normal()};
            }
        }
        Eigen::HouseholderQR<DenseOperator> qr(g);
        starts.push_back(qr.householderQ() * DenseOperator::Identity(d, d));
    }
    double best = 0;
    for (DenseOperator o : starts) {
        double prev = -1;
        for (int it = 0; it < iterations; it++) {
            DenseOperator x = apply(o, false);
            Eigen::JacobiSVD<DenseOperator> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
            double val = svd.singularValues()(0);
            best = std::max(best, val);
            if (val <= prev + 1e-13) {
                break;
            }
            prev = val;
            DenseOperator uv = svd.matrixU().col(0) * svd.matrixV().col(0).adjoint();
            DenseOperator m = apply(uv, true);
            Eigen::JacobiSVD<DenseOperator> polar(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
            o = polar.matrixU() * polar.matrixV().adjoint();
        }
    }
    return best;
}

// ---------------------------------------------------------------------------------------------
// Lieb-Robinson bounds.
// ---------------------------------------------------------------------------------------------

enum class LRSource { formula, calibrated };

struct LRParams {
    LRSource source = LRSource::calibrated;
    // calibrated form C3 e^{-mu r} (e^{v dt} - 1)
    double v = 1;
    double mu = 1;
    double C3 = 1;
    // explicit form
    double C = 1;
    double C1 = 3;
    int k = 2;
    int D = 1;
};

/// Truncation-error bound for an observable whose support has radius r_A, truncated to its
/// r-enlargement, after time dt.
///  - calibrated: C3 e^{-mu r} (e^{v dt} - 1)
///  - formula:    C 4^{C1 k^D} (r + r_A + k)^{2D-1} [a dt]^{r+1} / (r+1)! e^{a dt},  a = 2 C1 k^D 4^{C1 k^D}
inline double lr_bound(const LRParams &p, int r, double dt, int r_A = 0) {
    if (r < 0 || dt < 0) {
        throw ValueError("lr_bound requires r, dt >= 0");
    }
    if (dt == 0) {
        return 0;
    }
    if (p.source == LRSource::calibrated) {
        return p.C3 * std::exp(-p.mu * r) * std::expm1(p.v * dt);
    }
    double kd = p.C1 * std::pow((double)p.k, p.D);
    double log4 = kd * std::log(4.0);
    double a_log = std::log(2 * kd) + log4;  // log a
    double lg = std::log(p.C) + log4 + (2 * p.D - 1) * std::log((double)(r + r_A + p.k)) +
                (r + 1) * (a_log + std::log(dt)) - std::lgamma(r + 2.0) + std::exp(a_log) * dt;
    if (lg > 700) {
        return std::numeric_limits<double>::infinity();
    }
    return std::exp(lg);
}

struct LRRadius {
    int radius = 0;
    bool capped = false;
    double bound = 0;
};

/// Smallest r in [0, r_cap] with lr_bound <= eps; r_cap (flagged) when none qualifies.
inline LRRadius lr_radius(const LRParams &p, double eps, double dt, int r_A, int r_cap) {
    if (!(eps > 0)) {
        throw ValueError("lr_radius requires eps > 0");
    }
    for (int r = 0; r <= r_cap; r++) {
        double b = lr_bound(p, r, dt, r_A);
        if (b <= eps) {
            return {r, false, b};
        }
    }
    return {r_cap, true, lr_bound(p, r_cap, dt, r_A)};
}

struct LRSample {
    int r = 0;
    double t = 0;
    double err = 0;
};

/// Measured truncation errors ||T(0,t)(P) - T_{S(r)}(0,t)(P)||_inf for P a Pauli observable,
/// S(r) = enlarge(supp P, r), over the given radii and times (dense simulation).
inline std::vector<LRSample> lr_truncation_sweep(const LindbladAnsatz &a, const PauliString &p,
                                                 const std::vector<int> &radii, const std::vector<double> &times,
                                                 OdeOptions opts = {}) {
    DenseOperator o = to_dense(p);
    auto full = evolve_observable_at(a, o, 0, times, opts);
    std::vector<LRSample> out;
    for (int r : radii) {
        std::vector<size_t> region = a.graph.enlarge(p.support(), r);
        auto local = truncated_evolve_local(a, o, region, 0, times, opts);
        for (size_t k = 0; k < times.size(); k++) {
            DenseOperator diff = full[k] - embed_operator(local[k], region, a.n());
            out.push_back({r, times[k], spectral_norm(diff)});
        }
    }
    return out;
}

/// Fits calibrated LR constants (C3, mu, v) so that C3 e^{-mu r}(e^{v t} - 1) bounds every sample:
/// for each v on a grid, (log C3, mu) come from least squares on log err - log(e^{vt}-1), then log C3
/// is raised until all samples are covered; the v with the smallest overall bound wins and the
/// prefactor is multiplied by `safety`.
inline LRParams calibrate_lr(const std::vector<LRSample> &samples, double safety = 2.0) {
    LRParams best;
    best.source = LRSource::calibrated;
    std::vector<LRSample> pts;
    for (const auto &s : samples) {
        if (s.err > 1e-13 && s.t > 0) {
            pts.push_back(s);
        }
    }
    if (pts.empty()) {
        best.C3 = 1e-12;
        best.mu = 1;
        best.v = 1;
        return best;
    }
    double best_score = std::numeric_limits<double>::infinity();
    for (int gv = 0; gv <= 200; gv++) {
        double v = 0.05 * std::pow(10.0, gv * 3.0 / 200);  // 0.05 .. 50
        // Least squares for y = c - mu r.
        double sr = 0, sy = 0, srr = 0, sry = 0;
        for (const auto &p : pts) {
            double y = std::log(p.err) - std::log(std::expm1(v * p.t));
            sr += p.r;
            sy += y;
            srr += (double)p.r * p.r;
            sry += p.r * y;
        }
        double np = (double)pts.size();
        double det = np * srr - sr * sr;
        double mu = det > 0 ? -(np * sry - sr * sy) / det : 0.0;
        mu = std::max(mu, 1e-3);
        double c = -std::numeric_limits<double>::infinity();
        for (const auto &p : pts) {
            double y = std::log(p.err) - std::log(std::expm1(v * p.t));
            c = std::max(c, y + mu * p.r);
        }
        double score = 0;
        for (const auto &p : pts) {
            score += c - mu * p.r + std::log(std::expm1(v * p.t)) - std::log(p.err);
        }
        if (score < best_score) {
            best_score = score;
            best.v = v;
            best.mu = mu;
            best.C3 = std::exp(c) * safety;
        }
    }
    return best;
}

struct ComparisonParams {
    double C = 1;
    double mu_prime = 1;
    int D = 1;
};

/// C tau ||O|| max(r_A, 1)^{2D-1} (e^{mu' dt} - 1): deviation between two dynamics whose
/// generators differ by a perturbation of strength tau.
inline double comparison_bound(double tau, int r_A, double dt, const ComparisonParams &p, double op_norm = 1) {
    if (tau < 0 || dt < 0) {
        throw ValueError("comparison_bound requires tau, dt >= 0");
    }
    return p.C * tau * op_norm * std::pow(std::max(r_A, 1), 2 * p.D - 1) * std::expm1(p.mu_prime * dt);
}

}  // namespace tdl

#endif
