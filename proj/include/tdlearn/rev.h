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

#ifndef TDLEARN_REV_H
#define TDLEARN_REV_H

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/overlaps.h"

namespace tdl {

constexpr size_t DEFAULT_REGION_CAP = 6;

/// Estimated channel on a region: ptm(out, in) ~ 2^{-n} tr[T(0,t)(P_in) P_out], with both Paulis
/// indexed by their region-local PauliString::index().
struct LocalChannelEstimate {
    std::vector<size_t> region;
    size_t n = 0;
    size_t time_index = 0;
    double t = 0;
    Eigen::MatrixXd ptm;
    double precision = 0;
};

/// Real Pauli coefficients <-> dense Hermitian operators on r qubits.
class RegionBasis {
   public:
    explicit RegionBasis(size_t r) : r_(r), dim_((Eigen::Index)1 << r), count_((size_t)1 << (2 * r)) {
        for (size_t idx = 0; idx < count_; idx++) {
            BasisMasks m = basis_masks(PauliString::from_index(r, idx));
            masks_.push_back(m);
        }
    }

    size_t qubits() const {
        return r_;
    }
    size_t count() const {
        return count_;
    }
    Eigen::Index dim() const {
        return dim_;
    }

    DenseOperator to_operator(const Eigen::VectorXd &c) const {
        DenseOperator out = DenseOperator::Zero(dim_, dim_);
        for (size_t idx = 0; idx < count_; idx++) {
            double v = c[(Eigen::Index)idx];
            if (v == 0) {
                continue;
            }
            const BasisMasks &m = masks_[idx];
            cdouble base = apply_phase((uint8_t)(m.ny & 3), cdouble(v, 0));
            for (Eigen::Index col = 0; col < dim_; col++) {
                out((Eigen::Index)((uint64_t)col ^ m.xm), col) += base * parity_sign(m.zm & (uint64_t)col);
            }
        }
        return out;
    }

    /// Real parts of 2^{-r} tr[P O].
    Eigen::VectorXd coefficients(const DenseOperator &o) const {
        Eigen::VectorXd c((Eigen::Index)count_);
        for (size_t idx = 0; idx < count_; idx++) {
            const BasisMasks &m = masks_[idx];
            cdouble acc = 0;
            for (Eigen::Index col = 0; col < dim_; col++) {
                uint64_t k = (uint64_t)col ^ m.xm;
                acc += parity_sign(m.zm & k) * o((Eigen::Index)k, col);
            }
            c[(Eigen::Index)idx] = apply_phase((uint8_t)(m.ny & 3), acc).real() / (double)dim_;
        }
        return c;
    }

   private:
    size_t r_;
    Eigen::Index dim_;
    size_t count_;
    std::vector<BasisMasks> masks_;
};

/// Overlap requests needed for the local channel on `region` at one time.
inline std::vector<OverlapRequest> local_channel_requests(size_t n, size_t time_index,
                                                          const std::vector<size_t> &region) {
    std::vector<OverlapRequest> reqs;
    auto local = paulis_on_region(region.size(), [&] {
        std::vector<size_t> all(region.size());
        for (size_t k = 0; k < all.size(); k++) {
            all[k] = k;
        }
        return all;
    }());
    for (const auto &out : local) {
        PauliString po = embed_from_region(out, region, n);
        for (const auto &in : local) {
            reqs.push_back({time_index, po, embed_from_region(in, region, n)});
        }
    }
    return reqs;
}

/// All pairwise overlaps of Paulis supported in `region` at times()[time_index]. With min_shots > 0
/// the source must have spent at least that many experiments (budget check).
inline LocalChannelEstimate estimate_local_channel(OverlapSource &src, size_t n, size_t time_index,
                                                   const std::vector<size_t> &region, double precision,
                                                   size_t region_cap = DEFAULT_REGION_CAP, double min_shots = 0) {
    if (region.size() > region_cap) {
        throw LimitError(cat_str("region of ", region.size(), " qubits exceeds the cap ", region_cap));
    }
    if (min_shots > 0 && src.shots_used() < min_shots) {
        throw ValueError(cat_str("insufficient snapshots: ", src.shots_used(), " available, ", min_shots,
                                 " required for precision ", precision));
    }
    LocalChannelEstimate est;
    est.region = region;
    est.n = n;
    est.time_index = time_index;
    est.t = src.times().at(time_index);
    est.precision = precision;
    auto reqs = local_channel_requests(n, time_index, region);
    src.prepare(reqs);
    const size_t count = (size_t)1 << (2 * region.size());
    est.ptm.resize((Eigen::Index)count, (Eigen::Index)count);
    for (const auto &r : reqs) {
        auto row = (Eigen::Index)restrict_to_region(r.prep, region).index();
        auto col = (Eigen::Index)restrict_to_region(r.meas, region).index();
        est.ptm(row, col) = src.overlap(time_index, r.prep, r.meas);
    }
    return est;
}

/// ||sum_P c_P P||_inf on r qubits by dense eigenvalues.
inline double spectral_norm(const Eigen::VectorXd &coeffs, size_t r, size_t region_cap = DEFAULT_REGION_CAP) {
    if (r > region_cap) {
        throw LimitError(cat_str("region of ", r, " qubits exceeds the cap ", region_cap));
    }
    if (coeffs.size() != (Eigen::Index)((size_t)1 << (2 * r))) {
        throw DimensionError("spectral_norm: coefficient count is not 4^r");
    }
    return spectral_norm(RegionBasis(r).to_operator(coeffs));
}

struct RevOptions {
    int max_iterations = 5000;
    /// Iterations of the smoothed stage before falling back to subgradient steps.
    double smooth_fraction = 0.8;
};

struct RevResult {
    Eigen::VectorXd coeffs;  // region-local Pauli coefficients of O
    double objective = 0;    // ||T^(O) - Q||_inf
    double lower_bound = 0;  // dual certificate: opt >= lower_bound
    double op_norm = 0;      // ||O||_inf
    int iterations = 0;
    bool converged = false;
};

/// Raised when neither the objective nor the duality gap reaches the tolerance; carries the best
/// feasible point found.
struct RevNonConvergence : NumericalError {
    RevResult best;
    RevNonConvergence(const std::string &msg, RevResult r) : NumericalError(msg), best(std::move(r)) {
    }
};

namespace internal {

struct RevProblem {
    const Eigen::MatrixXd &A;
    Eigen::VectorXd q;
    RegionBasis basis;
    double scale;  // 2^r

    RevProblem(const Eigen::MatrixXd &a, const Eigen::VectorXd &target, size_t r)
        : A(a), q(target), basis(r), scale((double)((size_t)1 << r)) {
    }

    Eigen::SelfAdjointEigenSolver<DenseOperator> residual_eig(const Eigen::VectorXd &c) const {
        DenseOperator m = basis.to_operator(A * c - q);
        return Eigen::SelfAdjointEigenSolver<DenseOperator>(0.5 * (m + m.adjoint()));
    }

    double objective(const Eigen::VectorXd &c) const {
        return residual_eig(c).eigenvalues().cwiseAbs().maxCoeff();
    }

    /// Euclidean projection (in Pauli coefficients, i.e. Hilbert-Schmidt) onto ||O|| <= 1.
    Eigen::VectorXd project(const Eigen::VectorXd &c, double *norm_out = nullptr) const {
        DenseOperator o = basis.to_operator(c);
        Eigen::SelfAdjointEigenSolver<DenseOperator> es(0.5 * (o + o.adjoint()));
        Eigen::VectorXd lam = es.eigenvalues();
        double norm = lam.cwiseAbs().maxCoeff();
        if (norm <= 1) {
            if (norm_out) {
                *norm_out = norm;
            }
            return c;
        }
        for (Eigen::Index i = 0; i < lam.size(); i++) {
            lam[i] = std::clamp(lam[i], -1.0, 1.0);
        }
        if (norm_out) {
            *norm_out = lam.cwiseAbs().maxCoeff();
        }
        DenseOperator clipped = es.eigenvectors() * lam.cast<cdouble>().asDiagonal() * es.eigenvectors().adjoint();
        return basis.coefficients(clipped);
    }

    /// Dual value -tr[Y Q] - ||T^dagger(Y)||_1 for Y scaled to unit trace norm (a lower bound on the
    /// optimum for any Hermitian Y != 0).
    double dual(const DenseOperator &y) const {
        double tn = trace_norm(y);
        if (!(tn > 0)) {
            return -std::numeric_limits<double>::infinity();
        }
        Eigen::VectorXd yc = basis.coefficients(y) / tn;
        Eigen::VectorXd back = A.transpose() * yc;
        double yq = scale * yc.dot(q);
        return -yq - trace_norm(basis.to_operator(back));
    }
};

}  // namespace internal

/// Approximately solves min ||T^(O) - Q||_inf subject to -I <= O <= I over Pauli coefficients on
/// the region. The iteration starts from the better of O = Q and the projected least-squares
/// inverse, runs an accelerated projected-gradient method on a log-sum-exp smoothing of the
/// spectral norm with decreasing smoothing, and finishes with projected subgradient steps a/sqrt(k).
/// Dual points from the smoothed gradients give a certified lower bound; the solve stops once the
/// objective or the gap is at most eps_sdp / 10.
inline RevResult rev(const LocalChannelEstimate &est, const PauliString &q_local, double eps_sdp,
                     const RevOptions &opts = {}) {
    const size_t r = est.region.size();
    if (q_local.n != r) {
        throw DimensionError("rev: target must be given on the region");
    }
    const auto count = (Eigen::Index)((size_t)1 << (2 * r));
    if (est.ptm.rows() != count || est.ptm.cols() != count) {
        throw DimensionError("rev: channel estimate has the wrong size");
    }
    if (!(eps_sdp > 0)) {
        throw ValueError("rev: eps_sdp must be positive");
    }
    Eigen::VectorXd q = Eigen::VectorXd::Zero(count);
    q[(Eigen::Index)q_local.index()] = 1;
    internal::RevProblem prob(est.ptm, q, r);
    const double tol = eps_sdp / 10;

    RevResult best;
    best.lower_bound = 0;
    auto consider = [&](const Eigen::VectorXd &c) {
        double f = prob.objective(c);
        if (best.coeffs.size() == 0 || f < best.objective) {
            best.coeffs = c;
            best.objective = f;
        }
    };
    auto done = [&] { return best.objective <= tol || best.objective - best.lower_bound <= tol; };
    auto dual_from_eig = [&](const Eigen::SelfAdjointEigenSolver<DenseOperator> &es) {
        // Rank-one and sign-matrix candidates from the current residual.
        const Eigen::VectorXd &lam = es.eigenvalues();
        Eigen::Index top = 0;
        lam.cwiseAbs().maxCoeff(&top);
        DenseOperator v = es.eigenvectors().col(top);
        double sgn = lam[top] >= 0 ? 1.0 : -1.0;
        best.lower_bound = std::max(best.lower_bound, prob.dual(sgn * v * v.adjoint()));
        Eigen::VectorXd s = lam.unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
        if (s.cwiseAbs().sum() > 0) {
            DenseOperator sm = es.eigenvectors() * s.cast<cdouble>().asDiagonal() * es.eigenvectors().adjoint();
            best.lower_bound = std::max(best.lower_bound, prob.dual(sm));
        }
    };

    consider(q);
    Eigen::VectorXd ls = est.ptm.colPivHouseholderQr().solve(q);
    if (ls.allFinite()) {
        consider(prob.project(ls));
    }
    dual_from_eig(prob.residual_eig(best.coeffs));

    int it = 0;
    const double log_terms = std::log(2.0 * (double)prob.basis.dim());
    const int smooth_cap = (int)(opts.smooth_fraction * opts.max_iterations);
    double mu = std::max(best.objective, eps_sdp) / (4 * log_terms);
    const double mu_min = tol / (4 * log_terms);
    Eigen::VectorXd x = best.coeffs, x_prev = x, y = x;
    double t_acc = 1, lip = 1 / mu;
    // Smoothed value and gradient of mu log tr[exp(M/mu) + exp(-M/mu)], M = T^(O) - Q.
    auto smoothed = [&](const Eigen::VectorXd &c, Eigen::VectorXd *grad) {
        auto es = prob.residual_eig(c);
        const Eigen::VectorXd &lam = es.eigenvalues();
        double lmax = lam.cwiseAbs().maxCoeff();
        Eigen::VectorXd wp(lam.size()), wm(lam.size());
        for (Eigen::Index i = 0; i < lam.size(); i++) {
            wp[i] = std::exp((lam[i] - lmax) / mu);
            wm[i] = std::exp((-lam[i] - lmax) / mu);
        }
        double z = wp.sum() + wm.sum();
        double value = lmax + mu * std::log(z);
        if (grad) {
            Eigen::VectorXd w = (wp - wm) / z;
            DenseOperator W = es.eigenvectors() * w.cast<cdouble>().asDiagonal() * es.eigenvectors().adjoint();
            best.lower_bound = std::max(best.lower_bound, prob.dual(W));
            *grad = prob.scale * (est.ptm.transpose() * prob.basis.coefficients(W));
        }
        return value;
    };
    int stage_it = 0;
    while (!done() && it < smooth_cap) {
        it++;
        stage_it++;
        Eigen::VectorXd g;
        double fy = smoothed(y, &g);
        Eigen::VectorXd x_new;
        for (int bt = 0; bt < 60; bt++) {
            x_new = prob.project(y - g / lip);
            Eigen::VectorXd d = x_new - y;
            if (smoothed(x_new, nullptr) <= fy + g.dot(d) + 0.5 * lip * d.squaredNorm() + 1e-15) {
                break;
            }
            lip *= 2;
        }
        consider(x_new);
        double t_next = 0.5 * (1 + std::sqrt(1 + 4 * t_acc * t_acc));
        x_prev = x;
        x = x_new;
        y = x + ((t_acc - 1) / t_next) * (x - x_prev);
        t_acc = t_next;
        lip *= 0.9;
        if (stage_it >= 40 && mu > mu_min) {
            // Continuation: shrink the smoothing and restart the momentum from the incumbent.
            mu = std::max(mu_min, mu * 0.3);
            lip = std::max(lip, 1 / mu);
            x = x_prev = y = best.coeffs;
            t_acc = 1;
            stage_it = 0;
        }
    }
    // Projected subgradient polish from the incumbent.
    Eigen::VectorXd c = best.coeffs;
    const double a0 = std::max(best.objective, eps_sdp) / std::max(1.0, est.ptm.norm());
    int k = 0;
    while (!done() && it < opts.max_iterations) {
        it++;
        k++;
        auto es = prob.residual_eig(c);
        dual_from_eig(es);
        const Eigen::VectorXd &lam = es.eigenvalues();
        Eigen::Index top = 0;
        lam.cwiseAbs().maxCoeff(&top);
        DenseOperator v = es.eigenvectors().col(top);
        double sgn = lam[top] >= 0 ? 1.0 : -1.0;
        Eigen::VectorXd g = prob.scale * (est.ptm.transpose() * prob.basis.coefficients(sgn * v * v.adjoint()));
        double gn = g.norm();
        if (!(gn > 0)) {
            break;
        }
        c = prob.project(c - (a0 / std::sqrt((double)k)) * g / gn);
        consider(c);
    }
    best.iterations = it;
    best.coeffs = prob.project(best.coeffs, &best.op_norm);
    best.objective = prob.objective(best.coeffs);
    best.lower_bound = std::min(best.lower_bound, best.objective);
    best.converged = done();
    if (!best.converged) {
        throw RevNonConvergence(cat_str("rev did not converge in ", it, " iterations: objective ", best.objective,
                                        ", lower bound ", best.lower_bound),
                                best);
    }
    return best;
}

}  // namespace tdl

#endif
