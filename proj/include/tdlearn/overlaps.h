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

#ifndef TDLEARN_OVERLAPS_H
#define TDLEARN_OVERLAPS_H

#include <algorithm>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

#include "tdlearn/shadows.h"

namespace tdl {

/// A request for the overlap 2^{-n} tr[T(0, t_k)(meas) prep].
struct OverlapRequest {
    size_t time_index = 0;
    PauliString prep;
    PauliString meas;
};

/// Real combination sum_k c_k P_k of Pauli strings.
using PauliSum = std::vector<std::pair<PauliString, double>>;

/// A request for the time series t -> 2^{-n} tr[T(0, t)(sum_k c_k P_k) prep].
struct SeriesRequest {
    PauliString prep;
    PauliSum meas;
};

/// Source of Pauli-pair overlaps at a fixed list of times. The learner only talks to this
/// interface, so the device (simulated truth, stored snapshots, ...) stays opaque to it.
class OverlapSource {
   public:
    virtual ~OverlapSource() = default;

    virtual const std::vector<double> &times() const = 0;

    /// Announces the pairs that will be queried; sources may batch the work here.
    virtual void prepare(const std::vector<OverlapRequest> &requests) = 0;

    /// Estimate of 2^{-n} tr[T(0, times()[k])(meas) prep].
    virtual double overlap(size_t time_index, const PauliString &prep, const PauliString &meas) const = 0;

    /// Experiments consumed so far (0 for exact sources).
    virtual double shots_used() const {
        return 0;
    }

    /// out[r][j] = sum_k c_k overlap(time_indices[j], prep_r, P_k). The generic version prepares
    /// one time at a time to bound memory; sources override it with batched forms.
    virtual std::vector<std::vector<double>> series(const std::vector<SeriesRequest> &requests,
                                                    const std::vector<size_t> &time_indices) {
        std::vector<std::vector<double>> out(requests.size(), std::vector<double>(time_indices.size(), 0.0));
        for (size_t j = 0; j < time_indices.size(); j++) {
            std::vector<OverlapRequest> reqs;
            for (const auto &r : requests) {
                for (const auto &[p, c] : r.meas) {
                    reqs.push_back({time_indices[j], r.prep, p});
                }
            }
            prepare(reqs);
            for (size_t r = 0; r < requests.size(); r++) {
                for (const auto &[p, c] : requests[r].meas) {
                    out[r][j] += c * overlap(time_indices[j], requests[r].prep, p);
                }
            }
        }
        return out;
    }
};

namespace internal {

inline uint64_t overlap_key(size_t time_index, const PauliString &prep, const PauliString &meas) {
    return ((uint64_t)time_index << 40) | ((uint64_t)prep.index() << 20) | (uint64_t)meas.index();
}

inline void check_overlap_request(size_t n, size_t ntimes, const OverlapRequest &r) {
    if (r.prep.n != n || r.meas.n != n) {
        throw DimensionError("overlap request: Pauli length differs from the system size");
    }
    if (r.time_index >= ntimes) {
        throw ValueError("overlap request: time index out of range");
    }
}

/// Sorted unique times with the permutation back to the caller's order.
inline std::vector<size_t> sorted_order(const std::vector<double> &times) {
    std::vector<size_t> order(times.size());
    for (size_t k = 0; k < order.size(); k++) {
        order[k] = k;
    }
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return times[a] < times[b]; });
    return order;
}

/// Positions j of `time_indices` ordered by times[time_indices[j]].
inline std::vector<size_t> sorted_order_of(const std::vector<double> &times, const std::vector<size_t> &time_indices) {
    std::vector<double> sel;
    for (size_t k : time_indices) {
        sel.push_back(times.at(k));
    }
    return sorted_order(sel);
}

}  // namespace internal

/// Exact overlaps from Pauli-basis integration of the true generator.
class OracleOverlaps : public OverlapSource {
   public:
    OracleOverlaps(const LindbladAnsatz &truth, std::vector<double> times, OdeOptions opts = {1e-12})
        : gen_(truth), times_(std::move(times)), opts_(opts) {
        for (double t : times_) {
            if (t < 0) {
                throw ValueError("OracleOverlaps: negative time");
            }
        }
    }

    const std::vector<double> &times() const override {
        return times_;
    }

    void prepare(const std::vector<OverlapRequest> &requests) override {
        // Group by measured Pauli: one evolution serves every (time, prep) pair that shares it.
        std::map<uint64_t, std::vector<const OverlapRequest *>> by_meas;
        for (const auto &r : requests) {
            internal::check_overlap_request(gen_.n(), times_.size(), r);
            if (!table_.count(internal::overlap_key(r.time_index, r.prep, r.meas))) {
                by_meas[r.meas.index()].push_back(&r);
            }
        }
        for (const auto &[mi, reqs] : by_meas) {
            // Integrate only through the times this measured Pauli is needed at.
            std::map<size_t, std::vector<const OverlapRequest *>> by_time;
            for (const auto *r : reqs) {
                by_time[r->time_index].push_back(r);
            }
            std::vector<size_t> idx;
            std::vector<std::vector<const OverlapRequest *>> at;
            for (auto &[k, rs] : by_time) {
                idx.push_back(k);
                at.push_back(std::move(rs));
            }
            std::vector<size_t> order = internal::sorted_order_of(times_, idx);
            std::vector<double> sorted;
            for (size_t j : order) {
                sorted.push_back(times_[idx[j]]);
            }
            gen_.evolve(
                gen_.basis_vector(reqs.front()->meas), 0, sorted,
                [&](size_t k, const Eigen::VectorXd &v) {
                    for (const auto *r : at[order[k]]) {
                        table_[internal::overlap_key(r->time_index, r->prep, r->meas)] =
                            v[(Eigen::Index)r->prep.index()];
                    }
                },
                opts_);
        }
    }

    /// One integration of the combined observable per request.
    std::vector<std::vector<double>> series(const std::vector<SeriesRequest> &requests,
                                            const std::vector<size_t> &time_indices) override {
        std::vector<size_t> order = internal::sorted_order_of(times_, time_indices);
        std::vector<double> sorted;
        for (size_t j : order) {
            sorted.push_back(times_.at(time_indices[j]));
        }
        std::vector<std::vector<double>> out(requests.size(), std::vector<double>(time_indices.size(), 0.0));
        for (size_t r = 0; r < requests.size(); r++) {
            Eigen::VectorXd v0 = Eigen::VectorXd::Zero((Eigen::Index)gen_.dim());
            for (const auto &[p, c] : requests[r].meas) {
                internal::check_overlap_request(gen_.n(), times_.size(), {0, requests[r].prep, p});
                v0[(Eigen::Index)p.index()] += c;
            }
            auto pi = (Eigen::Index)requests[r].prep.index();
            gen_.evolve(v0, 0, sorted, [&](size_t k, const Eigen::VectorXd &v) { out[r][order[k]] = v[pi]; }, opts_);
        }
        return out;
    }

    double overlap(size_t time_index, const PauliString &prep, const PauliString &meas) const override {
        auto it = table_.find(internal::overlap_key(time_index, prep, meas));
        if (it == table_.end()) {
            throw ValueError("OracleOverlaps: pair was not prepared");
        }
        return it->second;
    }

   private:
    PauliGenerator gen_;
    std::vector<double> times_;
    OdeOptions opts_;
    std::unordered_map<uint64_t, double> table_;
};

/// Median-of-means overlaps from a stored snapshot batch.
class SnapshotOverlaps : public OverlapSource {
   public:
    SnapshotOverlaps(ShadowBatch batch, size_t groups) : batch_(std::move(batch)), groups_(groups) {
    }

    const std::vector<double> &times() const override {
        return batch_.times;
    }

    void prepare(const std::vector<OverlapRequest> &requests) override {
        for (const auto &r : requests) {
            internal::check_overlap_request(batch_.n, batch_.times.size(), r);
            if (batch_.count(r.time_index) == 0) {
                throw ValueError(cat_str("no snapshots at time index ", r.time_index));
            }
        }
    }

    double overlap(size_t time_index, const PauliString &prep, const PauliString &meas) const override {
        return estimate_pair(batch_, time_index, prep, meas, groups_);
    }

    double shots_used() const override {
        return (double)batch_.snapshots.size();
    }

    /// Median of means of the per-snapshot combination sum_k c_k value(prep, P_k).
    std::vector<std::vector<double>> series(const std::vector<SeriesRequest> &requests,
                                            const std::vector<size_t> &time_indices) override {
        std::vector<std::vector<double>> out(requests.size(), std::vector<double>(time_indices.size(), 0.0));
        for (size_t j = 0; j < time_indices.size(); j++) {
            auto [lo, hi] = batch_.range(time_indices[j]);
            if (lo == hi) {
                throw ValueError(cat_str("no snapshots at time index ", time_indices[j]));
            }
            std::vector<double> vals(hi - lo);
            for (size_t r = 0; r < requests.size(); r++) {
                for (size_t i = lo; i < hi; i++) {
                    double acc = 0;
                    for (const auto &[p, c] : requests[r].meas) {
                        acc += c * snapshot_value(batch_.snapshots[i], requests[r].prep, p);
                    }
                    vals[i - lo] = acc;
                }
                out[r][j] = median_of_means(vals, groups_);
            }
        }
        return out;
    }

    const ShadowBatch &batch() const {
        return batch_;
    }

   private:
    ShadowBatch batch_;
    size_t groups_;
};

/// Sampled overlaps for small systems (n <= 3) without materialising snapshots.
///
/// At each time the exact distribution over the 6^n x 6^n (preparation, measurement) records is
/// computed from the Pauli transfer matrix. Each median-of-means group then draws its record
/// histogram: exactly (conditional binomials) for small groups, and through the Gaussian limit of
/// the multinomial for large ones. Group means of every Pauli pair follow from the histogram by
/// Walsh-Hadamard transforms, and the reported value is their median.
class HistogramOverlaps : public OverlapSource {
   public:
    static constexpr size_t MAX_QUBITS = 3;
    /// Groups larger than this use the Gaussian multinomial limit.
    static constexpr double EXACT_GROUP_LIMIT = 1e6;

    HistogramOverlaps(const LindbladAnsatz &truth, std::vector<double> times, std::vector<double> shots,
                      size_t groups, uint64_t seed, OdeOptions opts = {1e-12})
        : gen_(truth), times_(std::move(times)), shots_(std::move(shots)), groups_(std::max<size_t>(1, groups)),
          seed_(seed), opts_(opts) {
        if (gen_.n() > MAX_QUBITS) {
            throw LimitError(cat_str("HistogramOverlaps supports at most ", MAX_QUBITS, " qubits"));
        }
        if (shots_.size() != times_.size()) {
            throw ValueError("HistogramOverlaps: one shot count per time is required");
        }
        for (double s : shots_) {
            if (!(s >= (double)groups_)) {
                throw ValueError("HistogramOverlaps: every time needs at least one shot per group");
            }
        }
        tables_.resize(times_.size());
    }

    const std::vector<double> &times() const override {
        return times_;
    }

    void prepare(const std::vector<OverlapRequest> &requests) override {
        std::vector<uint8_t> need(times_.size(), 0);
        for (const auto &r : requests) {
            internal::check_overlap_request(gen_.n(), times_.size(), r);
            if (tables_[r.time_index].size() == 0) {
                need[r.time_index] = 1;
            }
        }
        std::vector<size_t> order = internal::sorted_order(times_);
        std::vector<double> sorted;
        std::vector<size_t> which;
        for (size_t k : order) {
            if (need[k]) {
                sorted.push_back(times_[k]);
                which.push_back(k);
            }
        }
        if (sorted.empty()) {
            return;
        }
        const auto d = (Eigen::Index)gen_.dim();
        Dopri5<Eigen::MatrixXd> ode(
            [&](double u, const Eigen::MatrixXd &y, Eigen::MatrixXd &dy) {
                dy.resize(d, d);
                Eigen::VectorXd col;
                for (Eigen::Index j = 0; j < d; j++) {
                    gen_.apply(u, y.col(j), col);
                    dy.col(j) = col;
                }
            },
            opts_);
        ode.run(0, Eigen::MatrixXd::Identity(d, d), sorted,
                [&](size_t k, const Eigen::MatrixXd &R) { tables_[which[k]] = simulate(which[k], R); });
    }

    double overlap(size_t time_index, const PauliString &prep, const PauliString &meas) const override {
        if (time_index >= tables_.size() || tables_[time_index].size() == 0) {
            throw ValueError("HistogramOverlaps: time was not prepared");
        }
        return tables_[time_index]((Eigen::Index)prep.index(), (Eigen::Index)meas.index());
    }

    /// Sums over the per-time median tables (each time is simulated once).
    std::vector<std::vector<double>> series(const std::vector<SeriesRequest> &requests,
                                            const std::vector<size_t> &time_indices) override {
        std::vector<OverlapRequest> marks;
        const PauliString id(gen_.n());
        for (size_t k : time_indices) {
            marks.push_back({k, id, id});
        }
        prepare(marks);
        std::vector<std::vector<double>> out(requests.size(), std::vector<double>(time_indices.size(), 0.0));
        for (size_t r = 0; r < requests.size(); r++) {
            for (const auto &[p, c] : requests[r].meas) {
                internal::check_overlap_request(gen_.n(), times_.size(), {0, requests[r].prep, p});
            }
            for (size_t j = 0; j < time_indices.size(); j++) {
                for (const auto &[p, c] : requests[r].meas) {
                    out[r][j] += c * overlap(time_indices[j], requests[r].prep, p);
                }
            }
        }
        return out;
    }

    double shots_used() const override {
        double total = 0;
        for (size_t k = 0; k < times_.size(); k++) {
            if (tables_[k].size()) {
                total += shots_[k];
            }
        }
        return total;
    }

    /// Exact probability table p[b1][b2][s1][s2] (settings uniform) for transfer matrix R with
    /// R(A, B) = 2^{-n} tr[A T(B)]. Exposed for tests.
    static std::vector<double> record_distribution(size_t n, const Eigen::MatrixXd &R) {
        const size_t nb = ipow(3, n), ns = (size_t)1 << n;
        std::vector<double> p(nb * nb * ns * ns);
        std::vector<double> sub(ns * ns);
        const double weight = 1.0 / (double)(nb * nb * ns) / (double)ns;
        for (size_t b1 = 0; b1 < nb; b1++) {
            for (size_t b2 = 0; b2 < nb; b2++) {
                for (size_t a = 0; a < ns; a++) {
                    for (size_t b = 0; b < ns; b++) {
                        sub[a * ns + b] = R((Eigen::Index)pauli_index(n, b1, a), (Eigen::Index)pauli_index(n, b2, b));
                    }
                }
                wht2(sub, n);
                for (size_t s = 0; s < ns * ns; s++) {
                    // p(s2 | b1, s1, b2) = 2^{-n} sum chi chi R; times P(b1) P(s1) P(b2).
                    p[((b1 * nb + b2) * ns * ns) + s] = std::max(0.0, sub[s]) * weight;
                }
            }
        }
        return p;
    }

    /// Pair table (prep index, meas index) of the single-record estimator averaged under the
    /// record frequencies `freq` (same layout as record_distribution).
    static Eigen::MatrixXd pair_table(size_t n, const std::vector<double> &freq) {
        const size_t nb = ipow(3, n), ns = (size_t)1 << n, np = (size_t)1 << (2 * n);
        Eigen::MatrixXd table = Eigen::MatrixXd::Zero((Eigen::Index)np, (Eigen::Index)np);
        std::vector<double> sub(ns * ns);
        std::vector<double> scale(ns * ns);
        for (size_t a = 0; a < ns; a++) {
            for (size_t b = 0; b < ns; b++) {
                scale[a * ns + b] = std::pow(3.0, std::popcount(a) + std::popcount(b));
            }
        }
        const std::vector<Eigen::Index> idx = index_table(n);
        for (size_t b1 = 0; b1 < nb; b1++) {
            const Eigen::Index *rows = &idx[b1 * ns];
            for (size_t b2 = 0; b2 < nb; b2++) {
                std::copy_n(freq.begin() + (long)((b1 * nb + b2) * ns * ns), ns * ns, sub.begin());
                wht2(sub, n);
                for (size_t b = 0; b < ns; b++) {
                    double *col = table.col(idx[b2 * ns + b]).data();
                    for (size_t a = 0; a < ns; a++) {
                        col[rows[a]] += scale[a * ns + b] * sub[a * ns + b];
                    }
                }
            }
        }
        return table;
    }

   private:
    static size_t ipow(size_t b, size_t e) {
        size_t r = 1;
        while (e--) {
            r *= b;
        }
        return r;
    }

    /// Pauli index of basis code `bcode` (base 3, qubit 0 most significant) restricted to subset `mask`.
    static uint64_t pauli_index(size_t n, size_t bcode, size_t mask) {
        uint64_t x = 0, z = 0;
        for (size_t q = n; q-- > 0;) {
            auto axis = (Axis)(bcode % 3);
            bcode /= 3;
            if ((mask >> q) & 1) {
                x |= (uint64_t)axis_x(axis) << q;
                z |= (uint64_t)axis_z(axis) << q;
            }
        }
        return x | (z << n);
    }

    /// pauli_index(n, b, a) for every basis code b and subset a, row-major in (b, a).
    static std::vector<Eigen::Index> index_table(size_t n) {
        const size_t nb = ipow(3, n), ns = (size_t)1 << n;
        std::vector<Eigen::Index> idx(nb * ns);
        for (size_t b = 0; b < nb; b++) {
            for (size_t a = 0; a < ns; a++) {
                idx[b * ns + a] = (Eigen::Index)pauli_index(n, b, a);
            }
        }
        return idx;
    }

    /// In-place 2D Walsh-Hadamard transform of an (2^n x 2^n) row-major table.
    static void wht2(std::vector<double> &t, size_t n) {
        const size_t ns = (size_t)1 << n;
        for (size_t h = 1; h < ns; h <<= 1) {
            for (size_t r = 0; r < ns; r++) {
                for (size_t i = 0; i < ns; i += 2 * h) {
                    for (size_t j = i; j < i + h; j++) {
                        double u = t[r * ns + j], v = t[r * ns + j + h];
                        t[r * ns + j] = u + v;
                        t[r * ns + j + h] = u - v;
                    }
                }
            }
            for (size_t c = 0; c < ns; c++) {
                for (size_t i = 0; i < ns; i += 2 * h) {
                    for (size_t j = i; j < i + h; j++) {
                        double u = t[j * ns + c], v = t[(j + h) * ns + c];
                        t[j * ns + c] = u + v;
                        t[(j + h) * ns + c] = u - v;
                    }
                }
            }
        }
    }

    Eigen::MatrixXd simulate(size_t k, const Eigen::MatrixXd &R) const {
        const size_t n = gen_.n();
        std::vector<double> p = record_distribution(n, R);
        double total = 0;
        for (double v : p) {
            total += v;
        }
        for (double &v : p) {
            v /= total;
        }
        Rng rng = Rng::stream(seed_, k);
        const double per_group = std::floor(shots_[k] / (double)groups_);
        std::vector<Eigen::MatrixXd> means;
        std::vector<double> freq(p.size());
        for (size_t g = 0; g < groups_; g++) {
            if (per_group <= EXACT_GROUP_LIMIT) {
                auto remaining = (int64_t)per_group;
                double mass = 1;
                for (size_t c = 0; c < p.size(); c++) {
                    int64_t cnt = 0;
                    if (remaining > 0 && p[c] > 0) {
                        double q = std::min(1.0, p[c] / mass);
                        cnt = q >= 1 ? remaining : std::binomial_distribution<int64_t>(remaining, q)(rng.engine);
                    }
                    freq[c] = (double)cnt / per_group;
                    remaining -= cnt;
                    mass -= p[c];
                    if (mass <= 0) {
                        mass = 1e-300;
                    }
                }
            } else {
                // count_c = N p_c + sqrt(N) (sqrt(p_c) g_c - p_c sum_j sqrt(p_j) g_j)
                double common = 0;
                for (size_t c = 0; c < p.size(); c++) {
                    // Records of probability zero carry no fluctuation.
                    freq[c] = p[c] > 0 ? std::sqrt(p[c]) * rng.normal() : 0.0;
                    common += freq[c];
                }
                double inv = 1 / std::sqrt(per_group);
                for (size_t c = 0; c < p.size(); c++) {
                    freq[c] = p[c] + inv * (freq[c] - p[c] * common);
                }
            }
            means.push_back(pair_table(n, freq));
        }
        const auto np = means.front().rows();
        Eigen::MatrixXd med(np, np);
        std::vector<double> vals(groups_);
        for (Eigen::Index i = 0; i < np; i++) {
            for (Eigen::Index j = 0; j < np; j++) {
                for (size_t g = 0; g < groups_; g++) {
                    vals[g] = means[g](i, j);
                }
                med(i, j) = median(vals);
            }
        }
        return med;
    }

    PauliGenerator gen_;
    std::vector<double> times_;
    std::vector<double> shots_;
    size_t groups_;
    uint64_t seed_;
    OdeOptions opts_;
    std::vector<Eigen::MatrixXd> tables_;
};

}  // namespace tdl

#endif
