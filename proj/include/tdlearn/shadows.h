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

#ifndef TDLEARN_SHADOWS_H
#define TDLEARN_SHADOWS_H

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tdlearn/simulator.h"

namespace tdl {

/// One prepare-evolve-measure record: preparation basis/signs (b1, s1) and measurement
/// basis/outcomes (b2, s2). Sign bits store +1 as 0 and -1 as 1.
struct ShadowSnapshot {
    uint32_t time_index = 0;
    std::vector<Axis> b1;
    std::vector<uint8_t> s1;
    std::vector<Axis> b2;
    std::vector<uint8_t> s2;

    bool operator==(const ShadowSnapshot &o) const {
        return time_index == o.time_index && b1 == o.b1 && s1 == o.s1 && b2 == o.b2 && s2 == o.s2;
    }
};

struct ShadowBatch {
    size_t n = 0;
    std::vector<double> times;
    uint64_t seed = 0;
    std::string fingerprint;
    std::vector<ShadowSnapshot> snapshots;  // grouped by time_index (ascending)

    /// [begin, end) positions of the snapshots taken at time_index.
    std::pair<size_t, size_t> range(size_t time_index) const {
        auto lo = std::lower_bound(snapshots.begin(), snapshots.end(), time_index,
                                   [](const ShadowSnapshot &s, size_t t) { return s.time_index < t; });
        auto hi = std::upper_bound(snapshots.begin(), snapshots.end(), time_index,
                                   [](size_t t, const ShadowSnapshot &s) { return t < s.time_index; });
        return {(size_t)(lo - snapshots.begin()), (size_t)(hi - snapshots.begin())};
    }

    size_t count(size_t time_index) const {
        auto [a, b] = range(time_index);
        return b - a;
    }
};

/// Number of median-of-means groups for failure probability delta: ceil(2 ln(2 / delta)).
inline size_t mom_groups(double delta) {
    if (!(delta > 0 && delta < 1)) {
        throw ValueError("mom_groups requires delta in (0,1)");
    }
    return (size_t)std::ceil(2 * std::log(2 / delta));
}

/// Default median-of-means constant of the sample budget.
constexpr double DEFAULT_C_SHADOW = 34.0;

/// ceil(c_shadow 3^w ln(K1K2 / delta) / eps^2). Returned as a double: planner budgets can exceed
/// the 64-bit integer range.
inline double sample_budget(int w, double k1k2, double eps, double delta, double c_shadow = DEFAULT_C_SHADOW) {
    if (w < 0 || !(k1k2 > 0) || !(eps > 0) || !(delta > 0)) {
        throw ValueError("sample_budget requires positive arguments");
    }
    double log_term = std::max(std::log(k1k2 / delta), 0.0);
    return std::ceil(c_shadow * std::pow(3.0, w) * log_term / (eps * eps));
}

/// Single-snapshot estimator value for the pair (prepared Pauli A, measured Pauli B):
///   prod_{i in supp A} 3 [b1_i = A_i] s1_i  *  prod_{j in supp B} 3 [b2_j = B_j] s2_j.
/// Its expectation is 2^{-n} tr[T(0,t)(B) A].
inline double snapshot_value(const ShadowSnapshot &s, const PauliString &prep, const PauliString &meas) {
    double v = 1;
    for (size_t q = 0; q < prep.n; q++) {
        if (prep.x(q) || prep.z(q)) {
            if (s.b1[q] != prep.axis(q)) {
                return 0;
            }
            v *= s.s1[q] ? -3 : 3;
        }
        if (meas.x(q) || meas.z(q)) {
            if (s.b2[q] != meas.axis(q)) {
                return 0;
            }
            v *= s.s2[q] ? -3 : 3;
        }
    }
    return v;
}

/// Median over `groups` contiguous groups of the mean of `values`.
inline double median_of_means(const std::vector<double> &values, size_t groups) {
    if (values.empty()) {
        throw ValueError("median_of_means of an empty sample");
    }
    groups = std::max<size_t>(1, std::min(groups, values.size()));
    std::vector<double> means;
    size_t N = values.size();
    for (size_t g = 0; g < groups; g++) {
        size_t a = g * N / groups, b = (g + 1) * N / groups;
        double acc = 0;
        for (size_t i = a; i < b; i++) {
            acc += values[i];
        }
        means.push_back(acc / (double)(b - a));
    }
    return median(means);
}

/// Overlap estimate from snapshots at time_index for (prepared Pauli, measured Pauli): unbiased for
/// 2^{-n} tr[T(0,t)(meas) prep].
inline double estimate_pair(const ShadowBatch &batch, size_t time_index, const PauliString &prep,
                            const PauliString &meas, size_t groups) {
    auto [a, b] = batch.range(time_index);
    if (a == b) {
        throw ValueError(cat_str("no snapshots at time index ", time_index));
    }
    if (prep.n != batch.n || meas.n != batch.n) {
        throw DimensionError("estimate_pair: Pauli length differs from the batch");
    }
    std::vector<double> values;
    values.reserve(b - a);
    for (size_t i = a; i < b; i++) {
        values.push_back(snapshot_value(batch.snapshots[i], prep, meas));
    }
    return median_of_means(values, groups);
}

/// Median-of-means estimate of 2^{-n} tr[T(0,t)(P_in) P_out]: P_in is matched against the
/// measurement record and P_out against the preparation record.
inline double estimate_overlap(const ShadowBatch &batch, size_t time_index, const PauliString &p_in,
                               const PauliString &p_out, size_t groups) {
    return estimate_pair(batch, time_index, p_out, p_in, groups);
}

struct AcquireOptions {
    /// Test hook: measure in the preparation basis.
    bool force_same_basis = false;
    size_t dense_limit = DEFAULT_DENSE_LIMIT;
    OdeOptions ode{1e-11};
};

namespace internal {

/// Rotation taking the eigenbasis of `a` to the computational basis (eigenvalue +1 -> |0>).
inline Eigen::Matrix2cd basis_rotation(Axis a) {
    const double r = 1 / std::sqrt(2.0);
    Eigen::Matrix2cd u;
    switch (a) {
        case Axis::X:
            u << r, r, r, -r;
            break;
        case Axis::Y:
            u << r, cdouble(0, -r), r, cdouble(0, r);
            break;
        default:
            u << 1, 0, 0, 1;
    }
    return u;
}

/// Outcome distribution over sign strings for measuring rho in product basis b (qubit 0 = top bit).
inline std::vector<double> outcome_distribution(const DenseOperator &rho, const std::vector<Axis> &b) {
    size_t n = b.size();
    DenseOperator u = DenseOperator::Ones(1, 1);
    for (size_t q = 0; q < n; q++) {
        Eigen::Matrix2cd f = basis_rotation(b[q]);
        DenseOperator next(u.rows() * 2, u.cols() * 2);
        for (Eigen::Index i = 0; i < u.rows(); i++) {
            for (Eigen::Index j = 0; j < u.cols(); j++) {
                next.block(2 * i, 2 * j, 2, 2) = u(i, j) * f;
            }
        }
        u = next;
    }
    DenseOperator r = u * rho * u.adjoint();
    std::vector<double> p((size_t)r.rows());
    for (Eigen::Index k = 0; k < r.rows(); k++) {
        p[(size_t)k] = std::max(0.0, r(k, k).real());
    }
    return p;
}

}  // namespace internal

/// Simulated process-shadow acquisition: for every time and repetition, a uniformly random product
/// Pauli eigenstate is prepared, evolved by the dual propagator to t, and measured in a uniformly
/// random product Pauli basis. Each (time, repetition) uses its own RNG stream split from `seed`.
inline ShadowBatch acquire(const LindbladAnsatz &a, const std::vector<double> &times, size_t count_per_time,
                           uint64_t seed, const AcquireOptions &opts = {}) {
    size_t n = a.n();
    check_dense_limit(n, opts.dense_limit);
    for (double t : times) {
        if (t < 0 || t > a.T * (1 + 1e-12)) {
            throw ValueError(cat_str("acquisition time ", t, " outside [0, T]"));
        }
    }
    ShadowBatch batch;
    batch.n = n;
    batch.times = times;
    batch.seed = seed;
    batch.fingerprint = a.fingerprint();
    batch.snapshots.reserve(times.size() * count_per_time);
    for (size_t ti = 0; ti < times.size(); ti++) {
        std::map<std::pair<uint64_t, uint64_t>, DenseOperator> cache;  // (b1 code, s1 code) -> rho(t)
        std::map<std::tuple<uint64_t, uint64_t, uint64_t>, std::vector<double>> dists;
        for (size_t rep = 0; rep < count_per_time; rep++) {
            Rng rng = Rng::stream(seed, ((uint64_t)ti << 32) | rep);
            ShadowSnapshot s;
            s.time_index = (uint32_t)ti;
            s.b1.resize(n);
            s.s1.resize(n);
            s.b2.resize(n);
            s.s2.resize(n);
            uint64_t bcode = 0, scode = 0;
            for (size_t q = 0; q < n; q++) {
                s.b1[q] = (Axis)rng.below(3);
                s.s1[q] = (uint8_t)rng.below(2);
                bcode = bcode * 3 + (uint64_t)s.b1[q];
                scode = scode * 2 + s.s1[q];
            }
            for (size_t q = 0; q < n; q++) {
                s.b2[q] = opts.force_same_basis ? s.b1[q] : (Axis)rng.below(3);
            }
            uint64_t mcode = 0;
            for (size_t q = 0; q < n; q++) {
                mcode = mcode * 3 + (uint64_t)s.b2[q];
            }
            auto dkey = std::make_tuple(bcode, scode, mcode);
            auto dit = dists.find(dkey);
            if (dit == dists.end()) {
                auto key = std::make_pair(bcode, scode);
                auto it = cache.find(key);
                if (it == cache.end()) {
                    DenseOperator rho = product_eigenstate(s.b1, s.s1);
                    it = cache.emplace(key, evolve_state(a, rho, 0, times[ti], opts.ode)).first;
                }
                dit = dists.emplace(dkey, internal::outcome_distribution(it->second, s.b2)).first;
            }
            const std::vector<double> &p = dit->second;
            double u = rng.uniform01();
            double total = 0;
            for (double v : p) {
                total += v;
            }
            u *= total;
            size_t k = 0;
            double acc = p[0];
            while (k + 1 < p.size() && acc <= u) {
                acc += p[++k];
            }
            for (size_t q = 0; q < n; q++) {
                s.s2[q] = (uint8_t)((k >> (n - 1 - q)) & 1);
            }
            batch.snapshots.push_back(std::move(s));
        }
    }
    return batch;
}

/// Text form: header `n=<int> times=<comma list> seed=<u64> ansatz=<hex>` followed by one record per
/// line `<time_index> <b1> <s1> <b2> <s2>`.
inline void serialize(const ShadowBatch &batch, std::ostream &out) {
    out << "n=" << batch.n << " times=";
    for (size_t k = 0; k < batch.times.size(); k++) {
        out << (k ? "," : "") << fmt_double(batch.times[k]);
    }
    out << " seed=" << batch.seed << " ansatz=" << (batch.fingerprint.empty() ? "0" : batch.fingerprint) << "\n";
    std::string line;
    for (const auto &s : batch.snapshots) {
        line.clear();
        line += std::to_string(s.time_index);
        line += ' ';
        for (Axis a : s.b1) {
            line += axis_char(a);
        }
        line += ' ';
        for (uint8_t b : s.s1) {
            line += b ? '-' : '+';
        }
        line += ' ';
        for (Axis a : s.b2) {
            line += axis_char(a);
        }
        line += ' ';
        for (uint8_t b : s.s2) {
            line += b ? '-' : '+';
        }
        line += '\n';
        out << line;
    }
}

inline std::string serialize(const ShadowBatch &batch) {
    std::ostringstream ss;
    serialize(batch, ss);
    return ss.str();
}

inline ShadowBatch parse_batch(std::istream &in) {
    ShadowBatch batch;
    std::string header;
    if (!std::getline(in, header)) {
        throw ParseError("snapshot file: missing header");
    }
    std::istringstream hs(header);
    std::string field;
    bool have_n = false, have_times = false;
    while (hs >> field) {
        size_t eq = field.find('=');
        if (eq == std::string::npos) {
            throw ParseError(cat_str("snapshot header: malformed field '", field, "'"));
        }
        std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        try {
            if (key == "n") {
                batch.n = std::stoul(val);
                have_n = true;
            } else if (key == "times") {
                std::stringstream ts(val);
                std::string item;
                while (std::getline(ts, item, ',')) {
                    if (!item.empty()) {
                        batch.times.push_back(std::stod(item));
                    }
                }
                have_times = true;
            } else if (key == "seed") {
                batch.seed = std::stoull(val);
            } else if (key == "ansatz") {
                batch.fingerprint = val == "0" ? "" : val;
            } else {
                throw ParseError(cat_str("snapshot header: unknown key '", key, "'"));
            }
        } catch (const std::logic_error &) {
            throw ParseError(cat_str("snapshot header: bad value for '", key, "'"));
        }
    }
    if (!have_n || !have_times) {
        throw ParseError("snapshot header: n and times are required");
    }
    std::string line;
    size_t record = 0;
    auto bad = [&](const std::string &why) {
        return ParseError(cat_str("snapshot record ", record, ": ", why));
    };
    while (std::getline(in, line)) {
        record++;
        if (line.empty()) {
            throw bad("empty line");
        }
        std::istringstream ls(line);
        std::string ti, b1, s1, b2, s2, extra;
        if (!(ls >> ti >> b1 >> s1 >> b2 >> s2) || (ls >> extra)) {
            throw bad("expected 5 fields");
        }
        if (b1.size() != batch.n || s1.size() != batch.n || b2.size() != batch.n || s2.size() != batch.n) {
            throw bad("field length differs from n");
        }
        ShadowSnapshot s;
        try {
            size_t used = 0;
            unsigned long v = std::stoul(ti, &used);
            if (used != ti.size()) {
                throw bad("bad time index");
            }
            s.time_index = (uint32_t)v;
        } catch (const std::logic_error &) {
            throw bad("bad time index");
        }
        if (s.time_index >= batch.times.size()) {
            throw bad("time index out of range");
        }
        if (!batch.snapshots.empty() && batch.snapshots.back().time_index > s.time_index) {
            throw bad("records not grouped by time index");
        }
        auto axes = [&](const std::string &txt) {
            std::vector<Axis> out;
            for (char c : txt) {
                if (c != 'X' && c != 'Y' && c != 'Z') {
                    throw bad("bad basis character");
                }
                out.push_back(axis_from_char(c));
            }
            return out;
        };
        auto signs = [&](const std::string &txt) {
            std::vector<uint8_t> out;
            for (char c : txt) {
                if (c != '+' && c != '-') {
                    throw bad("bad sign character");
                }
                out.push_back(c == '-');
            }
            return out;
        };
        s.b1 = axes(b1);
        s.s1 = signs(s1);
        s.b2 = axes(b2);
        s.s2 = signs(s2);
        batch.snapshots.push_back(std::move(s));
    }
    return batch;
}

inline ShadowBatch parse_batch(const std::string &text) {
    std::istringstream ss(text);
    return parse_batch(ss);
}

}  // namespace tdl

#endif
