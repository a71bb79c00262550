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

#ifndef TDLEARN_SCHEDULE_H
#define TDLEARN_SCHEDULE_H

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/common.h"

namespace tdl {

/// Real polynomial on [0, T], stored in the Chebyshev basis of x = 2t/T - 1.
///
/// The Chebyshev basis keeps fits and evaluations well conditioned; monomial coefficients in t
/// are produced on demand.
struct PolySchedule {
    double T = 1;
    std::vector<double> cheb{0.0};

    PolySchedule() = default;
    PolySchedule(double horizon, std::vector<double> chebyshev_coeffs) : T(horizon), cheb(std::move(chebyshev_coeffs)) {
        if (!(T > 0)) {
            throw ValueError("PolySchedule requires T > 0");
        }
        if (cheb.empty()) {
            cheb.push_back(0);
        }
    }

    static PolySchedule constant(double horizon, double value) {
        return PolySchedule(horizon, {value});
    }

    static PolySchedule from_chebyshev(double horizon, std::vector<double> c) {
        return PolySchedule(horizon, std::move(c));
    }

    /// p(t) = sum_k a_k t^k, converted by Horner's rule in the Chebyshev basis.
    static PolySchedule from_monomial(double horizon, const std::vector<double> &a) {
        if (a.empty()) {
            return constant(horizon, 0);
        }
        std::vector<double> acc{a.back()};
        for (size_t k = a.size() - 1; k-- > 0;) {
            acc = times_t(acc, horizon);
            acc[0] += a[k];
        }
        return PolySchedule(horizon, acc);
    }

    int degree() const {
        return (int)cheb.size() - 1;
    }

    double x_of(double t) const {
        return 2 * t / T - 1;
    }

    double eval(double t) const {
        return clenshaw(cheb, x_of(t));
    }

    double operator()(double t) const {
        return eval(t);
    }

    PolySchedule derivative() const {
        int m = degree();
        if (m == 0) {
            return PolySchedule(T, {0.0});
        }
        std::vector<double> d(m + 1, 0.0);
        // c'_{k-1} = c'_{k+1} + 2 k c_k, then halve the constant term.
        for (int k = m; k >= 1; k--) {
            d[k - 1] = (k + 1 <= m ? d[k + 1] : 0.0) + 2.0 * k * cheb[k];
        }
        d[0] *= 0.5;
        d.pop_back();
        for (double &v : d) {
            v *= 2 / T;
        }
        return PolySchedule(T, d);
    }

    /// Monomial coefficients a_0..a_m of p(t).
    std::vector<double> monomial_coeffs() const {
        int m = degree();
        std::vector<double> out(m + 1, 0.0);
        std::vector<double> prev{1.0};                // T_0 as a polynomial in t
        std::vector<double> cur{-1.0, 2.0 / T};      // T_1 = 2t/T - 1
        for (int k = 0; k <= m; k++) {
            const std::vector<double> &tk = k == 0 ? prev : cur;
            for (size_t j = 0; j < tk.size(); j++) {
                out[j] += cheb[k] * tk[j];
            }
            if (k >= 1) {
                // T_{k+1} = 2 x T_k - T_{k-1}
                std::vector<double> next(cur.size() + 1, 0.0);
                for (size_t j = 0; j < cur.size(); j++) {
                    next[j] += -2 * cur[j];
                    next[j + 1] += 4 / T * cur[j];
                }
                for (size_t j = 0; j < prev.size(); j++) {
                    next[j] -= prev[j];
                }
                prev = cur;
                cur = next;
            }
        }
        return out;
    }

    /// sup_{t in [0,T]} |p(t)|: dense grid followed by Newton refinement on p' at grid maxima.
    double sup_norm() const {
        return sup_norm_on(0, T);
    }

    double sup_norm_on(double a, double b) const {
        int m = degree();
        if (m == 0) {
            return std::abs(cheb[0]);
        }
        PolySchedule d1 = derivative();
        PolySchedule d2 = d1.derivative();
        size_t grid = (size_t)std::max(400, 40 * (m + 1));
        std::vector<double> vals(grid + 1);
        for (size_t k = 0; k <= grid; k++) {
            vals[k] = std::abs(eval(a + (b - a) * (double)k / (double)grid));
        }
        double best = std::max(vals[0], vals[grid]);
        for (size_t k = 1; k < grid; k++) {
            best = std::max(best, vals[k]);
            if (vals[k] >= vals[k - 1] && vals[k] >= vals[k + 1]) {
                double lo = a + (b - a) * (double)(k - 1) / (double)grid;
                double hi = a + (b - a) * (double)(k + 1) / (double)grid;
                double t = a + (b - a) * (double)k / (double)grid;
                for (int it = 0; it < 30; it++) {
                    double g = d1.eval(t), h = d2.eval(t);
                    if (h == 0) {
                        break;
                    }
                    double nt = std::clamp(t - g / h, lo, hi);
                    if (std::abs(nt - t) < 1e-15 * std::max(1.0, std::abs(b - a))) {
                        t = nt;
                        break;
                    }
                    t = nt;
                }
                best = std::max(best, std::abs(eval(t)));
            }
        }
        return best;
    }

    PolySchedule operator+(const PolySchedule &o) const {
        check_same_T(o);
        std::vector<double> c(std::max(cheb.size(), o.cheb.size()), 0.0);
        for (size_t k = 0; k < cheb.size(); k++) {
            c[k] += cheb[k];
        }
        for (size_t k = 0; k < o.cheb.size(); k++) {
            c[k] += o.cheb[k];
        }
        return PolySchedule(T, c);
    }
    PolySchedule operator-(const PolySchedule &o) const {
        return *this + o * -1.0;
    }
    PolySchedule operator*(double s) const {
        std::vector<double> c = cheb;
        for (double &v : c) {
            v *= s;
        }
        return PolySchedule(T, c);
    }

    static double clenshaw(const std::vector<double> &c, double x) {
        double b1 = 0, b2 = 0;
        for (size_t k = c.size(); k-- > 1;) {
            double b0 = c[k] + 2 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        return c[0] + x * b1 - b2;
    }

   private:
    void check_same_T(const PolySchedule &o) const {
        if (std::abs(T - o.T) > 1e-15 * std::max(T, o.T)) {
            throw ValueError("PolySchedule arithmetic on different intervals");
        }
    }

    /// Multiplies a Chebyshev series by t = (T/2)(x + 1), using x T_k = (T_{k+1} + T_{|k-1|}) / 2.
    static std::vector<double> times_t(const std::vector<double> &c, double horizon) {
        std::vector<double> out(c.size() + 1, 0.0);
        for (size_t k = 0; k < c.size(); k++) {
            out[k] += c[k];  // the "+1" part
            if (k == 0) {
                out[1] += c[0];
            } else {
                out[k + 1] += 0.5 * c[k];
                out[k - 1] += 0.5 * c[k];
            }
        }
        for (double &v : out) {
            v *= horizon / 2;
        }
        return out;
    }
};

/// Markov brothers' constant 2m^2/T: ||p'|| <= (2m^2/T) ||p|| on an interval of length T.
inline double markov_constant(int m, double T) {
    return 2.0 * m * m / T;
}

/// K m + K, the degree of the K-term Dyson truncation for degree-m schedules.
inline int dyson_degree(int m, int K) {
    if (m < 0 || K < 0) {
        throw ValueError("dyson_degree requires m, K >= 0");
    }
    return K * m + K;
}

/// |T_m(2 T_f / T - 1)|, the growth of a degree-m polynomial bounded by one on [0, T].
inline double extrapolation_factor(int m, double T, double T_f) {
    if (!(T > 0) || T_f < T * (1 - 1e-15)) {
        throw ValueError("extrapolation_factor requires T_f >= T > 0");
    }
    double x = std::max(1.0, 2 * T_f / T - 1);
    return std::cosh(m * std::acosh(x));
}

/// Default constant of the node-count rule.
constexpr double DEFAULT_C_NODE = 4.0;

/// Number of interpolation nodes for degree m with failure probability delta:
/// max(m + 1, ceil(c_node * m * ln((m + 2) / delta))).
inline size_t node_count(int m, double delta, double c_node = DEFAULT_C_NODE) {
    if (!(delta > 0 && delta < 1)) {
        throw ValueError("node_count requires delta in (0,1)");
    }
    double raw = std::ceil(c_node * m * std::log((m + 2.0) / delta));
    return std::max<size_t>((size_t)(m + 1), (size_t)raw);
}

/// I.i.d. draws from the Chebyshev (arcsine) measure on [0, T] via t = (T/2)(1 - cos(pi U)), sorted.
inline std::vector<double> chebyshev_nodes(double T, size_t count, Rng &rng) {
    std::vector<double> out(count);
    for (size_t k = 0; k < count; k++) {
        double t;
        do {
            t = T / 2 * (1 - std::cos(std::numbers::pi * rng.uniform_open01()));
        } while (!(t > 0 && t < T));
        out[k] = t;
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct NodePlan {
    std::vector<double> nodes;
    double target_precision = 0;
    int degree = 0;
    uint64_t seed = 0;
    double c_node = DEFAULT_C_NODE;
};

inline NodePlan make_node_plan(double T, int m, double delta, uint64_t seed, double target_precision = 0,
                               double c_node = DEFAULT_C_NODE) {
    NodePlan plan;
    Rng rng(seed);
    plan.nodes = chebyshev_nodes(T, node_count(m, delta, c_node), rng);
    plan.degree = m;
    plan.seed = seed;
    plan.c_node = c_node;
    plan.target_precision = target_precision;
    return plan;
}

enum class FitMode { least_squares, l1_robust };

inline const char *fit_mode_name(FitMode mode) {
    return mode == FitMode::least_squares ? "least_squares" : "l1_robust";
}

inline FitMode fit_mode_from_name(const std::string &s) {
    if (s == "least_squares") {
        return FitMode::least_squares;
    }
    if (s == "l1_robust") {
        return FitMode::l1_robust;
    }
    throw ParseError(cat_str("unknown fit mode '", s, "'"));
}

/// Least-squares/robust fitting of degree-m polynomials at fixed nodes.
///
/// The factorization of the Chebyshev design matrix is computed once, so repeated fits on the
/// same nodes (as in derivative estimation) only cost a solve.
struct ChebyshevFitter {
    static constexpr double MAX_CONDITION = 1e12;
    static constexpr int IRLS_ITERATIONS = 200;
    static constexpr double IRLS_FLOOR = 1e-8;

    double T = 1;
    int m = 0;
    std::vector<double> nodes;
    Eigen::MatrixXd design;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    double condition = 1;

    ChebyshevFitter(double horizon, std::vector<double> at, int degree) : T(horizon), m(degree), nodes(std::move(at)) {
        if (degree < 0) {
            throw ValueError("fit degree must be nonnegative");
        }
        if (nodes.size() < (size_t)degree + 1) {
            throw ValueError(cat_str("underdetermined fit: ", nodes.size(), " nodes for degree ", degree));
        }
        std::vector<double> sorted = nodes;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw ValueError("fit nodes are not distinct");
        }
        design = build_design(nodes);
        qr.compute(design);
        const auto &R = qr.matrixR();
        double big = std::abs(R(0, 0));
        double small = std::abs(R(m, m));
        condition = small > 0 ? big / small : std::numeric_limits<double>::infinity();
        if (!(condition <= MAX_CONDITION)) {
            throw NumericalError(cat_str("numerically singular fit (condition estimate ", condition, ")"));
        }
    }

    Eigen::MatrixXd build_design(const std::vector<double> &at) const {
        Eigen::MatrixXd V(at.size(), m + 1);
        for (size_t i = 0; i < at.size(); i++) {
            double x = 2 * at[i] / T - 1;
            V(i, 0) = 1;
            if (m >= 1) {
                V(i, 1) = x;
            }
            for (int k = 2; k <= m; k++) {
                V(i, k) = 2 * x * V(i, k - 1) - V(i, k - 2);
            }
        }
        return V;
    }

    PolySchedule fit(const std::vector<double> &values, FitMode mode = FitMode::least_squares) const {
        if (values.size() != nodes.size()) {
            throw DimensionError("fit: value count differs from node count");
        }
        Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), (Eigen::Index)values.size());
        Eigen::VectorXd c = qr.solve(y);
        if (mode == FitMode::l1_robust) {
            c = irls(y, c);
        }
        return PolySchedule(T, std::vector<double>(c.data(), c.data() + c.size()));
    }

   private:
    /// Iteratively reweighted least squares converging to the l1 regression fit.
    Eigen::VectorXd irls(const Eigen::VectorXd &y, Eigen::VectorXd c) const {
        double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
        double floor = IRLS_FLOOR * scale;
        for (int it = 0; it < IRLS_ITERATIONS; it++) {
            Eigen::VectorXd r = y - design * c;
            Eigen::VectorXd w = r.cwiseAbs().cwiseMax(floor).cwiseInverse().cwiseSqrt();
            Eigen::MatrixXd A = w.asDiagonal() * design;
            Eigen::VectorXd b = w.asDiagonal() * y;
            Eigen::VectorXd next = A.colPivHouseholderQr().solve(b);
            double change = (next - c).cwiseAbs().maxCoeff();
            c = next;
            if (change <= 1e-13 * scale) {
                break;
            }
        }
        return c;
    }
};

/// Fits a degree-m polynomial on [0, T] to (nodes, values).
inline PolySchedule robust_fit(double T, const std::vector<double> &nodes, const std::vector<double> &values, int m,
                               FitMode mode = FitMode::least_squares) {
    return ChebyshevFitter(T, nodes, m).fit(values, mode);
}

/// Degree-m Chebyshev expansion of f on [0, T] from a discrete cosine transform at N first-kind
/// Chebyshev points (N > m).
inline PolySchedule chebyshev_expansion(const std::function<double(double)> &f, double T, int m, size_t N) {
    if ((size_t)m >= N) {
        throw ValueError("chebyshev_expansion requires N > m");
    }
    std::vector<double> fx(N);
    for (size_t j = 0; j < N; j++) {
        double x = std::cos(std::numbers::pi * (j + 0.5) / (double)N);
        fx[j] = f(T * (x + 1) / 2);
    }
    std::vector<double> c(m + 1, 0.0);
    for (int k = 0; k <= m; k++) {
        double acc = 0;
        for (size_t j = 0; j < N; j++) {
            acc += fx[j] * std::cos(std::numbers::pi * k * (j + 0.5) / (double)N);
        }
        c[k] = 2 * acc / (double)N;
    }
    c[0] *= 0.5;
    return PolySchedule(T, c);
}

/// Smallest m <= m_cap whose Chebyshev truncation approximates f within eps in sup norm on
/// [0, T]. Coefficients come from a DCT at 4 max(m_cap, 1) points; the error is measured on a
/// dense grid against f itself.
inline int degree_for_schedule(const std::function<double(double)> &f, double T, double eps, int m_cap) {
    if (!(eps > 0)) {
        throw ValueError("degree_for_schedule requires eps > 0");
    }
    size_t N = 4 * (size_t)std::max(m_cap, 1);
    PolySchedule full = chebyshev_expansion(f, T, m_cap, N);
    size_t grid = std::max<size_t>(2000, 20 * N);
    std::vector<double> ts(grid + 1), fs(grid + 1), xs(grid + 1);
    for (size_t k = 0; k <= grid; k++) {
        ts[k] = T * (double)k / (double)grid;
        xs[k] = 2 * ts[k] / T - 1;
        fs[k] = f(ts[k]);
    }
    for (int m = 0; m <= m_cap; m++) {
        std::vector<double> c(full.cheb.begin(), full.cheb.begin() + m + 1);
        double err = 0;
        for (size_t k = 0; k <= grid && err <= eps; k++) {
            err = std::max(err, std::abs(fs[k] - PolySchedule::clenshaw(c, xs[k])));
        }
        if (err <= eps) {
            return m;
        }
    }
    throw LimitError(cat_str("degree unreachable: no degree <= ", m_cap, " reaches sup error ", eps));
}

/// Named black-box schedule families (config-level built-ins).
struct BuiltinSchedule {
    std::string kind;  // const, linear, poly, cos, gaussian
    std::vector<double> params;

    std::function<double(double)> function() const {
        std::vector<double> p = params;
        auto need = [&](size_t count) {
            if (p.size() < count) {
                throw ParseError(cat_str("built-in schedule '", kind, "' needs ", count, " parameters"));
            }
        };
        if (kind == "const") {
            need(1);
            return [p](double) { return p[0]; };
        }
        if (kind == "linear") {
            need(2);
            return [p](double t) { return p[0] + p[1] * t; };
        }
        if (kind == "poly") {
            need(1);
            return [p](double t) {
                double acc = 0;
                for (size_t k = p.size(); k-- > 0;) {
                    acc = acc * t + p[k];
                }
                return acc;
            };
        }
        if (kind == "cos") {
            // amplitude, angular frequency, phase, offset
            need(2);
            p.resize(4, 0.0);
            return [p](double t) { return p[3] + p[0] * std::cos(p[1] * t + p[2]); };
        }
        if (kind == "gaussian") {
            // amplitude, center, width, offset
            need(3);
            p.resize(4, 0.0);
            return [p](double t) { return p[3] + p[0] * std::exp(-(t - p[1]) * (t - p[1]) / (2 * p[2] * p[2])); };
        }
        throw ParseError(cat_str("unknown built-in schedule '", kind, "'"));
    }

    /// Polynomial stand-in accurate to eps on [0, T] (degree chosen by degree_for_schedule).
    PolySchedule to_poly(double T, double eps = 1e-13, int m_cap = 64) const {
        auto f = function();
        int m = degree_for_schedule(f, T, eps, m_cap);
        return chebyshev_expansion(f, T, m, 4 * (size_t)std::max(m_cap, 1));
    }
};

/// Contract of a Markov-stable function system: evaluation, degree, a Markov-type derivative
/// constant, stable fitting from point values, and the Dyson-composition degree.
template <typename F>
concept MarkovStableFamily = requires(const typename F::function_type &f, double t, int m, int K,
                                      const std::vector<double> &nodes, FitMode mode) {
    { F::eval(f, t) } -> std::convertible_to<double>;
    { F::degree(f) } -> std::convertible_to<int>;
    { F::markov_constant(m, t) } -> std::convertible_to<double>;
    { F::dyson_degree(m, K) } -> std::convertible_to<int>;
    { F::fit(t, nodes, nodes, m, mode) } -> std::same_as<typename F::function_type>;
};

/// The polynomial instance of the contract.
struct PolynomialFamily {
    using function_type = PolySchedule;
    static double eval(const PolySchedule &f, double t) {
        return f.eval(t);
    }
    static int degree(const PolySchedule &f) {
        return f.degree();
    }
    static double markov_constant(int m, double T) {
        return tdl::markov_constant(m, T);
    }
    static int dyson_degree(int m, int K) {
        return tdl::dyson_degree(m, K);
    }
    static PolySchedule fit(double T, const std::vector<double> &nodes, const std::vector<double> &values, int m,
                            FitMode mode) {
        return robust_fit(T, nodes, values, m, mode);
    }
};
static_assert(MarkovStableFamily<PolynomialFamily>);

/// A random polynomial of degree m on [0, T] scaled so that ||p||_inf = target_norm.
inline PolySchedule random_polynomial(double T, int m, Rng &rng, double target_norm = 1.0) {
    std::vector<double> c(m + 1);
    for (int k = 0; k <= m; k++) {
        c[k] = rng.uniform(-1, 1);
    }
    PolySchedule p(T, c);
    double s = p.sup_norm();
    if (s == 0) {
        return PolySchedule::constant(T, target_norm);
    }
    return p * (target_norm / s);
}

/// Measured interpolation constant C_int: the 95th percentile, over `seeds` synthetic trials, of
/// the ratio (sup error of the fitted polynomial) / (sup of the injected noise), for degree-m
/// fits at `count` Chebyshev-measure nodes on [0, 1]. Results are cached per configuration.
inline double calibrate_interpolation_constant(int m, size_t count, FitMode mode = FitMode::least_squares,
                                               size_t seeds = 200, double noise = 1e-3) {
    static std::mutex mutex;
    static std::map<std::tuple<int, size_t, int, size_t, double>, double> cache;
    auto key = std::make_tuple(m, count, (int)mode, seeds, noise);
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) {
            return it->second;
        }
    }
    std::vector<double> ratios;
    for (size_t s = 0; s < seeds; s++) {
        Rng rng = Rng::stream(0xC1A7u + (uint64_t)m * 1000003u + count, s);
        std::vector<double> nodes = chebyshev_nodes(1.0, count, rng);
        PolySchedule truth = random_polynomial(1.0, m, rng);
        std::vector<double> y(count);
        double injected = 0;
        for (size_t i = 0; i < count; i++) {
            double e = noise * rng.uniform(-1, 1);
            injected = std::max(injected, std::abs(e));
            y[i] = truth.eval(nodes[i]) + e;
        }
        PolySchedule fit = robust_fit(1.0, nodes, y, m, mode);
        ratios.push_back((fit - truth).sup_norm() / injected);
    }
    double c = quantile(ratios, 0.95);
    std::lock_guard<std::mutex> lock(mutex);
    cache[key] = c;
    return c;
}

}  // namespace tdl

#endif
