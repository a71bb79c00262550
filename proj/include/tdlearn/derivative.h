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

#ifndef TDLEARN_DERIVATIVE_H
#define TDLEARN_DERIVATIVE_H

#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/schedule.h"
#include "tdlearn/simulator.h"

namespace tdl {

/// Inputs of the derivative planner.
struct DerivativeInputs {
    int m = 1;               // schedule degree
    double T = 1;            // horizon
    double eps = 0.1;        // target sup error of the learned schedules
    double delta = 0.1;      // failure probability of the node draws
    int s = 1;               // row/column sparsity of the linear systems
    double generator_norm = 1;  // bound M on the local generator norm (Dyson degree)
    double c_node = DEFAULT_C_NODE;
    int degree_cap = 200;
    FitMode mode = FitMode::least_squares;
    uint64_t seed = 1;
    /// C_int of the final degree-m fit; 0 means calibrate.
    double c_int_m = 0;
};

/// Primary nodes t_i, the shared auxiliary nodes used to fit every f_O, and the precision chain:
///   target = eps / (2 s C_int(m)),
///   zeta C_int(G) C_der(G) + zeta / 2 <= target,   G = K (m + 1) (Dyson degree),
///   eps_1 = zeta / 2 (precision of each point value f(t_{i,j})).
struct DerivativePlan {
    int m = 1;
    double T = 1;
    double eps = 0.1;
    int s = 1;
    FitMode mode = FitMode::least_squares;
    std::vector<double> primary;
    std::vector<double> aux;
    int dyson_K = 0;
    int fit_degree = 0;
    double zeta = 0;
    double eps1 = 0;
    double target = 0;
    double c_int_m = 0;
    double c_int_fit = 0;
    double c_der = 0;

    size_t xi1() const {
        return primary.size();
    }
    size_t xi2() const {
        return aux.size();
    }
    /// zeta C_int(G) C_der(G) + zeta/2: guaranteed derivative error when every point value is
    /// within eps_1.
    double derivative_bound() const {
        return zeta * c_int_fit * c_der + zeta / 2;
    }
};

/// Lower screen for C_int during the order search (measured values sit near 0.4-0.6).
constexpr double C_INT_SEARCH_FLOOR = 0.25;

namespace internal {

inline size_t aux_node_count(int G, double delta, double c_node) {
    // G = 0 fits need a single point; otherwise the usual rule with a floor of G + 1.
    return G == 0 ? 1 : node_count(G, delta, c_node);
}

}  // namespace internal

/// Solves the precision chain. For each Dyson order K the fit degree is G = K (m + 1) and the
/// largest admissible zeta is target / (C_int(G) C_der(G) + 1/2); K is the smallest order whose
/// Dyson remainder (M T)^{K+1} / (K+1)! is at most zeta / 2.
inline DerivativePlan plan_derivatives(const DerivativeInputs &in) {
    if (!(in.eps > 0)) {
        throw ValueError("plan_derivatives requires eps > 0");
    }
    if (!(in.delta > 0 && in.delta < 1)) {
        throw ValueError("plan_derivatives requires delta in (0,1)");
    }
    if (in.m < 0 || in.s < 1 || !(in.T > 0) || in.generator_norm < 0) {
        throw ValueError("plan_derivatives: invalid m, s, T or generator norm");
    }
    DerivativePlan plan;
    plan.m = in.m;
    plan.T = in.T;
    plan.eps = in.eps;
    plan.s = in.s;
    plan.mode = in.mode;
    // Half the failure budget for the primary draw, half for the auxiliary draw.
    size_t xi1 = node_count(in.m, in.delta / 2, in.c_node);
    Rng rng = Rng::stream(in.seed, 0x9121);
    plan.primary = chebyshev_nodes(in.T, xi1, rng);
    plan.c_int_m = in.c_int_m > 0 ? in.c_int_m : calibrate_interpolation_constant(in.m, xi1, in.mode);
    plan.target = in.eps / (2.0 * in.s * plan.c_int_m);

    const double MT = in.generator_norm * in.T;
    for (int K = 0;; K++) {
        double tail = dyson_tail(in.generator_norm, in.T, K);
        int G = dyson_degree(in.m, K);
        if (G > in.degree_cap) {
            throw LimitError(cat_str("derivative planning: fit degree ", G, " exceeds the cap ", in.degree_cap,
                                     " (M T = ", fmt_double(MT), ", target ", fmt_double(plan.target), ")"));
        }
        double c_der = markov_constant(G, in.T);
        // Screen with a floor on C_int before paying for a calibration. A floor above the true
        // constant only makes the chosen K larger (the plan stays valid).
        if (tail > plan.target / (C_INT_SEARCH_FLOOR * c_der + 0.5) / 2) {
            continue;
        }
        size_t xi2 = internal::aux_node_count(G, in.delta / 2, in.c_node);
        double c_int = G == 0 ? 1.0 : calibrate_interpolation_constant(G, xi2, in.mode);
        double zeta = plan.target / (c_int * c_der + 0.5);
        if (tail > zeta / 2) {
            continue;
        }
        plan.dyson_K = K;
        plan.fit_degree = G;
        plan.zeta = zeta;
        plan.eps1 = zeta / 2;
        plan.c_int_fit = c_int;
        plan.c_der = c_der;
        Rng aux_rng = Rng::stream(in.seed, 0xa0c5);
        plan.aux = chebyshev_nodes(in.T, xi2, aux_rng);
        return plan;
    }
}

inline void dump_plan(const DerivativePlan &p, std::ostream &out) {
    out << "m=" << p.m << " T=" << fmt_double(p.T) << " eps=" << fmt_double(p.eps) << " s=" << p.s
        << " xi1=" << p.xi1() << " xi2=" << p.xi2() << " K=" << p.dyson_K << " G=" << p.fit_degree
        << " zeta=" << fmt_double(p.zeta) << " eps1=" << fmt_double(p.eps1) << " target=" << fmt_double(p.target)
        << " C_int(m)=" << fmt_double(p.c_int_m) << " C_int(G)=" << fmt_double(p.c_int_fit)
        << " C_der(G)=" << fmt_double(p.c_der) << "\n";
}

struct DerivativeEstimate {
    double value = 0;
    double error_bound = 0;
};

/// Derivative of the degree-G fit through values at fixed nodes, evaluated at given points.
///
/// In least-squares mode the derivative at t is a fixed linear functional of the values, so its
/// weights are computed once from the shared factorization and each estimate is a dot product.
class DerivativeEstimator {
   public:
    DerivativeEstimator(double T, std::vector<double> nodes, int degree, FitMode mode = FitMode::least_squares,
                        double zeta = 0, double c_int = 1)
        : fitter_(T, std::move(nodes), degree), mode_(mode), zeta_(zeta), c_int_(c_int) {
        pinv_ = fitter_.qr.solve(Eigen::MatrixXd::Identity((Eigen::Index)fitter_.nodes.size(),
                                                           (Eigen::Index)fitter_.nodes.size()));
    }

    explicit DerivativeEstimator(const DerivativePlan &plan)
        : DerivativeEstimator(plan.T, plan.aux, plan.fit_degree, plan.mode, plan.zeta, plan.c_int_fit) {
    }

    int degree() const {
        return fitter_.m;
    }
    double horizon() const {
        return fitter_.T;
    }
    const std::vector<double> &nodes() const {
        return fitter_.nodes;
    }

    /// d/dt of the Chebyshev basis T_k(2t/T - 1) at t.
    Eigen::VectorXd basis_derivative(double t) const {
        const int m = fitter_.m;
        Eigen::VectorXd d = Eigen::VectorXd::Zero(m + 1);
        double x = 2 * t / fitter_.T - 1;
        // T_k' = k U_{k-1}
        double u_prev = 0, u = 1;
        for (int k = 1; k <= m; k++) {
            d[k] = k * u * 2 / fitter_.T;
            double next = 2 * x * u - u_prev;
            u_prev = u;
            u = next;
        }
        return d;
    }

    /// Fitted polynomial (either mode).
    PolySchedule fit(const std::vector<double> &values) const {
        return fitter_.fit(values, mode_);
    }

    /// Error bound markov_constant(G, T) * fit_error + zeta/2 with fit_error = C_int(G) zeta.
    double error_bound() const {
        return markov_constant(fitter_.m, fitter_.T) * c_int_ * zeta_ + zeta_ / 2;
    }

    DerivativeEstimate estimate_at(const std::vector<double> &values, double t) const {
        if (values.size() != fitter_.nodes.size()) {
            throw DimensionError(cat_str("estimate_derivative: ", values.size(), " values for ",
                                         fitter_.nodes.size(), " nodes"));
        }
        DerivativeEstimate out;
        out.error_bound = error_bound();
        if (mode_ == FitMode::least_squares) {
            Eigen::Map<const Eigen::VectorXd> y(values.data(), (Eigen::Index)values.size());
            out.value = basis_derivative(t).dot(pinv_ * y);
        } else {
            out.value = fit(values).derivative().eval(t);
        }
        return out;
    }

    /// Weights w with f'(t) = w . values (least-squares mode).
    Eigen::VectorXd weights(double t) const {
        return pinv_.transpose() * basis_derivative(t);
    }

   private:
    ChebyshevFitter fitter_;
    FitMode mode_;
    double zeta_;
    double c_int_;
    Eigen::MatrixXd pinv_;
};

/// One-shot form: fit the values at the plan's auxiliary nodes, differentiate at primary node i.
inline DerivativeEstimate estimate_derivative(const std::vector<double> &values, const DerivativePlan &plan,
                                              size_t node) {
    if (node >= plan.primary.size()) {
        throw ValueError("estimate_derivative: node index out of range");
    }
    return DerivativeEstimator(plan).estimate_at(values, plan.primary[node]);
}

}  // namespace tdl

#endif
