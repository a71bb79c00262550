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

#ifndef TDLEARN_ODE_H
#define TDLEARN_ODE_H

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "tdlearn/common.h"

namespace tdl {

struct OdeOptions {
    /// Local error tolerance per step, applied as atol = rtol = tol in the max norm.
    double tol = 1e-10;
    double h_min = 1e-14;
    size_t max_steps = 10000000;
};

struct OdeStats {
    size_t accepted = 0;
    size_t rejected = 0;
    size_t evaluations = 0;
};

namespace internal {

template <typename State>
double max_abs(const State &x) {
    return x.size() == 0 ? 0.0 : (double)x.cwiseAbs().maxCoeff();
}

}  // namespace internal

/// Dormand-Prince 5(4) with PI step-size control and continuous (dense) output.
///
/// `State` is any Eigen dense matrix or vector type; `rhs(t, y, dy)` writes dy = f(t, y).
/// Solutions are reported at the requested output times, which must be sorted and lie in
/// [t0, t1] (t1 = last output). The integrator never steps past the final output time.
template <typename State>
class Dopri5 {
   public:
    using Rhs = std::function<void(double, const State &, State &)>;

    Dopri5(Rhs rhs, OdeOptions opts = {}) : rhs_(std::move(rhs)), opts_(opts) {
    }

    const OdeStats &stats() const {
        return stats_;
    }

    /// Integrates from (t0, y0) and invokes `emit(k, y(outputs[k]))` for every output time.
    void run(double t0, const State &y0, const std::vector<double> &outputs,
             const std::function<void(size_t, const State &)> &emit) {
        if (outputs.empty()) {
            return;
        }
        for (size_t k = 0; k < outputs.size(); k++) {
            if (outputs[k] < t0 || (k > 0 && outputs[k] < outputs[k - 1])) {
                throw ValueError("Dopri5: output times must be sorted and >= t0");
            }
        }
        double t1 = outputs.back();
        State y = y0;
        size_t next = 0;
        while (next < outputs.size() && outputs[next] == t0) {
            emit(next++, y);
        }
        if (next == outputs.size()) {
            return;
        }
        State k1, k2, k3, k4, k5, k6, k7, ys, ynew, err;
        init_like(y, {&k1, &k2, &k3, &k4, &k5, &k6, &k7, &ys, &ynew, &err});
        eval(t0, y, k1);
        double t = t0;
        double h = initial_step(t0, y, k1, t1 - t0);
        double facold = 1e-4;
        bool last_rejected = false;
        const double safe = 0.9, beta = 0.04, expo1 = 0.2 - beta * 0.75;
        const double facc1 = 1 / 0.2, facc2 = 1 / 10.0;
        for (size_t step = 0;; step++) {
            if (step > opts_.max_steps) {
                throw NumericalError("Dopri5: step limit exceeded");
            }
            if (t + 1.01 * h >= t1) {
                h = t1 - t;
            }
            if (h < opts_.h_min * std::max(1.0, std::abs(t))) {
                throw NumericalError(cat_str("Dopri5: step-size underflow at t = ", t));
            }
            ys = y + h * (A21 * k1);
            eval(t + C2 * h, ys, k2);
            ys = y + h * (A31 * k1 + A32 * k2);
            eval(t + C3 * h, ys, k3);
            ys = y + h * (A41 * k1 + A42 * k2 + A43 * k3);
            eval(t + C4 * h, ys, k4);
            ys = y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4);
            eval(t + C5 * h, ys, k5);
            ys = y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5);
            eval(t + h, ys, k6);
            ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            eval(t + h, ynew, k7);
            err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            double scale = opts_.tol * (1 + std::max(internal::max_abs(y), internal::max_abs(ynew)));
            double e = internal::max_abs(err) / scale;
            if (!std::isfinite(e)) {
                e = 1e10;
            }
            double fac11 = std::pow(std::max(e, 1e-300), expo1);
            if (e <= 1) {
                stats_.accepted++;
                double tnew = t + h;
                // Dense output on [t, tnew] for all outputs inside the step.
                if (next < outputs.size() && outputs[next] <= tnew) {
                    State ydiff = ynew - y;
                    State bspl = h * k1 - ydiff;
                    State r4 = ydiff - h * k7 - bspl;
                    State r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7);
                    while (next < outputs.size() && outputs[next] <= tnew) {
                        double tau = outputs[next];
                        if (tau == tnew) {
                            emit(next++, ynew);
                            continue;
                        }
                        double th = (tau - t) / h, th1 = 1 - th;
                        State yi = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
                        emit(next++, yi);
                    }
                }
                y.swap(ynew);
                k1.swap(k7);
                t = tnew;
                if (next == outputs.size() || t >= t1) {
                    return;
                }
                facold = std::max(e, 1e-4);
                double fac = fac11 / std::pow(facold, beta);
                fac = std::max(facc2, std::min(facc1, fac / safe));
                double hnew = h / fac;
                if (last_rejected) {
                    hnew = std::min(hnew, h);
                }
                last_rejected = false;
                h = hnew;
            } else {
                stats_.rejected++;
                h = h / std::min(facc1, fac11 / safe);
                last_rejected = true;
            }
        }
    }

    /// Convenience: the solution at each output time.
    std::vector<State> solve(double t0, const State &y0, const std::vector<double> &outputs) {
        std::vector<State> out(outputs.size());
        run(t0, y0, outputs, [&](size_t k, const State &y) { out[k] = y; });
        return out;
    }

   private:
    static constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;
    static constexpr double A21 = 1.0 / 5;
    static constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
    static constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
    static constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729;
    static constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                            A65 = -5103.0 / 18656;
    static constexpr double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784,
                            A76 = 11.0 / 84;
    static constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200,
                            E6 = 22.0 / 525, E7 = -1.0 / 40;
    static constexpr double D1 = -12715105075.0 / 11282082432, D3 = 87487479700.0 / 32700410799,
                            D4 = -10690763975.0 / 1880347072, D5 = 701980252875.0 / 199316789632,
                            D6 = -1453857185.0 / 822651844, D7 = 69997945.0 / 29380423;

    static void init_like(const State &y, std::initializer_list<State *> xs) {
        for (State *x : xs) {
            x->resizeLike(y);
            x->setZero();
        }
    }

    void eval(double t, const State &y, State &dy) {
        stats_.evaluations++;
        rhs_(t, y, dy);
    }

    /// Starting step from the usual two-evaluation heuristic (Hairer, Norsett & Wanner).
    double initial_step(double t0, const State &y0, const State &f0, double span) {
        double sk = opts_.tol * (1 + internal::max_abs(y0));
        double d0 = internal::max_abs(y0) / sk, d1 = internal::max_abs(f0) / sk;
        double h = (d0 <= 1e-10 || d1 <= 1e-10) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, span);
        State y1 = y0 + h * f0;
        State f1;
        f1.resizeLike(y0);
        eval(t0 + h, y1, f1);
        double d2 = internal::max_abs(State(f1 - f0)) / sk / h;
        double dm = std::max(d1, d2);
        double h1 = dm <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / dm, 1.0 / 5);
        return std::min({100 * h, h1, span});
    }

    Rhs rhs_;
    OdeOptions opts_;
    OdeStats stats_;
};

}  // namespace tdl

#endif
