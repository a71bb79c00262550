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

#ifndef TDLEARN_LATTICE_H
#define TDLEARN_LATTICE_H

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tdlearn/pauli.h"

namespace tdl {

/// Ball-growth parameters: |B_r(v)| <= C1 r^D and |B_r(v)| - |B_{r-1}(v)| <= C2 r^{D-1}.
struct DimParams {
    int D = 1;
    double C1 = 3;
    double C2 = 2;
};

/// Undirected interaction graph with a precomputed all-pairs distance table.
struct InteractionGraph {
    static constexpr int UNREACHABLE = -1;

    size_t n = 0;
    std::vector<std::vector<size_t>> adj;
    std::vector<int> dist;  // n*n, UNREACHABLE for disconnected pairs
    DimParams dim;
    std::string name;

    InteractionGraph() = default;

    static InteractionGraph from_edges(size_t n, const std::vector<std::pair<size_t, size_t>> &edges,
                                       DimParams dim = {}, std::string name = "edges") {
        InteractionGraph g;
        g.n = n;
        g.adj.assign(n, {});
        g.dim = dim;
        g.name = std::move(name);
        for (auto [a, b] : edges) {
            if (a >= n || b >= n) {
                throw ValueError(cat_str("edge (", a, ",", b, ") references an unknown vertex"));
            }
            if (a == b) {
                continue;
            }
            g.adj[a].push_back(b);
            g.adj[b].push_back(a);
        }
        for (auto &nb : g.adj) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
        g.compute_distances();
        return g;
    }

    static InteractionGraph path(size_t n) {
        std::vector<std::pair<size_t, size_t>> e;
        for (size_t v = 0; v + 1 < n; v++) {
            e.push_back({v, v + 1});
        }
        return from_edges(n, e, DimParams{1, 3, 2}, "path");
    }

    static InteractionGraph ring(size_t n) {
        std::vector<std::pair<size_t, size_t>> e;
        for (size_t v = 0; v < n; v++) {
            e.push_back({v, (v + 1) % n});
        }
        return from_edges(n, e, DimParams{1, 3, 2}, "ring");
    }

    /// width x height grid; vertex (x, y) has index y * width + x.
    static InteractionGraph grid(size_t width, size_t height) {
        std::vector<std::pair<size_t, size_t>> e;
        for (size_t y = 0; y < height; y++) {
            for (size_t x = 0; x < width; x++) {
                size_t v = y * width + x;
                if (x + 1 < width) {
                    e.push_back({v, v + 1});
                }
                if (y + 1 < height) {
                    e.push_back({v, v + width});
                }
            }
        }
        return from_edges(width * height, e, DimParams{2, 9, 18}, cat_str("grid", width, "x", height));
    }

    int distance(size_t a, size_t b) const {
        check_vertex(a);
        check_vertex(b);
        return dist[a * n + b];
    }

    void check_vertex(size_t v) const {
        if (v >= n) {
            throw ValueError(cat_str("unknown vertex ", v, " (graph has ", n, ")"));
        }
    }

    /// Largest finite distance.
    int diameter() const {
        int d = 0;
        for (int v : dist) {
            d = std::max(d, v);
        }
        return d;
    }

    std::vector<size_t> ball(size_t v, int r) const {
        check_vertex(v);
        if (r < 0) {
            throw ValueError("negative radius");
        }
        std::vector<size_t> out;
        for (size_t u = 0; u < n; u++) {
            int d = dist[v * n + u];
            if (d != UNREACHABLE && d <= r) {
                out.push_back(u);
            }
        }
        return out;
    }

    /// S(r) = union of balls of radius r around S; sorted.
    std::vector<size_t> enlarge(const std::vector<size_t> &s, int r) const {
        if (s.empty()) {
            throw ValueError("enlarge of an empty vertex set");
        }
        if (r < 0) {
            throw ValueError("negative radius");
        }
        std::vector<char> in(n, 0);
        for (size_t v : s) {
            check_vertex(v);
            for (size_t u = 0; u < n; u++) {
                int d = dist[v * n + u];
                if (d != UNREACHABLE && d <= r) {
                    in[u] = 1;
                }
            }
        }
        std::vector<size_t> out;
        for (size_t u = 0; u < n; u++) {
            if (in[u]) {
                out.push_back(u);
            }
        }
        return out;
    }

   private:
    void compute_distances() {
        dist.assign(n * n, UNREACHABLE);
        for (size_t s = 0; s < n; s++) {
            std::deque<size_t> queue{s};
            dist[s * n + s] = 0;
            while (!queue.empty()) {
                size_t v = queue.front();
                queue.pop_front();
                for (size_t u : adj[v]) {
                    if (dist[s * n + u] == UNREACHABLE) {
                        dist[s * n + u] = dist[s * n + v] + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
    }
};

struct DimensionViolation {
    size_t vertex = 0;
    int radius = 0;
    bool shell = false;  // false: ball-size bound, true: shell-size bound
    double value = 0;
    double limit = 0;
};

struct DimensionReport {
    bool holds = true;
    std::vector<DimensionViolation> witnesses;  // first entry is the first violation found
};

/// Exhaustive check of the ball-growth bounds over all vertices v (outer loop) and radii
/// 1 <= r <= diameter (inner loop). Radius 0 is skipped: the bound C1 * 0^D is degenerate.
inline DimensionReport check_dimension(const InteractionGraph &g) {
    DimensionReport rep;
    int diam = g.diameter();
    const DimParams &p = g.dim;
    for (size_t v = 0; v < g.n; v++) {
        std::vector<size_t> counts(diam + 2, 0);
        for (size_t u = 0; u < g.n; u++) {
            int d = g.dist[v * g.n + u];
            if (d != InteractionGraph::UNREACHABLE) {
                counts[d]++;
            }
        }
        size_t ball = counts[0];
        for (int r = 1; r <= diam; r++) {
            size_t shell = counts[r];
            ball += shell;
            double ball_limit = p.C1 * std::pow((double)r, p.D);
            double shell_limit = p.C2 * std::pow((double)r, p.D - 1);
            if ((double)ball > ball_limit + 1e-12) {
                rep.holds = false;
                rep.witnesses.push_back({v, r, false, (double)ball, ball_limit});
            }
            if ((double)shell > shell_limit + 1e-12) {
                rep.holds = false;
                rep.witnesses.push_back({v, r, true, (double)shell, shell_limit});
            }
        }
    }
    return rep;
}

/// Largest pairwise graph distance over the support of p (0 for weight <= 1).
inline int geometric_diameter(const PauliString &p, const InteractionGraph &g) {
    if (p.n != g.n) {
        throw DimensionError(cat_str("Pauli on ", p.n, " qubits vs graph with ", g.n, " vertices"));
    }
    std::vector<size_t> s = p.support();
    int d = 0;
    for (size_t a = 0; a < s.size(); a++) {
        for (size_t b = a + 1; b < s.size(); b++) {
            int v = g.dist[s[a] * g.n + s[b]];
            if (v == InteractionGraph::UNREACHABLE) {
                return std::numeric_limits<int>::max();
            }
            d = std::max(d, v);
        }
    }
    return d;
}

}  // namespace tdl

#endif
