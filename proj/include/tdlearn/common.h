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

#ifndef TDLEARN_COMMON_H
#define TDLEARN_COMMON_H

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdl {

constexpr const char *VERSION = "0.3.0";

/// Base class of every error raised by the library.
struct TdlError : std::runtime_error {
    explicit TdlError(const std::string &msg) : std::runtime_error(msg) {
    }
};
/// Operand sizes disagree (qubit counts, matrix dimensions).
struct DimensionError : TdlError {
    using TdlError::TdlError;
};
/// A configured size limit (dense limit, region cap, degree cap) was exceeded.
struct LimitError : TdlError {
    using TdlError::TdlError;
};
/// Malformed text, file, or config input.
struct ParseError : TdlError {
    using TdlError::TdlError;
};
/// Invalid argument values that are not parse problems.
struct ValueError : TdlError {
    using TdlError::TdlError;
};
/// A numerical routine could not produce a trustworthy answer.
struct NumericalError : TdlError {
    using TdlError::TdlError;
};

template <typename... Args>
std::string cat_str(const Args &...args) {
    std::ostringstream out;
    (out << ... << args);
    return out.str();
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic random source.
///
/// Only the raw 64-bit engine output is used (uniforms and normals are derived here rather than
/// through the standard distributions) so that streams are reproducible bit-for-bit across
/// standard library implementations.
struct Rng {
    std::mt19937_64 engine;
    bool has_spare = false;
    double spare = 0;

    explicit Rng(uint64_t seed) : engine(splitmix64(seed)) {
    }

    /// A statistically independent stream derived from a parent seed and a stream label.
    static Rng stream(uint64_t seed, uint64_t label) {
        return Rng(splitmix64(seed) ^ splitmix64(label * 0x632BE59BD9B4E019ULL + 1));
    }

    uint64_t next_u64() {
        return engine();
    }

    /// Uniform in [0, 1).
    double uniform01() {
        return (double)(engine() >> 11) * 0x1.0p-53;
    }

    /// Uniform in the open interval (0, 1).
    double uniform_open01() {
        while (true) {
            double u = uniform01();
            if (u > 0) {
                return u;
            }
        }
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        if (n == 0) {
            throw ValueError("Rng::below(0)");
        }
        uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
        while (true) {
            uint64_t v = engine();
            if (v < limit) {
                return v % n;
            }
        }
    }

    /// Standard normal variate (polar Box-Muller).
    double normal() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u, v, s;
        do {
            u = 2 * uniform01() - 1;
            v = 2 * uniform01() - 1;
            s = u * u + v * v;
        } while (s >= 1 || s == 0);
        double f = std::sqrt(-2 * std::log(s) / s);
        spare = v * f;
        has_spare = true;
        return u * f;
    }
};

/// 64-bit FNV-1a hash, used for fingerprints of ansatz descriptions.
inline uint64_t fnv1a64(const std::string &text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    static const char *digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; k--) {
        s[k] = digits[v & 15];
        v >>= 4;
    }
    return s;
}

/// Shortest round-trip decimal representation of a double, for deterministic text output.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; prec++) {
        snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw ValueError("quantile of empty list");
    }
    std::sort(values.begin(), values.end());
    double pos = q * (double)(values.size() - 1);
    size_t lo = (size_t)std::floor(pos);
    size_t hi = std::min(values.size() - 1, lo + 1);
    double frac = pos - (double)lo;
    return values[lo] * (1 - frac) + values[hi] * frac;
}

inline double median(std::vector<double> values) {
    if (values.empty()) {
        throw ValueError("median of empty list");
    }
    size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double hi = values[mid];
    if (values.size() % 2 == 1) {
        return hi;
    }
    double lo = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lo + hi);
}

}  // namespace tdl

#endif
