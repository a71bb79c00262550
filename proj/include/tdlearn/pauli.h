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

#ifndef TDLEARN_PAULI_H
#define TDLEARN_PAULI_H

#include <bit>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdlearn/common.h"

namespace tdl {

/// Single-qubit Pauli axis.
enum class Axis : uint8_t { X = 0, Y = 1, Z = 2 };

inline char axis_char(Axis a) {
    return "XYZ"[(int)a];
}

inline Axis axis_from_char(char c) {
    switch (c) {
        case 'X':
            return Axis::X;
        case 'Y':
            return Axis::Y;
        case 'Z':
            return Axis::Z;
        default:
            throw ParseError(cat_str("not a Pauli axis: '", c, "'"));
    }
}

/// The (x, z) symplectic bits of an axis. Y is (1, 1) because P_(1,1) = i X Z = Y.
inline bool axis_x(Axis a) {
    return a != Axis::Z;
}
inline bool axis_z(Axis a) {
    return a != Axis::X;
}

/// An n-qubit Pauli string P_(x,z) = prod_j i^{x_j z_j} X^{x_j} Z^{z_j}, without phase.
///
/// Bits are packed 64 qubits per word. Qubit 0 is the leftmost character of the text form.
struct PauliString {
    size_t n = 0;
    std::vector<uint64_t> xs;
    std::vector<uint64_t> zs;

    PauliString() = default;
    explicit PauliString(size_t num_qubits)
        : n(num_qubits), xs((num_qubits + 63) / 64, 0), zs((num_qubits + 63) / 64, 0) {
    }

    static PauliString single(size_t num_qubits, size_t q, Axis a) {
        PauliString p(num_qubits);
        p.set(q, axis_x(a), axis_z(a));
        return p;
    }

    /// Parses a string over {I,X,Y,Z}. A leading "+" is accepted; other phases are rejected
    /// (use PhasedPauli::from_str for those).
    static PauliString from_str(std::string_view text);

    /// Packed index x | (z << n), valid for n <= 32. Used by dense-basis tables.
    uint64_t index() const {
        if (n > 32) {
            throw LimitError("PauliString::index requires n <= 32");
        }
        uint64_t x = xs.empty() ? 0 : xs[0];
        uint64_t z = zs.empty() ? 0 : zs[0];
        return x | (z << n);
    }

    static PauliString from_index(size_t num_qubits, uint64_t idx) {
        if (num_qubits > 32) {
            throw LimitError("PauliString::from_index requires n <= 32");
        }
        PauliString p(num_qubits);
        if (num_qubits > 0) {
            uint64_t mask = num_qubits == 64 ? ~0ULL : ((1ULL << num_qubits) - 1);
            p.xs[0] = idx & mask;
            p.zs[0] = (idx >> num_qubits) & mask;
        }
        return p;
    }

    bool x(size_t q) const {
        return (xs[q >> 6] >> (q & 63)) & 1;
    }
    bool z(size_t q) const {
        return (zs[q >> 6] >> (q & 63)) & 1;
    }
    void set(size_t q, bool xbit, bool zbit) {
        uint64_t m = 1ULL << (q & 63);
        xs[q >> 6] = xbit ? (xs[q >> 6] | m) : (xs[q >> 6] & ~m);
        zs[q >> 6] = zbit ? (zs[q >> 6] | m) : (zs[q >> 6] & ~m);
    }

    /// Character at qubit q: one of 'I', 'X', 'Y', 'Z'.
    char at(size_t q) const {
        return "IXZY"[x(q) + 2 * z(q)];
    }

    /// Axis at qubit q; only valid when the qubit is in the support.
    Axis axis(size_t q) const {
        return x(q) ? (z(q) ? Axis::Y : Axis::X) : Axis::Z;
    }

    void set_char(size_t q, char c) {
        switch (c) {
            case 'I':
                set(q, false, false);
                break;
            case 'X':
                set(q, true, false);
                break;
            case 'Y':
                set(q, true, true);
                break;
            case 'Z':
                set(q, false, true);
                break;
            default:
                throw ParseError(cat_str("not a Pauli character: '", c, "'"));
        }
    }

    size_t weight() const {
        size_t w = 0;
        for (size_t k = 0; k < xs.size(); k++) {
            w += std::popcount(xs[k] | zs[k]);
        }
        return w;
    }

    std::vector<size_t> support() const {
        std::vector<size_t> out;
        for (size_t q = 0; q < n; q++) {
            if (x(q) || z(q)) {
                out.push_back(q);
            }
        }
        return out;
    }

    bool is_identity() const {
        for (size_t k = 0; k < xs.size(); k++) {
            if (xs[k] | zs[k]) {
                return false;
            }
        }
        return true;
    }

    std::string str() const {
        std::string s(n, 'I');
        for (size_t q = 0; q < n; q++) {
            s[q] = at(q);
        }
        return s;
    }

    bool operator==(const PauliString &other) const {
        return n == other.n && xs == other.xs && zs == other.zs;
    }
    bool operator!=(const PauliString &other) const {
        return !(*this == other);
    }
    /// Total order: by qubit count, then lexicographically on the text form with I < X < Y < Z.
    bool operator<(const PauliString &other) const {
        if (n != other.n) {
            return n < other.n;
        }
        for (size_t q = 0; q < n; q++) {
            int a = rank(at(q));
            int b = rank(other.at(q));
            if (a != b) {
                return a < b;
            }
        }
        return false;
    }

   private:
    static int rank(char c) {
        return c == 'I' ? 0 : c == 'X' ? 1 : c == 'Y' ? 2 : 3;
    }
};

struct PauliHash {
    size_t operator()(const PauliString &p) const {
        uint64_t h = splitmix64(p.n);
        for (size_t k = 0; k < p.xs.size(); k++) {
            h = splitmix64(h ^ p.xs[k]);
            h = splitmix64(h ^ (p.zs[k] * 3));
        }
        return (size_t)h;
    }
};

/// A Pauli string times an exact fourth root of unity i^phase.
struct PhasedPauli {
    uint8_t phase = 0;  // exponent e of i^e, in {0, 1, 2, 3}
    PauliString pauli;

    /// Text form always carries a prefix from {+, -, +i, -i}. Lowercase i is the phase,
    /// uppercase I is the identity letter.
    std::string str() const {
        static const char *prefixes[4] = {"+", "+i", "-", "-i"};
        return prefixes[phase & 3] + pauli.str();
    }

    static PhasedPauli from_str(std::string_view text) {
        PhasedPauli result;
        std::string_view body = text;
        if (body.starts_with("+i")) {
            result.phase = 1;
            body.remove_prefix(2);
        } else if (body.starts_with("-i")) {
            result.phase = 3;
            body.remove_prefix(2);
        } else if (body.starts_with("+")) {
            body.remove_prefix(1);
        } else if (body.starts_with("-")) {
            result.phase = 2;
            body.remove_prefix(1);
        }
        result.pauli = PauliString(body.size());
        for (size_t q = 0; q < body.size(); q++) {
            result.pauli.set_char(q, body[q]);
        }
        return result;
    }

    bool operator==(const PhasedPauli &other) const {
        return phase == other.phase && pauli == other.pauli;
    }
    bool operator!=(const PhasedPauli &other) const {
        return !(*this == other);
    }
};

inline PauliString PauliString::from_str(std::string_view text) {
    PhasedPauli p = PhasedPauli::from_str(text);
    if (p.phase != 0) {
        throw ParseError(cat_str("unexpected phase in Pauli string '", text, "'"));
    }
    return p.pauli;
}

namespace internal {

inline void check_same_size(const PauliString &p, const PauliString &q) {
    if (p.n != q.n) {
        throw DimensionError(cat_str("Pauli length mismatch: ", p.n, " vs ", q.n));
    }
}

}  // namespace internal

/// Exact product P_(x,z) P_(x',z') = i^e P_(x^x', z^z').
///
/// With the convention P_(x,z) = i^{x.z} X^x Z^z, moving Z^z past X^{x'} costs (-1)^{z.x'} and
/// re-normalizing X^{x^x'} Z^{z^z'} costs i^{-(x^x').(z^z')}, so
///     e = x.z + x'.z' + 2 z.x' - (x^x').(z^z')  (mod 4).
/// This reproduces X Z = -iY, Z X = iY, X Y = iZ (checked against dense matrices in the tests).
inline PhasedPauli multiply(const PauliString &p, const PauliString &q) {
    internal::check_same_size(p, q);
    PhasedPauli r;
    r.pauli = PauliString(p.n);
    int e = 0;
    for (size_t k = 0; k < p.xs.size(); k++) {
        uint64_t x1 = p.xs[k], z1 = p.zs[k], x2 = q.xs[k], z2 = q.zs[k];
        uint64_t x3 = x1 ^ x2, z3 = z1 ^ z2;
        e += std::popcount(x1 & z1) + std::popcount(x2 & z2) + 2 * std::popcount(z1 & x2) -
             std::popcount(x3 & z3);
        r.pauli.xs[k] = x3;
        r.pauli.zs[k] = z3;
    }
    r.phase = (uint8_t)(((e % 4) + 4) % 4);
    return r;
}

inline PhasedPauli multiply(const PhasedPauli &p, const PhasedPauli &q) {
    PhasedPauli r = multiply(p.pauli, q.pauli);
    r.phase = (uint8_t)((r.phase + p.phase + q.phase) & 3);
    return r;
}

/// True iff the two strings anticommute: (x.z' + z.x') is odd.
inline bool anticommutes(const PauliString &p, const PauliString &q) {
    internal::check_same_size(p, q);
    int parity = 0;
    for (size_t k = 0; k < p.xs.size(); k++) {
        parity ^= std::popcount((p.xs[k] & q.zs[k]) ^ (p.zs[k] & q.xs[k])) & 1;
    }
    return parity;
}

/// The map (1/2)[P, Q]: equals P Q when the strings anticommute and vanishes otherwise.
inline std::optional<PhasedPauli> commutator_half(const PauliString &p, const PauliString &q) {
    if (!anticommutes(p, q)) {
        return std::nullopt;
    }
    return multiply(p, q);
}

inline size_t weight(const PauliString &p) {
    return p.weight();
}

inline std::vector<size_t> support(const PauliString &p) {
    return p.support();
}

/// Multiplies a unit phase exponent into a complex number.
template <typename C>
C apply_phase(uint8_t phase, C v) {
    switch (phase & 3) {
        case 0:
            return v;
        case 1:
            return C(-v.imag(), v.real());
        case 2:
            return -v;
        default:
            return C(v.imag(), -v.real());
    }
}

/// Enumerates all 4^|region| Pauli strings supported inside `region`, in a fixed order:
/// region qubit r contributes base-4 digit r (I, X, Y, Z), least significant first.
inline std::vector<PauliString> paulis_on_region(size_t n, const std::vector<size_t> &region) {
    size_t k = region.size();
    if (k > 16) {
        throw LimitError("paulis_on_region: region too large");
    }
    size_t total = (size_t)1 << (2 * k);
    std::vector<PauliString> out;
    out.reserve(total);
    static const char letters[4] = {'I', 'X', 'Y', 'Z'};
    for (size_t code = 0; code < total; code++) {
        PauliString p(n);
        for (size_t r = 0; r < k; r++) {
            p.set_char(region[r], letters[(code >> (2 * r)) & 3]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace tdl

#endif
