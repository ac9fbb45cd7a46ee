/*
   Copyright 2026 The acdiv Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace acdiv {

/// SplitMix64 finaliser: a bijective 64-bit avalanche mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Counter-based stream addressed by (seed, stream, path).
///
/// Draw i of path p is mix64(key + (p * 2^32 + i) * gamma), with key derived
/// from (seed, stream). Because gamma is odd the map (p, i) -> state is
/// injective, so no two paths share a draw as long as each uses fewer than
/// 2^32 draws; results therefore do not depend on how paths are scheduled.
class CounterStream {
public:
    static constexpr std::uint64_t gamma = 0x9E3779B97F4A7C15ull;

    CounterStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) noexcept
        : state_(origin(seed, stream, path)) {}

    static constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t stream) noexcept {
        return mix64(mix64(seed) ^ (stream * 0xD1B54A32D192ED03ull));
    }

    /// Counter state before the first draw of a path.
    static constexpr std::uint64_t origin(std::uint64_t seed, std::uint64_t stream,
                                          std::uint64_t path) noexcept {
        return key(seed, stream) + (path << 32) * gamma;
    }

    std::uint64_t next() noexcept { return advance(state_); }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept { return to_open_unit(next()); }

    /// One draw from an externally held counter state (used by SIMD lanes).
    static std::uint64_t advance(std::uint64_t& state) noexcept {
        state += gamma;
        return mix64(state);
    }

    static double to_open_unit(std::uint64_t u) noexcept {
        // 52 bits keep (k + 1/2) 2^-52 exact, so the result is never 0 or 1.
        return (static_cast<double>(u >> 12) + 0.5) * 0x1.0p-52;
    }

private:
    std::uint64_t state_;
};

/// Non-owning view of a counter state held elsewhere; same draws as CounterStream.
class CounterRef {
public:
    explicit CounterRef(std::uint64_t& state) noexcept : state_(&state) {}
    std::uint64_t next() noexcept { return CounterStream::advance(*state_); }
    double uniform() noexcept { return CounterStream::to_open_unit(next()); }

private:
    std::uint64_t* state_;
};

namespace detail {

// Marsaglia & Tsang 128-layer ziggurat tables for the standard normal.
struct ZigguratTables {
    std::array<std::uint32_t, 128> k{};
    std::array<double, 128> w{};
    std::array<double, 128> f{};
    std::array<double, 128> kd{};  // k as double, for vectorised acceptance tests

    ZigguratTables() {
        constexpr double m1 = 2147483648.0;
        constexpr double vn = 9.91256303526217e-3;
        double dn = 3.442619855899;
        double tn = dn;
        const double q = vn / std::exp(-0.5 * dn * dn);
        k[0] = static_cast<std::uint32_t>((dn / q) * m1);
        k[1] = 0;
        w[0] = q / m1;
        w[127] = dn / m1;
        f[0] = 1.0;
        f[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; --i) {
            dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
            k[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
            tn = dn;
            f[i] = std::exp(-0.5 * dn * dn);
            w[i] = dn / m1;
        }
        for (int i = 0; i < 128; ++i) kd[i] = static_cast<double>(k[i]);
    }
};

inline const ZigguratTables& ziggurat_tables() {
    static const ZigguratTables t;
    return t;
}

} // namespace detail

/// Standard normal variates by the ziggurat method over any 64-bit source.
///
/// Stateless apart from the shared tables, so one instance serves many
/// streams. Each attempt consumes one 64-bit word: the high half is the
/// signed abscissa, the low seven bits select the layer.
class ZigguratNormal {
public:
    ZigguratNormal() noexcept : t_(detail::ziggurat_tables()) {}

    template <class Source>
    double operator()(Source& src) const noexcept {
        return from_word(src, src.next());
    }

    /// Completes a draw whose first word u was already taken from src.
    template <class Source>
    double from_word(Source& src, std::uint64_t u) const noexcept {
        const auto hz = static_cast<std::int32_t>(u >> 32);
        const unsigned iz = static_cast<unsigned>(u) & 127u;
        if (abs32(hz) < t_.k[iz]) return hz * t_.w[iz];
        return slow(src, hz, iz);
    }

    const detail::ZigguratTables& tables() const noexcept { return t_; }

private:
    static std::uint32_t abs32(std::int32_t v) noexcept {
        return v < 0 ? 0u - static_cast<std::uint32_t>(v) : static_cast<std::uint32_t>(v);
    }

    template <class Source>
    double slow(Source& src, std::int32_t hz, unsigned iz) const noexcept {
        constexpr double r = 3.442619855899;
        for (;;) {
            if (iz == 0) {
                double x, y;
                do {
                    x = -std::log(src.uniform()) / r;
                    y = -std::log(src.uniform());
                } while (y + y < x * x);
                return hz > 0 ? r + x : -r - x;
            }
            const double x = hz * t_.w[iz];
            if (t_.f[iz] + src.uniform() * (t_.f[iz - 1] - t_.f[iz]) < std::exp(-0.5 * x * x))
                return x;
            const std::uint64_t u = src.next();
            hz = static_cast<std::int32_t>(u >> 32);
            iz = static_cast<unsigned>(u) & 127u;
            if (abs32(hz) < t_.k[iz]) return hz * t_.w[iz];
        }
    }

    const detail::ZigguratTables& t_;
};

} // namespace acdiv
