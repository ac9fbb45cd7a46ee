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

// Minimal fixed-width packs for the Monte Carlo kernels. With AVX-512F/DQ the
// pack holds 8 doubles; otherwise it degrades to a single scalar lane with
// the same interface. Define ACDIV_NO_SIMD to force the scalar fallback.

#include <cmath>
#include <cstdint>

#include "acdiv/rng.hpp"

#if defined(__AVX512F__) && defined(__AVX512DQ__) && !defined(ACDIV_NO_SIMD)
#include <immintrin.h>
#define ACDIV_SIMD_AVX512 1
#else
#define ACDIV_SIMD_AVX512 0
#endif

namespace acdiv::simd {

#if ACDIV_SIMD_AVX512

inline constexpr int kWidth = 8;
using Mask = unsigned;  // low kWidth bits

struct Vd {
    __m512d v;
};
struct Vu {
    __m512i v;
};

inline Vd splat(double a) noexcept { return {_mm512_set1_pd(a)}; }
inline Vd load(const double* p) noexcept { return {_mm512_load_pd(p)}; }
inline void store(double* p, Vd a) noexcept { _mm512_store_pd(p, a.v); }
inline Vu load(const std::uint64_t* p) noexcept { return {_mm512_load_si512(p)}; }
inline void store(std::uint64_t* p, Vu a) noexcept { _mm512_store_si512(p, a.v); }

inline Vd operator+(Vd a, Vd b) noexcept { return {_mm512_add_pd(a.v, b.v)}; }
inline Vd operator-(Vd a, Vd b) noexcept { return {_mm512_sub_pd(a.v, b.v)}; }
inline Vd operator*(Vd a, Vd b) noexcept { return {_mm512_mul_pd(a.v, b.v)}; }
inline Vd fmadd(Vd a, Vd b, Vd c) noexcept { return {_mm512_fmadd_pd(a.v, b.v, c.v)}; }
inline Vd max(Vd a, Vd b) noexcept { return {_mm512_max_pd(a.v, b.v)}; }
inline Vd min(Vd a, Vd b) noexcept { return {_mm512_min_pd(a.v, b.v)}; }

inline Mask lt(Vd a, Vd b) noexcept { return _mm512_cmp_pd_mask(a.v, b.v, _CMP_LT_OQ); }
inline Mask ge(Vd a, Vd b) noexcept { return _mm512_cmp_pd_mask(a.v, b.v, _CMP_GE_OQ); }
/// m ? a : b, lane-wise
inline Vd select(Mask m, Vd a, Vd b) noexcept {
    return {_mm512_mask_blend_pd(static_cast<__mmask8>(m), b.v, a.v)};
}

/// Advances every counter by gamma and returns the mixed words.
inline Vu advance(Vu& state) noexcept {
    state.v = _mm512_add_epi64(state.v, _mm512_set1_epi64(static_cast<long long>(CounterStream::gamma)));
    __m512i z = state.v;
    z = _mm512_mullo_epi64(_mm512_xor_si512(z, _mm512_srli_epi64(z, 30)),
                           _mm512_set1_epi64(static_cast<long long>(0xBF58476D1CE4E5B9ull)));
    z = _mm512_mullo_epi64(_mm512_xor_si512(z, _mm512_srli_epi64(z, 27)),
                           _mm512_set1_epi64(static_cast<long long>(0x94D049BB133111EBull)));
    return {_mm512_xor_si512(z, _mm512_srli_epi64(z, 31))};
}

/// Advances only the counters of lanes in m; returns mixed words for all lanes.
inline Vu advance_masked(Vu& state, Mask m) noexcept {
    state.v = _mm512_mask_add_epi64(state.v, static_cast<__mmask8>(m), state.v,
                                    _mm512_set1_epi64(static_cast<long long>(CounterStream::gamma)));
    __m512i z = state.v;
    z = _mm512_mullo_epi64(_mm512_xor_si512(z, _mm512_srli_epi64(z, 30)),
                           _mm512_set1_epi64(static_cast<long long>(0xBF58476D1CE4E5B9ull)));
    z = _mm512_mullo_epi64(_mm512_xor_si512(z, _mm512_srli_epi64(z, 27)),
                           _mm512_set1_epi64(static_cast<long long>(0x94D049BB133111EBull)));
    return {_mm512_xor_si512(z, _mm512_srli_epi64(z, 31))};
}

inline Vd to_open_unit(Vu u) noexcept {
    const __m512d h = _mm512_cvtepu64_pd(_mm512_srli_epi64(u.v, 12));
    return {_mm512_mul_pd(_mm512_add_pd(h, _mm512_set1_pd(0.5)), _mm512_set1_pd(0x1.0p-52))};
}

inline Vd sqrt(Vd a) noexcept { return {_mm512_sqrt_pd(a.v)}; }

/// Natural logarithm for positive normal inputs (Cephes rational form);
/// relative error below 1e-14.
inline Vd log(Vd a) noexcept {
    __m512d m = _mm512_getmant_pd(a.v, _MM_MANT_NORM_1_2, _MM_MANT_SIGN_src);
    __m512d e = _mm512_getexp_pd(a.v);
    const __mmask8 big = _mm512_cmp_pd_mask(m, _mm512_set1_pd(1.4142135623730951), _CMP_GT_OQ);
    m = _mm512_mask_mul_pd(m, big, m, _mm512_set1_pd(0.5));
    e = _mm512_mask_add_pd(e, big, e, _mm512_set1_pd(1.0));
    const __m512d x = _mm512_sub_pd(m, _mm512_set1_pd(1.0));
    __m512d p = _mm512_set1_pd(1.01875663804580931796e-4);
    p = _mm512_fmadd_pd(p, x, _mm512_set1_pd(4.97494994976747001425e-1));
    p = _mm512_fmadd_pd(p, x, _mm512_set1_pd(4.70579119878881725854e0));
    p = _mm512_fmadd_pd(p, x, _mm512_set1_pd(1.44989225341610930846e1));
    p = _mm512_fmadd_pd(p, x, _mm512_set1_pd(1.79368678507819816313e1));
    p = _mm512_fmadd_pd(p, x, _mm512_set1_pd(7.70838733755885391666e0));
    __m512d q = _mm512_add_pd(x, _mm512_set1_pd(1.12873587189167450590e1));
    q = _mm512_fmadd_pd(q, x, _mm512_set1_pd(4.52279145837532221105e1));
    q = _mm512_fmadd_pd(q, x, _mm512_set1_pd(8.29875266912776603211e1));
    q = _mm512_fmadd_pd(q, x, _mm512_set1_pd(7.11544750618524138745e1));
    q = _mm512_fmadd_pd(q, x, _mm512_set1_pd(2.31251620126765340583e1));
    const __m512d z = _mm512_mul_pd(x, x);
    __m512d y = _mm512_mul_pd(x, _mm512_div_pd(_mm512_mul_pd(z, p), q));
    y = _mm512_fnmadd_pd(e, _mm512_set1_pd(2.121944400546905827679e-4), y);
    y = _mm512_fnmadd_pd(z, _mm512_set1_pd(0.5), y);
    return {_mm512_fmadd_pd(e, _mm512_set1_pd(0.693359375), _mm512_add_pd(x, y))};
}

/// Ziggurat fast path on every lane; `ok` flags lanes whose value is final.
inline Vd ziggurat_fast(Vu u, const detail::ZigguratTables& t, Mask& ok) noexcept {
    const __m512d hz = _mm512_cvtepi64_pd(_mm512_srai_epi64(u.v, 32));
    const __m512i iz = _mm512_and_si512(u.v, _mm512_set1_epi64(127));
    const __m512d k = _mm512_i64gather_pd(iz, t.kd.data(), 8);
    const __m512d w = _mm512_i64gather_pd(iz, t.w.data(), 8);
    ok = _mm512_cmp_pd_mask(_mm512_abs_pd(hz), k, _CMP_LT_OQ);
    return {_mm512_mul_pd(hz, w)};
}

#else

inline constexpr int kWidth = 1;
using Mask = unsigned;

struct Vd {
    double v;
};
struct Vu {
    std::uint64_t v;
};

inline Vd splat(double a) noexcept { return {a}; }
inline Vd load(const double* p) noexcept { return {*p}; }
inline void store(double* p, Vd a) noexcept { *p = a.v; }
inline Vu load(const std::uint64_t* p) noexcept { return {*p}; }
inline void store(std::uint64_t* p, Vu a) noexcept { *p = a.v; }

inline Vd operator+(Vd a, Vd b) noexcept { return {a.v + b.v}; }
inline Vd operator-(Vd a, Vd b) noexcept { return {a.v - b.v}; }
inline Vd operator*(Vd a, Vd b) noexcept { return {a.v * b.v}; }
inline Vd fmadd(Vd a, Vd b, Vd c) noexcept { return {a.v * b.v + c.v}; }
inline Vd max(Vd a, Vd b) noexcept { return {a.v > b.v ? a.v : b.v}; }
inline Vd min(Vd a, Vd b) noexcept { return {a.v < b.v ? a.v : b.v}; }

inline Mask lt(Vd a, Vd b) noexcept { return a.v < b.v ? 1u : 0u; }
inline Mask ge(Vd a, Vd b) noexcept { return a.v >= b.v ? 1u : 0u; }
inline Vd select(Mask m, Vd a, Vd b) noexcept { return (m & 1u) ? a : b; }

inline Vu advance(Vu& state) noexcept { return {CounterStream::advance(state.v)}; }
inline Vu advance_masked(Vu& state, Mask m) noexcept {
    if (m & 1u) return {CounterStream::advance(state.v)};
    return {mix64(state.v)};
}
inline Vd to_open_unit(Vu u) noexcept { return {CounterStream::to_open_unit(u.v)}; }
inline Vd sqrt(Vd a) noexcept { return {std::sqrt(a.v)}; }
inline Vd log(Vd a) noexcept { return {std::log(a.v)}; }

inline Vd ziggurat_fast(Vu u, const detail::ZigguratTables& t, Mask& ok) noexcept {
    const double hz = static_cast<double>(static_cast<std::int32_t>(u.v >> 32));
    const unsigned iz = static_cast<unsigned>(u.v) & 127u;
    ok = std::abs(hz) < t.kd[iz] ? 1u : 0u;
    return {hz * t.w[iz]};
}

#endif

inline constexpr Mask kAll = (1u << kWidth) - 1u;

/// Calls f(lane) for each set bit of m, lowest first.
template <class F>
inline void for_each_lane(Mask m, F&& f) {
    while (m != 0) {
        const int l = __builtin_ctz(m);
        f(l);
        m &= m - 1;
    }
}

} // namespace acdiv::simd
