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

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "acdiv/errors.hpp"
#include "acdiv/params.hpp"
#include "acdiv/rng.hpp"
#include "acdiv/simd.hpp"

namespace acdiv {

/// How the barrier at 0 is treated inside one Euler step.
///
/// projection: ruin iff the step endpoint is negative; reflection by max(0, .).
/// bridge: the Brownian bridge between the endpoints is taken into account, so
/// ruin is also declared with the exact crossing probability and the
/// reflection amount is the exact Skorokhod regulator of the bridge.
enum class BoundaryScheme { projection, bridge };

inline const char* to_string(BoundaryScheme s) noexcept {
    return s == BoundaryScheme::projection ? "projection" : "bridge";
}

struct SimConfig {
    double dt = 1e-3;
    double horizon = 0.0;          ///< 0 selects the automatic horizon
    std::size_t n_paths = 100000;
    std::uint64_t seed = 20260101;
    unsigned threads = 0;          ///< 0 uses all hardware threads
    BoundaryScheme scheme = BoundaryScheme::projection;
    bool antithetic = false;
    /// Also run each path on the 2 dt grid with the same Brownian increments
    /// and report an a-posteriori discretization bound.
    bool estimate_discretization = false;
    double tail_tolerance = 1e-4;  ///< target for the automatic horizon

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw InvalidParameter("dt must be finite and > 0");
        if (!(horizon >= 0.0) || !std::isfinite(horizon))
            throw InvalidParameter("horizon must be finite and >= 0 (0 = automatic)");
        if (horizon > 0.0 && dt > horizon)
            throw InvalidParameter("dt must not exceed the horizon");
        if (n_paths == 0) throw InvalidParameter("n_paths must be > 0");
        if (antithetic && n_paths % 2 != 0)
            throw InvalidParameter("antithetic sampling needs an even n_paths");
        if (!(tail_tolerance > 0.0)) throw InvalidParameter("tail_tolerance must be > 0");
    }
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    double tail_bound = 0.0;            ///< bound on the contribution lost beyond the horizon
    double horizon = 0.0;
    double discretization_bound = 0.0;  ///< 0 unless estimate_discretization was set
    double coarse_shift = 0.0;          ///< mean(dt) - mean(2 dt), coupled
    double coarse_shift_std_error = 0.0;

    /// |mean - reference| <= k std_error + tail_bound + discretization_bound
    bool covers(double reference, double k = 3.0) const noexcept {
        return std::abs(mean - reference) <= k * std_error + tail_bound + discretization_bound;
    }
};

struct RefractedPath {
    double dividends = 0.0;      ///< sum of e^{-q t} l(X_t) dt until ruin or horizon
    double ruin_discount = 0.0;  ///< e^{-q tau} if ruined before the horizon, else 0
    double ruin_time = std::numeric_limits<double>::infinity();
    bool censored = false;       ///< survived to the horizon
};

struct ReflectedPath {
    double dividends = 0.0;
    double injections = 0.0;     ///< sum of e^{-q t} dG_t
    double total_injected = 0.0; ///< G_T, undiscounted
    double min_level = 0.0;      ///< smallest state visited on the grid
};

/// Level the tail heuristic treats as an upper envelope: max(x0, b) + 10 sigma / sqrt(2q).
inline double tail_level(const ModelParams& m, double b, double x0) noexcept {
    return std::max(x0, b) + 10.0 * m.sigma() / std::sqrt(2.0 * m.q());
}

/// Dividends still owed after T, per unit e^{-qT}: (K xbar + S) / q.
inline double dividend_tail_scale(const ModelParams& m, const ProblemParams& p, double b, double x0) {
    return (p.K * tail_level(m, b, x0) + p.S) / m.q();
}

/// Refracted functional at stake after T: dividends plus the penalty.
inline double refracted_tail_scale(const ModelParams& m, const ProblemParams& p, double b, double x0) {
    return dividend_tail_scale(m, p, b, x0) + p.P;
}

/// Reflected functional at stake after T. Integrating dG by parts, injections
/// after T are at most xbar plus the dividends paid after T.
inline double reflected_tail_scale(const ModelParams& m, const ProblemParams& p, double b, double x0) {
    const double div = dividend_tail_scale(m, p, b, x0);
    return div + p.beta * (tail_level(m, b, x0) + div);
}

/// Smallest T with e^{-qT} scale <= tol.
inline double horizon_for(double scale, double q, double tol) {
    return std::max(0.0, std::log(scale / tol) / q);
}

/// Horizon actually used: explicit, or chosen so the dividend tail is below tolerance.
inline double simulation_horizon(const ModelParams& m, const ProblemParams& p, double b, double x0,
                                 const SimConfig& c) {
    if (c.horizon > 0.0) return c.horizon;
    return std::max(c.dt, horizon_for(dividend_tail_scale(m, p, b, x0), m.q(), c.tail_tolerance));
}

namespace detail {

// Constants of one time grid.
struct Grid {
    double dt, sqdt, decay;
    double bridge_scale;   // 2 / (sigma^2 dt)
    double bridge_cutoff;  // x0 x1 above this => crossing probability < e^{-40}
    double two_var;        // 2 sigma^2 dt

    Grid(const ModelParams& m, double h)
        : dt(h), sqdt(m.sigma() * std::sqrt(h)), decay(std::exp(-m.q() * h)),
          bridge_scale(2.0 / (m.sigma2() * h)), bridge_cutoff(40.0 / bridge_scale),
          two_var(2.0 * m.sigma2() * h) {}
};

struct Dynamics {
    double mu, K, S, b;
    Grid fine, coarse;
    std::size_t n_steps;  // fine steps; even when coupled
    bool bridge, coupled;

    Dynamics(const ModelParams& m, const ProblemParams& p, double b_, double T, const SimConfig& c)
        : mu(m.mu()), K(p.K), S(p.S), b(b_), fine(m, c.dt), coarse(m, 2.0 * c.dt),
          n_steps(static_cast<std::size_t>(std::ceil(T / c.dt - 1e-9))),
          bridge(c.scheme == BoundaryScheme::bridge), coupled(c.estimate_discretization) {
        if (coupled && n_steps % 2 != 0) ++n_steps;
        if (n_steps == 0) n_steps = coupled ? 2 : 1;
    }

    double rate(double x) const noexcept { return x >= b ? K * x + S : 0.0; }
};

// Streams: the main one drives the fine path, the auxiliary one supplies
// the coarse path's bridge uniforms so coupling never perturbs the fine path.
inline constexpr std::uint64_t kRefractedStream = 1;
inline constexpr std::uint64_t kReflectedStream = 2;
inline constexpr std::uint64_t kAuxOffset = 0x100;

inline constexpr int W = simd::kWidth;
using simd::Mask;
using simd::Vd;
using simd::Vu;

// Per-path outputs; the coarse entries are zero unless coupled.
inline constexpr std::size_t kRefractedOut = 6;  // div, ruin, tau, censored, coarse div, coarse ruin
inline constexpr std::size_t kReflectedOut = 6;  // div, inj, total, min, coarse div, coarse inj

/// Virtual path v -> (stream path, sign): antithetic pairs share a stream.
inline void virtual_path(const SimConfig& c, std::size_t v, std::uint64_t& path, double& sign) {
    if (c.antithetic) {
        path = v / 2;
        sign = (v & 1u) ? -1.0 : 1.0;
    } else {
        path = v;
        sign = 1.0;
    }
}

// Vector constants of one grid.
struct GridPack {
    Vd dt, sqdt, decay, cutoff;
    double bridge_scale, two_var;
    explicit GridPack(const Grid& g)
        : dt(simd::splat(g.dt)), sqdt(simd::splat(g.sqdt)), decay(simd::splat(g.decay)),
          cutoff(simd::splat(g.bridge_cutoff)), bridge_scale(g.bridge_scale), two_var(g.two_var) {}
};

// Structure-of-arrays state of W killed (never-inject) paths.
struct KilledGroup {
    alignas(64) std::uint64_t st[W];
    alignas(64) std::uint64_t aux[W];
    alignas(64) double x[W];
    alignas(64) double disc[W];
    alignas(64) double acc[W];
    alignas(64) double ruin[W];
    alignas(64) double tau[W];
    alignas(64) double xc[W];
    alignas(64) double discc[W];
    alignas(64) double accc[W];
    alignas(64) double ruinc[W];
    alignas(64) double zsum[W];
    alignas(64) double step[W];
    alignas(64) double sign[W];
    std::size_t vpath[W];
    Mask active = 0, alive = 0, alivec = 0, odd = 0;
};

// Draws one normal per lane; slow-path lanes are completed one by one.
inline Vd draw_normals(Vu& st, std::uint64_t* st_mem, const ZigguratNormal& normal) {
    Mask ok;
    const Vu u = simd::advance(st);
    Vd z = simd::ziggurat_fast(u, normal.tables(), ok);
    if ((ok & simd::kAll) != simd::kAll) {
        alignas(64) std::uint64_t ub[W];
        alignas(64) double zb[W];
        simd::store(st_mem, st);
        simd::store(ub, u);
        simd::store(zb, z);
        simd::for_each_lane(~ok & simd::kAll, [&](int l) {
            CounterRef r(st_mem[l]);
            zb[l] = normal.from_word(r, ub[l]);
        });
        st = simd::load(st_mem);
        z = simd::load(zb);
    }
    return z;
}

// Lanes in `cand` are ruined with the bridge crossing probability
// exp(-scale x x1), i.e. when log U < -scale x x1. Only their counters advance.
inline Mask bridge_ruin(Mask cand, Vd x, Vd x1, Vu& st, double scale) {
    const Vd lu = simd::log(simd::to_open_unit(simd::advance_masked(st, cand)));
    return cand & simd::lt(lu, simd::splat(-scale) * x * x1);
}

// Regulator over one step for lanes in `cand`: minus the minimum of the
// Brownian bridge from y to x1 when that minimum is negative, else 0.
inline Vd bridge_push(Mask cand, Vd y, Vd x1, Vu& st, double two_var) {
    const Vd zero = simd::splat(0.0);
    const Vd lu = simd::log(simd::to_open_unit(simd::advance_masked(st, cand)));
    const Vd dx = x1 - y;
    const Vd m = simd::splat(0.5) * (y + x1 - simd::sqrt(simd::fmadd(dx, dx, simd::splat(-two_var) * lu)));
    return simd::select(cand, simd::max(zero, zero - m), zero);
}

/// Simulates killed paths for virtual indices [lo, hi); emit(v, out[kRefractedOut]).
/// W paths advance together; a finished lane is refilled with the next index.
template <class Emit>
void run_killed(const Dynamics& d, const SimConfig& cfg, double x0, std::size_t lo, std::size_t hi,
                Emit&& emit) {
    if (x0 <= 0.0 && cfg.scheme == BoundaryScheme::bridge) {
        // Under continuous monitoring a path started at 0 is ruined at once.
        const double ruined[kRefractedOut] = {0.0, 1.0, 0.0, 0.0, 0.0, 1.0};
        for (std::size_t v = lo; v < hi; ++v) emit(v, ruined);
        return;
    }
    const ZigguratNormal normal;
    KilledGroup g;
    std::size_t next = lo;
    auto start = [&](int l) {
        const Mask bit = 1u << l;
        g.active &= ~bit;
        g.alive &= ~bit;
        g.alivec &= ~bit;
        g.odd &= ~bit;
        if (next >= hi) return;
        const std::size_t v = next++;
        std::uint64_t path;
        double sign;
        virtual_path(cfg, v, path, sign);
        g.st[l] = CounterStream::origin(cfg.seed, kRefractedStream, path);
        g.aux[l] = CounterStream::origin(cfg.seed, kRefractedStream + kAuxOffset, path);
        g.x[l] = g.xc[l] = x0;
        g.disc[l] = g.discc[l] = 1.0;
        g.acc[l] = g.accc[l] = g.ruin[l] = g.ruinc[l] = g.tau[l] = g.zsum[l] = g.step[l] = 0.0;
        g.sign[l] = sign;
        g.vpath[l] = v;
        g.active |= bit;
        g.alive |= bit;
        g.alivec |= bit;
    };
    for (int l = 0; l < W; ++l) start(l);

    const Vd vb = simd::splat(d.b), vK = simd::splat(d.K), vS = simd::splat(d.S);
    const Vd vmu = simd::splat(d.mu), zero = simd::splat(0.0), one = simd::splat(1.0);
    const Vd vn = simd::splat(static_cast<double>(d.n_steps)), half = simd::splat(std::sqrt(0.5));
    const GridPack fg(d.fine), cg(d.coarse);

    while (g.active != 0) {
        Vu st = simd::load(g.st), aux = simd::load(g.aux);
        Vd x = simd::load(g.x), disc = simd::load(g.disc), acc = simd::load(g.acc);
        Vd ruin = simd::load(g.ruin), tau = simd::load(g.tau), step = simd::load(g.step);
        Vd xc = simd::load(g.xc), discc = simd::load(g.discc), accc = simd::load(g.accc);
        Vd ruinc = simd::load(g.ruinc), zsum = simd::load(g.zsum);
        const Vd sign = simd::load(g.sign);
        Mask alive = g.alive, alivec = g.alivec, odd = g.odd;
        const Mask active = g.active;
        Mask done = 0;
        while (done == 0) {
            const Vd z = draw_normals(st, g.st, normal) * sign;

            const Vd l = simd::select(simd::ge(x, vb), simd::fmadd(vK, x, vS), zero);
            acc = simd::select(alive, simd::fmadd(disc, l, acc), acc);
            const Vd x1 = simd::fmadd(fg.sqdt, z, simd::fmadd(vmu - l, fg.dt, x));
            const Vd dn = disc * fg.decay;
            Mask neg = simd::lt(x1, zero) & alive;
            if (d.bridge) {
                const Mask cand = alive & ~neg & simd::lt(x * x1, fg.cutoff);
                if (cand != 0) neg |= bridge_ruin(cand, x, x1, st, fg.bridge_scale);
            }
            ruin = simd::select(neg, dn, ruin);
            tau = simd::select(neg, (step + one) * fg.dt, tau);
            disc = simd::select(alive, dn, disc);
            alive &= ~neg;
            x = simd::select(alive, x1, x);

            if (d.coupled) {
                zsum = zsum + z;
                const Mask cm = alivec & odd;
                if (cm != 0) {
                    const Vd zc = zsum * half;
                    const Vd lc = simd::select(simd::ge(xc, vb), simd::fmadd(vK, xc, vS), zero);
                    accc = simd::select(cm, simd::fmadd(discc, lc, accc), accc);
                    const Vd xc1 = simd::fmadd(cg.sqdt, zc, simd::fmadd(vmu - lc, cg.dt, xc));
                    const Vd dnc = discc * cg.decay;
                    Mask negc = simd::lt(xc1, zero) & cm;
                    if (d.bridge) {
                        const Mask cand = cm & ~negc & simd::lt(xc * xc1, cg.cutoff);
                        if (cand != 0) negc |= bridge_ruin(cand, xc, xc1, aux, cg.bridge_scale);
                    }
                    ruinc = simd::select(negc, dnc, ruinc);
                    discc = simd::select(cm, dnc, discc);
                    alivec &= ~negc;
                    xc = simd::select(cm & ~negc, xc1, xc);
                }
                zsum = simd::select(odd, zero, zsum);
                odd ^= active;
            }
            step = step + one;
            const Mask dead = d.coupled ? ~alive & ~alivec : ~alive;
            done = active & (simd::ge(step, vn) | dead);
        }
        simd::store(g.st, st);
        simd::store(g.aux, aux);
        simd::store(g.x, x);
        simd::store(g.disc, disc);
        simd::store(g.acc, acc);
        simd::store(g.ruin, ruin);
        simd::store(g.tau, tau);
        simd::store(g.step, step);
        simd::store(g.xc, xc);
        simd::store(g.discc, discc);
        simd::store(g.accc, accc);
        simd::store(g.ruinc, ruinc);
        simd::store(g.zsum, zsum);
        g.alive = alive;
        g.alivec = alivec;
        g.odd = odd;
        simd::for_each_lane(done, [&](int l) {
            const bool censored = (alive >> l) & 1u;
            const double out[kRefractedOut] = {g.acc[l] * d.fine.dt, g.ruin[l],
                                               censored ? 0.0 : g.tau[l], censored ? 1.0 : 0.0,
                                               g.accc[l] * d.coarse.dt, g.ruinc[l]};
            emit(g.vpath[l], out);
            start(l);
        });
    }
}

/// Simulates reflected paths for virtual indices [lo, hi); emit(v, out[kReflectedOut]).
/// Every path runs the full horizon, so groups of W advance in lockstep.
template <class Emit>
void run_reflected(const Dynamics& d, const SimConfig& cfg, double y0, std::size_t lo,
                   std::size_t hi, Emit&& emit) {
    const ZigguratNormal normal;
    const Vd vb = simd::splat(d.b), vK = simd::splat(d.K), vS = simd::splat(d.S);
    const Vd vmu = simd::splat(d.mu), zero = simd::splat(0.0), half = simd::splat(std::sqrt(0.5));
    const GridPack fg(d.fine), cg(d.coarse);
    alignas(64) std::uint64_t stm[W];
    alignas(64) std::uint64_t auxm[W];
    alignas(64) double sg[W];

    for (std::size_t first = lo; first < hi; first += W) {
        Mask active = 0;
        for (int l = 0; l < W; ++l) {
            std::uint64_t path = 0;
            double sign = 1.0;
            if (first + l < hi) {
                virtual_path(cfg, first + l, path, sign);
                active |= 1u << l;
            }
            stm[l] = CounterStream::origin(cfg.seed, kReflectedStream, path);
            auxm[l] = CounterStream::origin(cfg.seed, kReflectedStream + kAuxOffset, path);
            sg[l] = sign;
        }
        Vu st = simd::load(stm), aux = simd::load(auxm);
        const Vd sign = simd::load(sg);
        Vd y = simd::splat(y0), disc = simd::splat(1.0), acc = zero, inj = zero, tot = zero, low = y;
        Vd yc = y, discc = disc, accc = zero, injc = zero, zsum = zero;
        for (std::size_t i = 0; i < d.n_steps; ++i) {
            const Vd z = draw_normals(st, stm, normal) * sign;

            const Vd l = simd::select(simd::ge(y, vb), simd::fmadd(vK, y, vS), zero);
            acc = simd::fmadd(disc, l, acc);
            const Vd x1 = simd::fmadd(fg.sqdt, z, simd::fmadd(vmu - l, fg.dt, y));
            disc = disc * fg.decay;
            Vd push;
            if (d.bridge) {
                push = zero;
                const Mask cand = simd::lt(x1, zero) | simd::lt(y * x1, fg.cutoff);
                if (cand != 0) push = bridge_push(cand, y, x1, st, fg.two_var);
            } else {
                push = simd::max(zero, zero - x1);
            }
            y = x1 + push;
            inj = simd::fmadd(disc, push, inj);
            tot = tot + push;
            low = simd::min(low, y);

            if (d.coupled) {
                zsum = zsum + z;
                if (i & 1u) {
                    const Vd zc = zsum * half;
                    const Vd lc = simd::select(simd::ge(yc, vb), simd::fmadd(vK, yc, vS), zero);
                    accc = simd::fmadd(discc, lc, accc);
                    const Vd xc1 = simd::fmadd(cg.sqdt, zc, simd::fmadd(vmu - lc, cg.dt, yc));
                    discc = discc * cg.decay;
                    Vd pc;
                    if (d.bridge) {
                        pc = zero;
                        const Mask cand = simd::lt(xc1, zero) | simd::lt(yc * xc1, cg.cutoff);
                        if (cand != 0) pc = bridge_push(cand, yc, xc1, aux, cg.two_var);
                    } else {
                        pc = simd::max(zero, zero - xc1);
                    }
                    yc = xc1 + pc;
                    injc = simd::fmadd(discc, pc, injc);
                    zsum = zero;
                }
            }
        }
        alignas(64) double b_acc[W], b_inj[W], b_tot[W], b_low[W], b_accc[W], b_injc[W];
        simd::store(b_acc, acc);
        simd::store(b_inj, inj);
        simd::store(b_tot, tot);
        simd::store(b_low, low);
        simd::store(b_accc, accc);
        simd::store(b_injc, injc);
        simd::for_each_lane(active, [&](int l) {
            const double out[kReflectedOut] = {b_acc[l] * d.fine.dt, b_inj[l], b_tot[l],
                                               b_low[l], b_accc[l] * d.coarse.dt, b_injc[l]};
            emit(first + l, out);
        });
    }
}

/// Welford accumulator; merge() follows Chan et al. Blocks are merged in
/// index order, so the totals do not depend on the thread count.
struct Moments {
    double n = 0.0, mean = 0.0, m2 = 0.0;
    double lo = std::numeric_limits<double>::infinity();

    void add(double v) noexcept {
        n += 1.0;
        lo = std::min(lo, v);
        const double dv = v - mean;
        mean += dv / n;
        m2 += dv * (v - mean);
    }

    void merge(const Moments& o) noexcept {
        if (o.n == 0.0) return;
        if (n == 0.0) { *this = o; return; }
        lo = std::min(lo, o.lo);
        const double tot = n + o.n;
        const double dv = o.mean - mean;
        mean += dv * (o.n / tot);
        m2 += o.m2 + dv * dv * (n * o.n / tot);
        n = tot;
    }

    double std_error() const noexcept { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs body(block) for block in [0, n_blocks) on a pool of threads.
template <class Body>
void parallel_blocks(std::size_t n_blocks, unsigned threads, Body&& body) {
    const unsigned t = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), n_blocks));
    if (t <= 1) {
        for (std::size_t k = 0; k < n_blocks; ++k) body(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < n_blocks;) body(k);
    };
    std::vector<std::thread> pool;
    pool.reserve(t - 1);
    for (unsigned i = 1; i < t; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

inline constexpr std::size_t kBlockUnits = 1024;

/// Simulates all units (paths, or antithetic pairs) with `kernel` and reduces
/// stat(unit_values) -> std::array<double, M> into M moment accumulators.
template <std::size_t N, std::size_t M, class Kernel, class Stat>
std::array<Moments, M> run_campaign(const SimConfig& cfg, Kernel&& kernel, Stat&& stat) {
    const std::size_t per_unit = cfg.antithetic ? 2 : 1;
    const std::size_t units = cfg.n_paths / per_unit;
    const std::size_t n_blocks = (units + kBlockUnits - 1) / kBlockUnits;
    std::vector<std::array<Moments, M>> blocks(n_blocks);
    parallel_blocks(n_blocks, cfg.threads, [&](std::size_t k) {
        const std::size_t u_lo = k * kBlockUnits, u_hi = std::min(units, u_lo + kBlockUnits);
        const std::size_t v_lo = u_lo * per_unit;
        std::vector<double> raw((u_hi - u_lo) * per_unit * N);
        kernel(v_lo, u_hi * per_unit, [&](std::size_t v, const double* out) {
            std::copy(out, out + N, raw.begin() + static_cast<std::ptrdiff_t>((v - v_lo) * N));
        });
        std::array<double, N> v{};
        for (std::size_t u = 0; u < u_hi - u_lo; ++u) {
            const double* r = raw.data() + u * per_unit * N;
            for (std::size_t j = 0; j < N; ++j)
                v[j] = per_unit == 2 ? 0.5 * (r[j] + r[N + j]) : r[j];
            const std::array<double, M> st = stat(v, r, per_unit);
            for (std::size_t j = 0; j < M; ++j) blocks[k][j].add(st[j]);
        }
    });
    std::array<Moments, M> total{};
    for (const auto& blk : blocks)
        for (std::size_t j = 0; j < M; ++j) total[j].merge(blk[j]);
    return total;
}

// Richardson factor for an assumed weak order of 1/2, the rate expected when
// the drift is discontinuous: bias(dt) ~ (mean(dt) - mean(2dt)) / (sqrt 2 - 1).
inline constexpr double kRichardsonHalf = 1.0 / (1.4142135623730951 - 1.0);

inline McEstimate make_estimate(const Moments& mo, const Moments* shift, const SimConfig& c,
                                double tail, double T) {
    McEstimate e;
    e.mean = mo.mean;
    e.std_error = mo.std_error();
    e.n_paths = c.n_paths;
    e.dt = c.dt;
    e.seed = c.seed;
    e.tail_bound = tail;
    e.horizon = T;
    if (shift != nullptr) {
        e.coarse_shift = shift->mean;
        e.coarse_shift_std_error = shift->std_error();
        e.discretization_bound =
            kRichardsonHalf * (std::abs(e.coarse_shift) + 3.0 * e.coarse_shift_std_error);
    }
    return e;
}

inline void check_inputs(const ProblemParams& p, double b, double x0, const SimConfig& c) {
    p.validate();
    c.validate();
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidParameter("threshold b must be finite and >= 0");
    if (!(x0 >= 0.0) || !std::isfinite(x0)) throw InvalidParameter("x0 must be finite and >= 0");
}

} // namespace detail

/// One path of the refracted surplus dX = (mu - (K X + S) 1{X >= b}) dt + sigma dB,
/// stopped at the first grid time with X < 0 (or a bridge crossing).
/// Path `path` is bit-identical to path `path` of the non-antithetic campaign.
inline RefractedPath simulate_refracted(const ModelParams& m, const ProblemParams& p, double b,
                                        double x0, const SimConfig& c, std::uint64_t path = 0) {
    detail::check_inputs(p, b, x0, c);
    SimConfig one = c;
    one.estimate_discretization = false;
    one.antithetic = false;
    const detail::Dynamics d(m, p, b, simulation_horizon(m, p, b, x0, c), one);
    RefractedPath out;
    detail::run_killed(d, one, x0, path, path + 1, [&](std::size_t, const double* r) {
        out.dividends = r[0];
        out.ruin_discount = r[1];
        out.censored = r[3] != 0.0;
        if (!out.censored) out.ruin_time = r[2];
    });
    return out;
}

/// One path of the same dynamics reflected at 0 (bailout injections).
inline ReflectedPath simulate_reflected(const ModelParams& m, const ProblemParams& p, double b,
                                        double x0, const SimConfig& c, std::uint64_t path = 0) {
    detail::check_inputs(p, b, x0, c);
    SimConfig one = c;
    one.estimate_discretization = false;
    one.antithetic = false;
    const detail::Dynamics d(m, p, b, simulation_horizon(m, p, b, x0, c), one);
    ReflectedPath out;
    detail::run_reflected(d, one, x0, path, path + 1, [&](std::size_t, const double* r) {
        out.dividends = r[0];
        out.injections = r[1];
        out.total_injected = r[2];
        out.min_level = r[3];
    });
    return out;
}

/// E[D], E[e^{-q tau}] and E[D - P e^{-q tau}] from one set of refracted paths.
struct RefractedEstimates {
    McEstimate dividends;
    McEstimate ruin_discount;
    McEstimate j_d;
    double censored_fraction = 0.0;
};

/// E[D], E[sum e^{-qt} dG] and E[D - beta sum e^{-qt} dG] from one set of reflected paths.
struct ReflectedEstimates {
    McEstimate dividends;
    McEstimate injections;
    McEstimate j_c;
    double min_level = 0.0;  ///< smallest state over all paths and steps
};

inline RefractedEstimates mc_refracted(const ModelParams& m, const ProblemParams& p, double b,
                                       double x0, const SimConfig& c) {
    detail::check_inputs(p, b, x0, c);
    const double T = simulation_horizon(m, p, b, x0, c);
    const detail::Dynamics d(m, p, b, T, c);
    const double P = p.P;
    auto mo = detail::run_campaign<detail::kRefractedOut, 7>(
        c,
        [&](std::size_t lo, std::size_t hi, auto&& emit) { detail::run_killed(d, c, x0, lo, hi, emit); },
        [P](const std::array<double, detail::kRefractedOut>& v, const double*, std::size_t) {
            const double jd = v[0] - P * v[1], jd_c = v[4] - P * v[5];
            return std::array<double, 7>{v[0], v[1], jd, v[3], v[0] - v[4], v[1] - v[5], jd - jd_c};
        });
    const bool sh = c.estimate_discretization;
    const double decay = std::exp(-m.q() * T);
    RefractedEstimates r;
    r.dividends = detail::make_estimate(mo[0], sh ? &mo[4] : nullptr, c,
                                        decay * dividend_tail_scale(m, p, b, x0), T);
    r.ruin_discount = detail::make_estimate(mo[1], sh ? &mo[5] : nullptr, c, decay, T);
    r.j_d = detail::make_estimate(mo[2], sh ? &mo[6] : nullptr, c,
                                  decay * refracted_tail_scale(m, p, b, x0), T);
    r.censored_fraction = mo[3].mean;
    return r;
}

inline ReflectedEstimates mc_reflected(const ModelParams& m, const ProblemParams& p, double b,
                                       double x0, const SimConfig& c) {
    detail::check_inputs(p, b, x0, c);
    if (!(b > 0.0)) throw InvalidParameter("bailout threshold b must be > 0");
    const double T = simulation_horizon(m, p, b, x0, c);
    const detail::Dynamics d(m, p, b, T, c);
    const double beta = p.beta;
    auto mo = detail::run_campaign<detail::kReflectedOut, 7>(
        c,
        [&](std::size_t lo, std::size_t hi, auto&& emit) { detail::run_reflected(d, c, x0, lo, hi, emit); },
        [beta](const std::array<double, detail::kReflectedOut>& v, const double* raw, std::size_t per_unit) {
            const double jc = v[0] - beta * v[1], jc_c = v[4] - beta * v[5];
            const double low = per_unit == 2 ? std::min(raw[3], raw[detail::kReflectedOut + 3]) : v[3];
            return std::array<double, 7>{v[0], v[1], jc, low, v[0] - v[4], v[1] - v[5], jc - jc_c};
        });
    const bool sh = c.estimate_discretization;
    const double decay = std::exp(-m.q() * T);
    const double div_tail = decay * dividend_tail_scale(m, p, b, x0);
    ReflectedEstimates r;
    r.dividends = detail::make_estimate(mo[0], sh ? &mo[4] : nullptr, c, div_tail, T);
    r.injections = detail::make_estimate(mo[1], sh ? &mo[5] : nullptr, c,
                                         decay * tail_level(m, b, x0) + div_tail, T);
    r.j_c = detail::make_estimate(mo[2], sh ? &mo[6] : nullptr, c,
                                  decay * reflected_tail_scale(m, p, b, x0), T);
    r.min_level = mo[3].lo;
    return r;
}

/// MC estimate of J_d(x0; b) = E[D - P e^{-q tau}] under the refracted strategy.
inline McEstimate mc_j_d(const ModelParams& m, const ProblemParams& p, double b, double x0,
                         const SimConfig& c) {
    return mc_refracted(m, p, b, x0, c).j_d;
}

/// MC estimate of J_c(x0; b) = E[D - beta sum e^{-q t} dG] under the bailout strategy.
inline McEstimate mc_j_c(const ModelParams& m, const ProblemParams& p, double b, double x0,
                         const SimConfig& c) {
    return mc_reflected(m, p, b, x0, c).j_c;
}

/// MC estimate of Phi(x0; b) = E[e^{-q tau}].
inline McEstimate mc_phi(const ModelParams& m, const ProblemParams& p, double b, double x0,
                         const SimConfig& c) {
    return mc_refracted(m, p, b, x0, c).ruin_discount;
}

/// MC estimate of R(x0; b) = E[D].
inline McEstimate mc_r(const ModelParams& m, const ProblemParams& p, double b, double x0,
                       const SimConfig& c) {
    return mc_refracted(m, p, b, x0, c).dividends;
}

} // namespace acdiv
