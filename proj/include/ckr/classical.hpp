#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ckr/evolution_params.hpp"
#include "ckr/observables.hpp"

namespace ckr {

// Point of the four-dimensional stroboscopic map on the cylinder: positions
// wrapped to [0, 2*pi), momenta unbounded.
struct ClassicalState {
    double x1 = 0.0, x2 = 0.0;
    double p1 = 0.0, p2 = 0.0;
};

inline double wrap_angle(double x) {
    x = std::fmod(x, kTwoPi);
    return x < 0.0 ? x + kTwoPi : x;
}

// Kick-then-drift map matching the quantum operator order (kick factor acts
// before the free rotation):
//   p1' = p1 + K1 sin x1 + xi sin(x1 - x2)
//   p2' = p2 + K2 sin x2 - xi sin(x1 - x2)
//   xj' = (xj + pj') mod 2*pi
// The coupling impulse is computed once so the pair exchange cancels exactly.
inline ClassicalState classical_step(const ClassicalState& s, const SystemParams& params) {
    const double c = params.xi12 * std::sin(s.x1 - s.x2);
    ClassicalState n;
    n.p1 = s.p1 + params.k1 * std::sin(s.x1) + c;
    n.p2 = s.p2 + params.k2 * std::sin(s.x2) - c;
    n.x1 = wrap_angle(s.x1 + n.p1);
    n.x2 = wrap_angle(s.x2 + n.p2);
    return n;
}

inline ClassicalState classical_inverse_step(const ClassicalState& s, const SystemParams& params) {
    ClassicalState n;
    n.x1 = wrap_angle(s.x1 - s.p1);
    n.x2 = wrap_angle(s.x2 - s.p2);
    const double c = params.xi12 * std::sin(n.x1 - n.x2);
    n.p1 = s.p1 - params.k1 * std::sin(n.x1) - c;
    n.p2 = s.p2 - params.k2 * std::sin(n.x2) + c;
    return n;
}

// Tangent map at s applied to v = (dx1, dx2, dp1, dp2).
inline std::array<double, 4> classical_tangent(const ClassicalState& s,
                                               const SystemParams& params,
                                               const std::array<double, 4>& v) {
    const double cc = params.xi12 * std::cos(s.x1 - s.x2);
    const double f11 = params.k1 * std::cos(s.x1) + cc; // d p1'/d x1
    const double f12 = -cc;                             // d p1'/d x2
    const double f21 = -cc;                             // d p2'/d x1
    const double f22 = params.k2 * std::cos(s.x2) + cc; // d p2'/d x2
    const double dp1 = f11 * v[0] + f12 * v[1] + v[2];
    const double dp2 = f21 * v[0] + f22 * v[1] + v[3];
    return {v[0] + dp1, v[1] + dp2, dp1, dp2};
}

struct Ensemble {
    std::vector<ClassicalState> states;
    std::uint64_t seed = 0;
};

// Initial conditions matching the quantum initial state on average: positions
// uniform over the torus, momenta zero. Per-trajectory streams are seeded
// from (seed, index) so the ensemble is reproducible and order-independent.
inline Ensemble make_uniform_ensemble(size_t size, std::uint64_t seed) {
    Ensemble e;
    e.seed = seed;
    e.states.resize(size);
    for (size_t i = 0; i < size; ++i) {
        std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(i)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> uni(0.0, kTwoPi);
        e.states[i] = ClassicalState{uni(rng), uni(rng), 0.0, 0.0};
    }
    return e;
}

struct EnergySeries {
    std::vector<double> e1_mean; // <p1^2/2> at t = 0..t_max
    double d_cl = 0.0;           // fitted slope (energy per kick)
    double d_cl_stderr = 0.0;
};

// Ensemble-averaged energy of rotor 1 and the diffusion coefficient from a
// linear fit of <E_1>(t).
inline EnergySeries ensemble_energy(const Ensemble& ensemble, const SystemParams& params,
                                    int t_max) {
    EnergySeries out;
    out.e1_mean.resize(t_max + 1, 0.0);
    std::vector<ClassicalState> states = ensemble.states;
    const double inv = 1.0 / static_cast<double>(states.size());
    for (int t = 0; t <= t_max; ++t) {
        double e = 0.0;
        for (auto& s : states) e += 0.5 * s.p1 * s.p1;
        out.e1_mean[t] = e * inv;
        if (t < t_max)
            for (auto& s : states) s = classical_step(s, params);
    }
    std::vector<double> ts(out.e1_mean.size());
    for (size_t i = 0; i < ts.size(); ++i) ts[i] = static_cast<double>(i);
    const LinFit f = linear_fit(ts, out.e1_mean);
    out.d_cl = f.slope;
    out.d_cl_stderr = f.slope_stderr;
    return out;
}

struct LyapunovResult {
    double value = 0.0;
    bool converged = true;
};

// Largest Lyapunov exponent by tangent-vector renormalization, averaged over
// n_samples random trajectories. Flags nonconvergence when the running
// average still moves by more than 5% over the second half.
inline LyapunovResult lyapunov(const SystemParams& params, std::int64_t t_max, int n_samples,
                               std::uint64_t seed = 7) {
    if (t_max < 100) throw ConfigError("lyapunov: t_max too small");
    if (n_samples < 1) throw ConfigError("lyapunov: n_samples must be >= 1");

    double sum_full = 0.0, sum_half = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(s)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> uni(0.0, kTwoPi);
        std::normal_distribution<double> gauss(0.0, 1.0);
        ClassicalState st{uni(rng), uni(rng), gauss(rng), gauss(rng)};
        std::array<double, 4> v{gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
        double nv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
        for (auto& c : v) c /= nv;

        double acc = 0.0, acc_half = 0.0;
        for (std::int64_t t = 0; t < t_max; ++t) {
            v = classical_tangent(st, params, v);
            st = classical_step(st, params);
            nv = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
            acc += std::log(nv);
            if (t < t_max / 2) acc_half = acc;
            for (auto& c : v) c /= nv;
        }
        sum_full += acc / static_cast<double>(t_max);
        sum_half += acc_half / static_cast<double>(t_max / 2);
    }

    LyapunovResult res;
    res.value = sum_full / n_samples;
    const double half = sum_half / n_samples;
    if (std::abs(res.value) > 1e-3 && std::abs(half - res.value) > 0.05 * std::abs(res.value))
        res.converged = false;
    return res;
}

} // namespace ckr
