#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ckr/errors.hpp"
#include "ckr/observables.hpp"
#include "ckr/record.hpp"

namespace ckr {

// Inputs to the closed-form crossover predictions.
struct TheoryInputs {
    double xi12 = 0.0;
    double hbar_s = 1.0;
    double d_q = 0.0;     // quantum diffusion coefficient (energy per kick)
    double c_slope = 1.0; // slope of the correlation sum C(t); 1 reproduces
                          // the bare crossover formula
};

// Weak-coupling linear entropy S_lin(t) = (xi12/hbar_s)^2 C(t), elementwise.
inline std::vector<double> perturbative_slin(const TheoryInputs& in,
                                             std::span<const double> c_of_t) {
    const double f = (in.xi12 / in.hbar_s) * (in.xi12 / in.hbar_s);
    std::vector<double> out(c_of_t.size());
    for (size_t i = 0; i < c_of_t.size(); ++i) out[i] = f * c_of_t[i];
    return out;
}

struct CorrelationExtract {
    std::vector<double> t;
    std::vector<double> c; // C(t) = S_lin(t) (hbar/xi)^2
    double c_slope = 0.0;  // early-window linear rate of C(t)
    std::pair<double, double> fit_window{0.0, 0.0};
};

// Invert S_lin(t) = (xi/hbar)^2 C(t) on a weak-coupling record and fit the
// early linear slope of C(t). Records that are already saturating carry no
// linear window and are rejected.
inline CorrelationExtract extract_correlation(const RunRecord& record, const TheoryInputs& in) {
    if (!(in.xi12 > 0.0))
        throw WindowError("extract_correlation: xi12 must be positive (uncoupled record has no C)");
    const double f = (in.hbar_s / in.xi12) * (in.hbar_s / in.xi12);

    CorrelationExtract out;
    size_t unsaturated = 0;
    for (const auto& r : record.rows) {
        if (r.t < 1 || !std::isfinite(r.slin)) continue;
        out.t.push_back(static_cast<double>(r.t));
        out.c.push_back(f * r.slin);
        if (r.slin < 0.5) ++unsaturated;
    }
    if (out.t.size() < 8 || unsaturated < 8)
        throw WindowError("extract_correlation: no early window, S_lin saturating over the record");

    auto rate = early_linear_rate(out.t, out.c);
    if (!rate)
        throw WindowError("extract_correlation: no linear window found in C(t)");
    out.c_slope = rate->first;
    out.fit_window = rate->second;
    return out;
}

// Long-time linear entropy 1 - hbar_s / sqrt(4 pi D_q) * t^{-1/2}. May be
// negative for small t; callers decide validity.
inline double asymptotic_slin(double t, double hbar_s, double d_q) {
    return 1.0 - hbar_s / std::sqrt(4.0 * std::numbers::pi * d_q) / std::sqrt(t);
}

// The cube-root factor entering the crossover time:
//   G = [ -1 + (27/8pi) xi^2/D_q
//         + (3^{3/2} xi / 2) sqrt( -1/(pi D_q) + (27/16pi^2) xi^2/D_q^2 ) ]^{1/3}
// with principal branches for both the inner square root and the cube root.
// The inner radicand changes sign at xi^2 = 16 pi D_q / 27; below that G is
// complex of unit modulus and 1/G + G is real.
inline std::complex<double> g_factor(double xi12, double d_q) {
    if (!(xi12 > 0.0) || !(d_q > 0.0))
        throw DomainError("g_factor: xi12 and d_q must be positive");
    const double pi = std::numbers::pi;
    const double radicand =
        -1.0 / (pi * d_q) + 27.0 / (16.0 * pi * pi) * xi12 * xi12 / (d_q * d_q);
    const std::complex<double> inner = std::sqrt(std::complex<double>(radicand, 0.0));
    const std::complex<double> bracket =
        std::complex<double>(-1.0 + 27.0 / (8.0 * pi) * xi12 * xi12 / d_q, 0.0) +
        std::pow(3.0, 1.5) * xi12 / 2.0 * inner;
    return std::pow(bracket, 1.0 / 3.0);
}

// Crossover time between linear and saturating linear-entropy growth:
//   t* = hbar^2 / (3 xi^2) [2 + 1/G + G]
// i.e. the relevant root of (xi/hbar)^2 c t = 1 - hbar/sqrt(4 pi D_q t) in
// u = sqrt(t). A c_slope != 1 rescales xi -> xi sqrt(c) inside G and divides
// the prefactor by c (exact substitution in the cubic).
inline double crossover_time(const TheoryInputs& in) {
    if (!(in.xi12 > 0.0) || !(in.hbar_s > 0.0) || !(in.d_q > 0.0) || !(in.c_slope > 0.0))
        throw DomainError("crossover_time: inputs must be positive");
    const double xi_eff = in.xi12 * std::sqrt(in.c_slope);
    const std::complex<double> g = g_factor(xi_eff, in.d_q);
    const std::complex<double> bracket = 2.0 + 1.0 / g + g;
    const double pref = in.hbar_s * in.hbar_s / (3.0 * in.xi12 * in.xi12 * in.c_slope);
    const double tstar = pref * bracket.real();
    const double resid = std::abs(pref * bracket.imag());
    if (!(tstar > 0.0))
        throw DomainError("crossover_time: no positive real root for these inputs");
    if (resid > 1e-8 * std::abs(tstar))
        throw NumericalError("crossover_time: imaginary residual " + std::to_string(resid) +
                             " exceeds tolerance");
    return tstar;
}

// Direct root-bracketing of f(t) = (xi/hbar)^2 c t - [1 - hbar/sqrt(4 pi D_q t)]
// on t in [1, 1e9]; the independent check on the closed form.
inline std::optional<double> crossover_time_bracketed(const TheoryInputs& in) {
    const double gamma = (in.xi12 / in.hbar_s) * (in.xi12 / in.hbar_s) * in.c_slope;
    auto f = [&](double t) {
        return gamma * t - (1.0 - in.hbar_s / std::sqrt(4.0 * std::numbers::pi * in.d_q * t));
    };
    double lo = 1.0, hi = 1e9;
    if (f(lo) >= 0.0 || f(hi) <= 0.0) return std::nullopt;
    for (int it = 0; it < 500; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace ckr
