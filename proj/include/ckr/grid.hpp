#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ckr/errors.hpp"

namespace ckr {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class Basis { Position, Momentum };

inline const char* to_string(Basis b) {
    return b == Basis::Position ? "position" : "momentum";
}

inline bool is_power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }

// Discretization of the two-rotor cylinder phase space. Positions live on
// uniform grids x_k = 2*pi*k/N over one period; the conjugate momentum
// lattice is p_m = hbar_s * m with m in [-N/2, N/2), i.e. the momentum
// spacing equals hbar_s exactly (2*pi-periodic positions quantize p in
// integer multiples of hbar_s).
struct GridSpec {
    int n1 = 0;
    int n2 = 0;
    double hbar_s = 1.0;
    double period = kTwoPi;

    int size(int axis) const { return axis == 1 ? n1 : n2; }

    double position(int axis, int k) const { return period * k / size(axis); }

    // FFT-natural index -> signed mode number m in [-N/2, N/2).
    int signed_mode(int axis, int i) const {
        const int n = size(axis);
        return i < n / 2 ? i : i - n;
    }

    // Momentum at FFT-natural index i: exactly hbar_s * m.
    double momentum(int axis, int i) const { return hbar_s * signed_mode(axis, i); }

    bool operator==(const GridSpec&) const = default;
};

inline GridSpec make_grid(int n1, int n2, double hbar_s) {
    if (!is_power_of_two(n1) || n1 < 16)
        throw ConfigError("make_grid: n1 = " + std::to_string(n1) +
                          " must be a power of two >= 16");
    if (!is_power_of_two(n2) || n2 < 16)
        throw ConfigError("make_grid: n2 = " + std::to_string(n2) +
                          " must be a power of two >= 16");
    if (!(hbar_s > 0.0) || !std::isfinite(hbar_s))
        throw ConfigError("make_grid: hbar_s must be positive and finite");
    return GridSpec{n1, n2, hbar_s, kTwoPi};
}

// Center and width of a periodized Gaussian wave packet on the ring.
struct CoherentStateSpec {
    double x0 = std::numbers::pi;
    double p0 = 0.0;
    double sigma = std::numbers::sqrt2 / 2.0; // sqrt(hbar_s/2) for hbar_s = 1

    bool operator==(const CoherentStateSpec&) const = default;
};

inline double default_sigma(double hbar_s) { return std::sqrt(hbar_s / 2.0); }

namespace detail {

// Relative norm weight picked up by the w != 0 periodic images. Used to
// reject packets too wide for the ring.
inline double periodization_overlap(double sigma) {
    const double s = std::numbers::pi * std::numbers::pi / (2.0 * sigma * sigma);
    return 2.0 * std::exp(-s);
}

} // namespace detail

// Normalized single-rotor coherent state sampled on the position grid of the
// chosen axis:
//
//   psi(x_k) ~ sum_w exp(-(x_k - x0 + 2*pi*w)^2 / (4 sigma^2))
//              * exp(i p0 (x_k - x0) / hbar_s)
//
// The winding sum stops once an added image contributes less than 1e-16 of
// the accumulated norm. Packets whose adjacent images overlap by more than
// `overlap_tol` of the norm are refused; see the config schema notes for why
// the default tolerance is 1e-3 rather than machine-level.
inline std::vector<std::complex<double>>
coherent_state(const GridSpec& grid, int axis, const CoherentStateSpec& spec,
               double overlap_tol = 1e-3) {
    if (!(spec.sigma > 0.0))
        throw ConfigError("coherent_state: sigma must be positive");
    if (detail::periodization_overlap(spec.sigma) > overlap_tol)
        throw PrecisionError("coherent_state: sigma = " + std::to_string(spec.sigma) +
                             " too wide, periodic images overlap above tolerance");

    const int n = grid.size(axis);
    std::vector<double> envelope(n, 0.0);

    double total = 0.0;
    for (int w = 0; w <= 64; ++w) {
        double added = 0.0;
        for (int k = 0; k < n; ++k) {
            const double d = grid.position(axis, k) - spec.x0;
            double term = std::exp(-(d + kTwoPi * w) * (d + kTwoPi * w) /
                                   (4.0 * spec.sigma * spec.sigma));
            if (w != 0)
                term += std::exp(-(d - kTwoPi * w) * (d - kTwoPi * w) /
                                 (4.0 * spec.sigma * spec.sigma));
            envelope[k] += term;
            added += term * term;
        }
        total += added;
        if (w > 0 && added < 1e-16 * total) break;
    }

    std::vector<std::complex<double>> psi(n);
    double norm_sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double d = grid.position(axis, k) - spec.x0;
        const double phase = spec.p0 * d / grid.hbar_s;
        psi[k] = envelope[k] * std::complex<double>(std::cos(phase), std::sin(phase));
        norm_sq += envelope[k] * envelope[k];
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& a : psi) a *= inv;
    return psi;
}

// --- circular statistics (positions are angles) -----------------------------

// Mean angle of a normalized distribution over angles, in [0, 2*pi).
inline double circular_mean(std::span<const double> prob, std::span<const double> angles) {
    std::complex<double> z = 0.0;
    for (size_t i = 0; i < prob.size(); ++i)
        z += prob[i] * std::complex<double>(std::cos(angles[i]), std::sin(angles[i]));
    double mean = std::arg(z);
    if (mean < 0.0) mean += kTwoPi;
    return mean;
}

// Circular standard deviation sqrt(-2 ln R); reduces to the ordinary standard
// deviation for narrow distributions.
inline double circular_std(std::span<const double> prob, std::span<const double> angles) {
    std::complex<double> z = 0.0;
    double w = 0.0;
    for (size_t i = 0; i < prob.size(); ++i) {
        z += prob[i] * std::complex<double>(std::cos(angles[i]), std::sin(angles[i]));
        w += prob[i];
    }
    const double r = std::abs(z) / w;
    if (r <= 0.0) return std::numbers::pi;
    return std::sqrt(std::max(0.0, -2.0 * std::log(r)));
}

} // namespace ckr
