#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ckr/fft.hpp"
#include "ckr/grid.hpp"

namespace ckr {

using cplx = std::complex<double>;

enum class AxisSel { Axis1, Axis2, Both };

// Complex amplitudes over the two-rotor grid, row-major (index = k1*n2 + k2),
// with a basis tag per axis. Value semantics: states are immutable from the
// outside; transforms consume and return by value so pipelines move rather
// than copy.
//
// Momentum-basis amplitudes are stored in FFT-natural mode order; use
// GridSpec::momentum(axis, i) for the physical momentum at index i.
class WaveFunction2D {
public:
    WaveFunction2D(GridSpec grid, Basis basis1, Basis basis2, std::vector<cplx> amplitudes)
        : grid_(grid), basis1_(basis1), basis2_(basis2), amps_(std::move(amplitudes)) {
        if (amps_.size() != static_cast<size_t>(grid_.n1) * grid_.n2)
            throw DimensionError("WaveFunction2D: amplitude array has " +
                                 std::to_string(amps_.size()) + " entries, grid wants " +
                                 std::to_string(static_cast<size_t>(grid_.n1) * grid_.n2));
    }

    const GridSpec& grid() const { return grid_; }
    Basis basis(int axis) const { return axis == 1 ? basis1_ : basis2_; }

    std::span<const cplx> amplitudes() const { return amps_; }
    const cplx& at(int k1, int k2) const { return amps_[static_cast<size_t>(k1) * grid_.n2 + k2]; }

    double norm_sq() const {
        double s = 0.0;
        for (const auto& a : amps_) s += std::norm(a);
        return s;
    }

    void normalize() {
        const double inv = 1.0 / std::sqrt(norm_sq());
        for (auto& a : amps_) a *= inv;
    }

    // internal mutable access for the evolution kernel and transforms
    std::span<cplx> mutable_amplitudes() { return amps_; }
    void set_basis(int axis, Basis b) { (axis == 1 ? basis1_ : basis2_) = b; }

private:
    GridSpec grid_;
    Basis basis1_;
    Basis basis2_;
    std::vector<cplx> amps_;
};

// Tensor product of two normalized single-rotor states.
inline WaveFunction2D product_state(const GridSpec& grid,
                                    std::span<const cplx> psi1,
                                    std::span<const cplx> psi2,
                                    Basis basis1 = Basis::Position,
                                    Basis basis2 = Basis::Position) {
    if (psi1.size() != static_cast<size_t>(grid.n1))
        throw DimensionError("product_state: psi1 has " + std::to_string(psi1.size()) +
                             " entries, axis 1 wants " + std::to_string(grid.n1));
    if (psi2.size() != static_cast<size_t>(grid.n2))
        throw DimensionError("product_state: psi2 has " + std::to_string(psi2.size()) +
                             " entries, axis 2 wants " + std::to_string(grid.n2));
    std::vector<cplx> amps(psi1.size() * psi2.size());
    for (size_t k = 0; k < psi1.size(); ++k)
        for (size_t l = 0; l < psi2.size(); ++l)
            amps[k * psi2.size() + l] = psi1[k] * psi2[l];
    WaveFunction2D psi(grid, basis1, basis2, std::move(amps));
    psi.normalize();
    return psi;
}

namespace detail {

// Unitary DFT along one axis (1/sqrt(N) scaling), in place.
inline void unitary_transform_axis(WaveFunction2D& psi, int axis, int sign) {
    auto amps = psi.mutable_amplitudes();
    fft::transform_axis(amps.data(), psi.grid().n1, psi.grid().n2, axis, sign);
    const double scale = 1.0 / std::sqrt(static_cast<double>(psi.grid().size(axis)));
    for (auto& a : amps) a *= scale;
}

inline void to_basis_axis(WaveFunction2D& psi, int axis, Basis target, bool strict) {
    if (psi.basis(axis) == target) {
        if (strict)
            throw LogicError(std::string("transform: axis ") + (axis == 1 ? "1" : "2") +
                             " already in " + to_string(target) + " basis");
        return;
    }
    unitary_transform_axis(psi, axis, target == Basis::Momentum ? FFTW_FORWARD : FFTW_BACKWARD);
    psi.set_basis(axis, target);
}

} // namespace detail

// Per-axis unitary Fourier transforms between position and momentum bases.
// Parseval holds by construction (1/sqrt(N) per axis). A no-op request is
// tolerated unless strict = true.
inline WaveFunction2D to_momentum(WaveFunction2D psi, AxisSel which = AxisSel::Both,
                                  bool strict = false) {
    if (which == AxisSel::Axis1 || which == AxisSel::Both)
        detail::to_basis_axis(psi, 1, Basis::Momentum, strict);
    if (which == AxisSel::Axis2 || which == AxisSel::Both)
        detail::to_basis_axis(psi, 2, Basis::Momentum, strict);
    return psi;
}

inline WaveFunction2D to_position(WaveFunction2D psi, AxisSel which = AxisSel::Both,
                                  bool strict = false) {
    if (which == AxisSel::Axis1 || which == AxisSel::Both)
        detail::to_basis_axis(psi, 1, Basis::Position, strict);
    if (which == AxisSel::Axis2 || which == AxisSel::Both)
        detail::to_basis_axis(psi, 2, Basis::Position, strict);
    return psi;
}

// Probability in the outermost momentum bins of one axis (2 bins per edge).
// Diffusing states reaching these bins are about to wrap around the momentum
// grid, which invalidates everything after that time.
inline double edge_population(const WaveFunction2D& psi, int axis, int bins_per_edge = 2) {
    WaveFunction2D pm = to_momentum(psi, axis == 1 ? AxisSel::Axis1 : AxisSel::Axis2);
    const int n = pm.grid().size(axis);
    const int half = n / 2;
    double frac = 0.0;
    const auto amps = pm.amplitudes();
    const int n2 = pm.grid().n2;
    for (int i = 0; i < pm.grid().n1; ++i) {
        const int m1 = pm.grid().signed_mode(1, i);
        for (int j = 0; j < n2; ++j) {
            const int m2 = pm.grid().signed_mode(2, j);
            const int m = axis == 1 ? m1 : m2;
            const bool edge = m >= half - bins_per_edge || m < -half + bins_per_edge;
            if (edge) frac += std::norm(amps[static_cast<size_t>(i) * n2 + j]);
        }
    }
    return frac;
}

} // namespace ckr
