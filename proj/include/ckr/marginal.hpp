#pragma once

#include <cstdint>
#include <vector>

#include "ckr/wavefunction.hpp"

namespace ckr {

// Single-rotor probability distribution g(x) or f(p), samples ascending.
struct MarginalDistribution {
    int axis = 1;
    Basis basis = Basis::Position;
    std::vector<double> samples; // x_k or p_m, ascending
    std::vector<double> values;  // probabilities, sum = 1
    std::int64_t time = 0;

    bool operator==(const MarginalDistribution&) const = default;
};

// Row/column sums of |Psi|^2 after bringing the chosen axis to the chosen
// basis. Momentum marginals are unshifted to ascending p = hbar_s * m,
// m in [-N/2, N/2).
inline MarginalDistribution marginal(const WaveFunction2D& psi, int axis, Basis basis,
                                     std::int64_t time = 0) {
    const AxisSel sel = axis == 1 ? AxisSel::Axis1 : AxisSel::Axis2;
    WaveFunction2D tmp = basis == Basis::Momentum ? to_momentum(psi, sel) : to_position(psi, sel);

    const auto& g = tmp.grid();
    const int n = g.size(axis);
    const int n2 = g.n2;
    std::vector<double> sums(n, 0.0);
    const auto amps = tmp.amplitudes();
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < n2; ++j)
            sums[axis == 1 ? i : j] += std::norm(amps[static_cast<size_t>(i) * n2 + j]);

    MarginalDistribution dist;
    dist.axis = axis;
    dist.basis = basis;
    dist.time = time;
    dist.samples.resize(n);
    dist.values.resize(n);
    if (basis == Basis::Position) {
        for (int k = 0; k < n; ++k) {
            dist.samples[k] = g.position(axis, k);
            dist.values[k] = sums[k];
        }
    } else {
        const int half = n / 2;
        for (int i = 0; i < n; ++i) {
            const int m = g.signed_mode(axis, i);
            dist.samples[m + half] = g.momentum(axis, i);
            dist.values[m + half] = sums[i];
        }
    }
    return dist;
}

} // namespace ckr
