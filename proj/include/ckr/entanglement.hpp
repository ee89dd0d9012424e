#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ckr/wavefunction.hpp"

namespace ckr {

using MatrixXcd = Eigen::MatrixXcd;
using RowMatrixXcd = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Descending Schmidt probabilities of the bipartite split rotor-1 | rotor-2.
struct SchmidtSpectrum {
    std::vector<double> probabilities;

    double sum() const {
        double s = 0.0;
        for (double p : probabilities) s += p;
        return s;
    }
};

namespace detail {

// Clamp eigenvalue noise: [-1e-12, 0) -> 0; anything more negative means the
// decomposition went wrong.
inline void clip_spectrum(std::vector<double>& lambda) {
    for (double& l : lambda) {
        if (l < 0.0) {
            if (l < -1e-12)
                throw NumericalError("spectrum: eigenvalue " + std::to_string(l) +
                                     " below -1e-12");
            l = 0.0;
        }
    }
}

} // namespace detail

// Schmidt probabilities as squared singular values of the amplitude matrix.
// Works on the N x N coefficient matrix directly; the N^2 x N^2 full density
// matrix is never formed. Basis-independent under per-axis unitaries.
inline SchmidtSpectrum schmidt(const WaveFunction2D& psi) {
    Eigen::Map<const RowMatrixXcd> a(psi.amplitudes().data(), psi.grid().n1, psi.grid().n2);
    Eigen::BDCSVD<MatrixXcd> svd(a);
    if (svd.info() != Eigen::Success)
        throw NumericalError("schmidt: SVD failed to converge (matrix norm " +
                             std::to_string(a.norm()) + ")");
    const auto& sv = svd.singularValues();
    std::vector<double> lambda(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) lambda[i] = sv(i) * sv(i);
    detail::clip_spectrum(lambda);
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    return SchmidtSpectrum{std::move(lambda)};
}

// von Neumann entropy -sum lambda ln lambda, in nats.
inline double svn(const SchmidtSpectrum& spec) {
    double s = 0.0;
    for (double l : spec.probabilities)
        if (l > 0.0) s -= l * std::log(l);
    return s;
}

// Linear entropy 1 - sum lambda^2 (one minus purity).
inline double slin(const SchmidtSpectrum& spec) {
    double purity = 0.0;
    for (double l : spec.probabilities) purity += l * l;
    return 1.0 - purity;
}

struct ReducedDensityMatrix {
    MatrixXcd entries;
    Basis basis = Basis::Position;

    double trace() const { return entries.trace().real(); }
};

// rho_1[k,k'] = sum_l Psi[k,l] conj(Psi[k',l]), with axis 1 first brought to
// the requested basis (the axis-2 basis does not affect the result).
inline ReducedDensityMatrix reduced_density(const WaveFunction2D& psi, Basis basis) {
    WaveFunction2D tmp = basis == Basis::Momentum
                             ? to_momentum(psi, AxisSel::Axis1)
                             : to_position(psi, AxisSel::Axis1);
    Eigen::Map<const RowMatrixXcd> a(tmp.amplitudes().data(), tmp.grid().n1, tmp.grid().n2);
    ReducedDensityMatrix rho;
    rho.entries = a * a.adjoint();
    rho.basis = basis;
    return rho;
}

// Total off-diagonal weight sum_{i != j} |rho_1[i,j]|. Magnitudes are summed
// so phase cancellations cannot hide surviving coherence.
inline double decoherence(const ReducedDensityMatrix& rho) {
    const auto& m = rho.entries;
    double d = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (i != j) d += std::abs(m(i, j));
    return d;
}

} // namespace ckr
