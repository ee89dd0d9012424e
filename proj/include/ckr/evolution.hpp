#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "ckr/entanglement.hpp"
#include "ckr/evolution_params.hpp"
#include "ckr/observables.hpp"
#include "ckr/record.hpp"
#include "ckr/schedule.hpp"
#include "ckr/wavefunction.hpp"

namespace ckr {

// Probability above this in the outermost momentum bins marks the run invalid
// from that kick onward (the diffusing state is wrapping around the grid).
inline constexpr double kEdgeThreshold = 1e-8;

// Pure phases of the one-period Floquet factors, evaluated once per run:
//   kick_j[k]  = exp(-i K_j cos(x_k) / hbar_s)          (position diagonal)
//   free_j[m]  = exp(-i p_m^2 / (2 hbar_s))             (momentum diagonal)
//   coupling   = exp(-i xi cos(x_k - x_l) / hbar_s)     (position diagonal)
// For equal axes x_k - x_l depends only on (k - l) mod N, so the coupling
// collapses to one length-N vector; unequal axes fall back to the full table.
class PhaseTables {
public:
    PhaseTables(const GridSpec& grid, const SystemParams& params) : grid_(grid), params_(params) {
        params.validate();
        auto phase = [](double arg) {
            return std::complex<double>(std::cos(arg), -std::sin(arg)); // e^{-i arg}
        };
        kick1_.resize(grid.n1);
        for (int k = 0; k < grid.n1; ++k)
            kick1_[k] = phase(params.k1 / params.hbar_s * std::cos(grid.position(1, k)));
        kick2_.resize(grid.n2);
        for (int l = 0; l < grid.n2; ++l)
            kick2_[l] = phase(params.k2 / params.hbar_s * std::cos(grid.position(2, l)));
        free1_.resize(grid.n1);
        for (int i = 0; i < grid.n1; ++i) {
            const double p = grid.momentum(1, i);
            free1_[i] = phase(p * p / (2.0 * params.hbar_s));
        }
        free2_.resize(grid.n2);
        for (int j = 0; j < grid.n2; ++j) {
            const double p = grid.momentum(2, j);
            free2_[j] = phase(p * p / (2.0 * params.hbar_s));
        }
        if (grid.n1 == grid.n2) {
            std::vector<cplx> diff(grid.n1);
            for (int d = 0; d < grid.n1; ++d)
                diff[d] = phase(params.xi12 / params.hbar_s * std::cos(kTwoPi * d / grid.n1));
            coupling_ = std::move(diff);
        } else {
            std::vector<cplx> full(static_cast<size_t>(grid.n1) * grid.n2);
            for (int k = 0; k < grid.n1; ++k)
                for (int l = 0; l < grid.n2; ++l)
                    full[static_cast<size_t>(k) * grid.n2 + l] = phase(
                        params.xi12 / params.hbar_s *
                        std::cos(grid.position(1, k) - grid.position(2, l)));
            coupling_ = std::move(full);
        }
    }

    const GridSpec& grid() const { return grid_; }
    const SystemParams& params() const { return params_; }
    std::span<const cplx> kick1() const { return kick1_; }
    std::span<const cplx> kick2() const { return kick2_; }
    std::span<const cplx> free1() const { return free1_; }
    std::span<const cplx> free2() const { return free2_; }

    cplx coupling(int k, int l) const {
        if (std::holds_alternative<std::vector<cplx>>(coupling_) &&
            static_cast<int>(std::get<std::vector<cplx>>(coupling_).size()) == grid_.n1 &&
            grid_.n1 == grid_.n2) {
            int d = k - l;
            if (d < 0) d += grid_.n1;
            return std::get<std::vector<cplx>>(coupling_)[d];
        }
        return std::get<std::vector<cplx>>(coupling_)[static_cast<size_t>(k) * grid_.n2 + l];
    }

    bool coupling_is_difference_table() const { return grid_.n1 == grid_.n2; }
    std::span<const cplx> coupling_raw() const { return std::get<std::vector<cplx>>(coupling_); }

private:
    GridSpec grid_;
    SystemParams params_;
    std::vector<cplx> kick1_, kick2_, free1_, free2_;
    std::variant<std::vector<cplx>> coupling_;
};

inline PhaseTables build_phase_tables(const GridSpec& grid, const SystemParams& params) {
    return PhaseTables(grid, params);
}

// Momentum-stage observables collected for free while the state passes
// through the momentum basis inside a step.
struct StepProbe {
    double e1 = 0.0, e2 = 0.0;     // <p_j^2/2>
    double edge1 = 0.0, edge2 = 0.0; // outermost-bin population per axis
};

namespace detail {

// One period of U = (U_1 x U_2) U_12, in place, position basis in and out:
// coupling and kick phases, forward transforms, free phases (probe tap),
// backward transforms.
inline void step_in_place(WaveFunction2D& psi, const PhaseTables& tables, StepProbe* probe) {
    if (psi.basis(1) != Basis::Position || psi.basis(2) != Basis::Position)
        throw BasisError("step: state must be in the position basis on both axes");
    if (!(psi.grid() == tables.grid()))
        throw DimensionError("step: phase tables built for a different grid");

    const int n1 = psi.grid().n1;
    const int n2 = psi.grid().n2;
    auto amps = psi.mutable_amplitudes();

    if (tables.coupling_is_difference_table()) {
        const auto diff = tables.coupling_raw();
        for (int k = 0; k < n1; ++k) {
            const cplx rowk = tables.kick1()[k];
            cplx* row = amps.data() + static_cast<size_t>(k) * n2;
            for (int l = 0; l < n2; ++l) {
                int d = k - l;
                if (d < 0) d += n1;
                row[l] *= rowk * tables.kick2()[l] * diff[d];
            }
        }
    } else {
        const auto full = tables.coupling_raw();
        for (int k = 0; k < n1; ++k) {
            const cplx rowk = tables.kick1()[k];
            cplx* row = amps.data() + static_cast<size_t>(k) * n2;
            const cplx* crow = full.data() + static_cast<size_t>(k) * n2;
            for (int l = 0; l < n2; ++l) row[l] *= rowk * tables.kick2()[l] * crow[l];
        }
    }

    fft::transform_axis(amps.data(), n1, n2, 1, FFTW_FORWARD);
    fft::transform_axis(amps.data(), n1, n2, 2, FFTW_FORWARD);
    const double scale = 1.0 / (static_cast<double>(n1) * n2); // both unitary factors at once

    std::vector<double> f1, f2;
    if (probe) {
        f1.assign(n1, 0.0);
        f2.assign(n2, 0.0);
    }
    for (int i = 0; i < n1; ++i) {
        const cplx fi = tables.free1()[i] * scale;
        cplx* row = amps.data() + static_cast<size_t>(i) * n2;
        if (probe) {
            double acc = 0.0;
            for (int j = 0; j < n2; ++j) {
                row[j] *= fi * tables.free2()[j];
                const double w = std::norm(row[j]);
                acc += w;
                f2[j] += w;
            }
            f1[i] = acc;
        } else {
            for (int j = 0; j < n2; ++j) row[j] *= fi * tables.free2()[j];
        }
    }

    if (probe) {
        // the tap sees amplitudes scaled by 1/(n1 n2); total weight restores them
        double total = 0.0;
        for (double w : f1) total += w;
        const double inv = total > 0 ? 1.0 / total : 0.0;
        const auto& g = psi.grid();
        probe->e1 = probe->e2 = probe->edge1 = probe->edge2 = 0.0;
        const int half1 = n1 / 2, half2 = n2 / 2;
        for (int i = 0; i < n1; ++i) {
            const double p = g.momentum(1, i);
            const double w = f1[i] * inv;
            probe->e1 += w * p * p * 0.5;
            const int m = g.signed_mode(1, i);
            if (m >= half1 - 2 || m < -half1 + 2) probe->edge1 += w;
        }
        for (int j = 0; j < n2; ++j) {
            const double p = g.momentum(2, j);
            const double w = f2[j] * inv;
            probe->e2 += w * p * p * 0.5;
            const int m = g.signed_mode(2, j);
            if (m >= half2 - 2 || m < -half2 + 2) probe->edge2 += w;
        }
    }

    fft::transform_axis(amps.data(), n1, n2, 1, FFTW_BACKWARD);
    fft::transform_axis(amps.data(), n1, n2, 2, FFTW_BACKWARD);
}

} // namespace detail

// One Floquet period applied to a position-basis state.
inline WaveFunction2D step(WaveFunction2D psi, const PhaseTables& tables) {
    detail::step_in_place(psi, tables, nullptr);
    return psi;
}

// Optional control hooks for checkpointing and early stop; after_step returns
// false to halt the evolution (record is flagged complete only at t_max).
struct EvolveHooks {
    std::function<bool(std::int64_t t, const WaveFunction2D& psi, RunRecord& rec)> after_step;
};

namespace detail {

inline void probe_row(const WaveFunction2D& psi, std::int64_t t, const ProbeSet& probes,
                      RunRecord& rec, double e1, double e2) {
    SampleRow row;
    row.t = t;
    row.valid = rec.valid_at(t);
    if (probes.any_schmidt()) {
        const auto spec = schmidt(psi);
        if (probes.svn) row.svn = svn(spec);
        if (probes.slin) row.slin = slin(spec);
    }
    if (probes.energy) {
        row.e1 = e1;
        row.e2 = e2;
    }
    if (probes.decoherence) {
        const auto rho = reduced_density(psi, Basis::Momentum);
        row.dcoh = decoherence(rho);
        if (t == 0) {
            rec.dcoh0 = row.dcoh;
            rec.dcoh0_defined = row.dcoh > 0.0;
        }
    }
    rec.rows.push_back(row);

    const bool snapshot_time =
        std::find(probes.marginal_times.begin(), probes.marginal_times.end(), t) !=
        probes.marginal_times.end();
    if (snapshot_time && probes.marginals) {
        rec.marginals.push_back(marginal(psi, 1, Basis::Position, t));
        rec.marginals.push_back(marginal(psi, 1, Basis::Momentum, t));
    }
    if (snapshot_time && probes.husimi) {
        const auto rho = reduced_density(psi, Basis::Position);
        const double pscale = std::sqrt(std::max(2.0 * e1, 1.0));
        const auto lat = make_husimi_lattice(pscale);
        const auto h = husimi(rho, psi.grid(), lat.xs, lat.ps,
                              default_sigma(psi.grid().hbar_s));
        rec.husimi_slin.push_back(
            {t, husimi_linear_entropy(h, lat.dx, lat.dp, psi.grid().hbar_s)});
    }
}

} // namespace detail

// Drive the map t_max kicks from `t_start`, probing at scheduled times and
// recording dense energies every kick. The momentum-edge monitor runs every
// kick; the first breach time freezes into the record and later rows carry
// valid = false. A probe failure stops the run and returns the partial
// record flagged incomplete.
inline void evolve_loop(WaveFunction2D& psi, const SystemParams& params, std::int64_t t_start,
                        std::int64_t t_max, const SampleSchedule& schedule,
                        const ProbeSet& probes, RunRecord& rec, const EvolveHooks& hooks = {}) {
    schedule.validate(t_max);
    const PhaseTables tables(psi.grid(), params);

    auto scheduled = [&schedule](std::int64_t t) {
        return std::binary_search(schedule.times.begin(), schedule.times.end(), t);
    };

    try {
        if (t_start == 0) {
            WaveFunction2D pm = to_momentum(psi);
            const auto f1 = marginal(pm, 1, Basis::Momentum);
            const auto f2 = marginal(pm, 2, Basis::Momentum);
            double e1 = 0, e2 = 0, edge1 = 0, edge2 = 0;
            const int n = psi.grid().n1, m = psi.grid().n2;
            for (size_t i = 0; i < f1.values.size(); ++i) {
                e1 += f1.values[i] * f1.samples[i] * f1.samples[i] * 0.5;
                const int mode = static_cast<int>(i) - n / 2;
                if (mode >= n / 2 - 2 || mode < -n / 2 + 2) edge1 += f1.values[i];
            }
            for (size_t j = 0; j < f2.values.size(); ++j) {
                e2 += f2.values[j] * f2.samples[j] * f2.samples[j] * 0.5;
                const int mode = static_cast<int>(j) - m / 2;
                if (mode >= m / 2 - 2 || mode < -m / 2 + 2) edge2 += f2.values[j];
            }
            if ((edge1 > kEdgeThreshold || edge2 > kEdgeThreshold) && rec.first_breach_t < 0)
                rec.first_breach_t = 0;
            if (probes.energy) {
                rec.energy_e1.assign(1, e1);
                rec.energy_e2.assign(1, e2);
            }
            if (scheduled(0)) detail::probe_row(psi, 0, probes, rec, e1, e2);
        }

        for (std::int64_t t = t_start + 1; t <= t_max; ++t) {
            StepProbe tap;
            detail::step_in_place(psi, tables, &tap);
            if ((tap.edge1 > kEdgeThreshold || tap.edge2 > kEdgeThreshold) &&
                rec.first_breach_t < 0)
                rec.first_breach_t = t;
            if (probes.energy) {
                rec.energy_e1.push_back(tap.e1);
                rec.energy_e2.push_back(tap.e2);
            }
            if (scheduled(t)) detail::probe_row(psi, t, probes, rec, tap.e1, tap.e2);
            if (hooks.after_step && !hooks.after_step(t, psi, rec)) {
                rec.complete = false;
                return;
            }
        }
        rec.complete = true;
    } catch (const Error&) {
        rec.complete = false;
        throw;
    }
}

inline RunRecord evolve(WaveFunction2D psi, const SystemParams& params, std::int64_t t_max,
                        const SampleSchedule& schedule, const ProbeSet& probes,
                        const EvolveHooks& hooks = {}) {
    RunRecord rec;
    evolve_loop(psi, params, 0, t_max, schedule, probes, rec, hooks);
    return rec;
}

} // namespace ckr
