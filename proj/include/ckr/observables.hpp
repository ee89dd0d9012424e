#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ckr/entanglement.hpp"
#include "ckr/marginal.hpp"
#include "ckr/record.hpp"

namespace ckr {

// --- energies ----------------------------------------------------------------

// <E_j> = sum_m f(p_m) p_m^2 / 2 over the momentum marginal of the rotor.
inline double mean_energy(const WaveFunction2D& psi, int rotor) {
    const auto f = marginal(psi, rotor, Basis::Momentum);
    double e = 0.0;
    for (size_t i = 0; i < f.values.size(); ++i)
        e += f.values[i] * f.samples[i] * f.samples[i] * 0.5;
    return e;
}

// --- least squares helpers ----------------------------------------------------

struct LinFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_stderr = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity(); // RMS of residuals
    double r2 = 0.0;
    size_t n = 0;
};

inline LinFit linear_fit(std::span<const double> x, std::span<const double> y) {
    LinFit f;
    f.n = x.size();
    if (f.n < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < f.n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double nd = static_cast<double>(f.n);
    const double det = nd * sxx - sx * sx;
    if (det == 0.0) return f;
    f.slope = (nd * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / nd;
    double ssr = 0, sst = 0;
    const double ybar = sy / nd;
    for (size_t i = 0; i < f.n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ssr += r * r;
        sst += (y[i] - ybar) * (y[i] - ybar);
    }
    f.residual = std::sqrt(ssr / nd);
    f.r2 = sst > 0 ? 1.0 - ssr / sst : 1.0;
    if (f.n > 2) f.slope_stderr = std::sqrt(ssr / (nd - 2) / (sxx - sx * sx / nd));
    return f;
}

inline LinFit linear_fit_through_origin(std::span<const double> x, std::span<const double> y) {
    LinFit f;
    f.n = x.size();
    if (f.n < 1) return f;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < f.n; ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    double ssr = 0;
    for (size_t i = 0; i < f.n; ++i) {
        const double r = y[i] - f.slope * x[i];
        ssr += r * r;
    }
    const double nd = static_cast<double>(f.n);
    f.residual = std::sqrt(ssr / nd);
    f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
    if (f.n > 1) f.slope_stderr = std::sqrt(ssr / (nd - 1) / sxx);
    return f;
}

// --- model fits ----------------------------------------------------------------

enum class FitModel { Gaussian, Exponential, PowerLaw, Linear, LogLinear };

inline const char* to_string(FitModel m) {
    switch (m) {
        case FitModel::Gaussian: return "gaussian";
        case FitModel::Exponential: return "exponential";
        case FitModel::PowerLaw: return "powerlaw";
        case FitModel::Linear: return "linear";
        case FitModel::LogLinear: return "loglinear";
    }
    return "?";
}

// Least-squares fit result. `residual` is the RMS misfit in the fitted
// (usually log-transformed) representation; `r2` likewise.
struct FitReport {
    FitModel model = FitModel::Linear;
    std::vector<double> params;
    double residual = std::numeric_limits<double>::infinity();
    double r2 = 0.0;
    std::pair<double, double> window{0.0, 0.0};
};

// Fit ln f(p) against a Gaussian (quadratic in p) or two-sided exponential
// (linear in |p - mu|) over bins above 1e-12 of the peak, uniform weights.
// Gaussian params: {sigma_p^2, mu}; exponential params: {ell, mu}.
inline FitReport fit_distribution(const MarginalDistribution& dist, FitModel model) {
    if (dist.basis != Basis::Momentum)
        throw BasisError("fit_distribution: momentum-basis distribution required");
    if (model != FitModel::Gaussian && model != FitModel::Exponential)
        throw DomainError("fit_distribution: model must be Gaussian or Exponential");

    const double peak = *std::max_element(dist.values.begin(), dist.values.end());
    std::vector<double> p, lnf;
    for (size_t i = 0; i < dist.values.size(); ++i) {
        if (dist.values[i] > 1e-12 * peak) {
            p.push_back(dist.samples[i]);
            lnf.push_back(std::log(dist.values[i]));
        }
    }
    if (p.size() < 8)
        throw InsufficientDataError("fit_distribution: only " + std::to_string(p.size()) +
                                    " usable bins, need 8");

    FitReport rep;
    rep.model = model;
    rep.window = {p.front(), p.back()};

    if (model == FitModel::Gaussian) {
        // ln f = c0 + c1 p + c2 p^2
        Eigen::MatrixXd a(p.size(), 3);
        Eigen::VectorXd b(p.size());
        for (size_t i = 0; i < p.size(); ++i) {
            a(i, 0) = 1.0;
            a(i, 1) = p[i];
            a(i, 2) = p[i] * p[i];
            b(i) = lnf[i];
        }
        Eigen::Vector3d c = (a.transpose() * a).ldlt().solve(a.transpose() * b);
        const double sigma2 = c(2) < 0 ? -0.5 / c(2) : std::numeric_limits<double>::infinity();
        const double mu = c(2) != 0 ? -0.5 * c(1) / c(2) : 0.0;
        rep.params = {sigma2, mu};
        double ssr = 0, sst = 0;
        const double ybar = b.mean();
        for (size_t i = 0; i < p.size(); ++i) {
            const double fit = c(0) + c(1) * p[i] + c(2) * p[i] * p[i];
            ssr += (lnf[i] - fit) * (lnf[i] - fit);
            sst += (lnf[i] - ybar) * (lnf[i] - ybar);
        }
        rep.residual = std::sqrt(ssr / p.size());
        rep.r2 = sst > 0 ? 1.0 - ssr / sst : 1.0;
    } else {
        double mu = 0.0;
        for (size_t i = 0; i < dist.values.size(); ++i) mu += dist.values[i] * dist.samples[i];
        std::vector<double> u(p.size());
        for (size_t i = 0; i < p.size(); ++i) u[i] = std::abs(p[i] - mu);
        const LinFit f = linear_fit(u, lnf);
        const double ell = f.slope < 0 ? -1.0 / f.slope : std::numeric_limits<double>::infinity();
        rep.params = {ell, mu};
        rep.residual = f.residual;
        rep.r2 = f.r2;
    }
    return rep;
}

// Time-series fit in the linearizing representation:
//   Linear      y = a + b t          params {a, b}
//   LogLinear   y = a + b ln t       params {a, b}
//   PowerLaw    y = A t^gamma        params {A, gamma}   (log-log)
//   Exponential y = A exp(lambda t)  params {A, lambda}  (semi-log)
// `window` selects t in [lo, hi]; at least 8 samples required.
inline FitReport fit_timeseries(std::span<const double> t, std::span<const double> y,
                                FitModel model, std::pair<double, double> window) {
    if (t.size() != y.size()) throw DimensionError("fit_timeseries: length mismatch");
    std::vector<double> ts, ys;
    std::vector<double> bad;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < window.first || t[i] > window.second) continue;
        const bool need_log_t = model == FitModel::LogLinear || model == FitModel::PowerLaw;
        const bool need_log_y = model == FitModel::PowerLaw || model == FitModel::Exponential;
        if ((need_log_t && t[i] <= 0.0) || (need_log_y && y[i] <= 0.0)) {
            bad.push_back(t[i]);
            continue;
        }
        ts.push_back(t[i]);
        ys.push_back(y[i]);
    }
    if (!bad.empty()) {
        std::ostringstream msg;
        msg << "fit_timeseries(" << to_string(model) << "): nonpositive data at t =";
        for (size_t i = 0; i < bad.size() && i < 10; ++i) msg << " " << bad[i];
        if (bad.size() > 10) msg << " ... (" << bad.size() << " samples)";
        throw DomainError(msg.str());
    }
    if (ts.size() < 8)
        throw InsufficientDataError("fit_timeseries: only " + std::to_string(ts.size()) +
                                    " samples in window, need 8");

    std::vector<double> xs(ts.size()), zs(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
        xs[i] = (model == FitModel::LogLinear || model == FitModel::PowerLaw) ? std::log(ts[i])
                                                                              : ts[i];
        zs[i] = (model == FitModel::PowerLaw || model == FitModel::Exponential) ? std::log(ys[i])
                                                                                : ys[i];
    }
    const LinFit f = linear_fit(xs, zs);
    FitReport rep;
    rep.model = model;
    rep.window = {ts.front(), ts.back()};
    rep.residual = f.residual;
    rep.r2 = f.r2;
    switch (model) {
        case FitModel::Linear:
        case FitModel::LogLinear:
            rep.params = {f.intercept, f.slope};
            break;
        case FitModel::PowerLaw:
        case FitModel::Exponential:
            rep.params = {std::exp(f.intercept), f.slope};
            break;
        default:
            throw DomainError("fit_timeseries: unsupported model");
    }
    return rep;
}

// --- Husimi function -----------------------------------------------------------

// H(x,p) = <alpha_{x,p}| rho_1 |alpha_{x,p}> on the supplied phase-space
// lattice, with periodized coherent probe states of width sigma. Normalized
// so that sum H dx dp / (2 pi hbar_s) ~ 1 (midpoint quadrature).
inline Eigen::MatrixXd husimi(const ReducedDensityMatrix& rho, const GridSpec& grid,
                              std::span<const double> xs, std::span<const double> ps,
                              double sigma) {
    if (rho.basis != Basis::Position)
        throw BasisError("husimi: rho_1 must be in the position basis");
    const int n = static_cast<int>(rho.entries.rows());
    if (n != grid.n1) throw DimensionError("husimi: rho_1 size does not match grid axis 1");

    Eigen::MatrixXd h(xs.size(), ps.size());
    Eigen::VectorXcd alpha(n), tmp(n);
    for (size_t ix = 0; ix < xs.size(); ++ix) {
        for (size_t ip = 0; ip < ps.size(); ++ip) {
            const auto probe =
                coherent_state(grid, 1, CoherentStateSpec{xs[ix], ps[ip], sigma});
            for (int k = 0; k < n; ++k) alpha(k) = probe[k];
            tmp.noalias() = rho.entries * alpha;
            double v = alpha.dot(tmp).real(); // adjoint dot
            if (v < 0.0) {
                if (v < -1e-10) throw NumericalError("husimi: negative value " + std::to_string(v));
                v = 0.0;
            }
            h(ix, ip) = v;
        }
    }
    return h;
}

inline double husimi_norm(const Eigen::MatrixXd& h, double dx, double dp, double hbar_s) {
    return h.sum() * dx * dp / (kTwoPi * hbar_s);
}

// S_lin = 1 - integral of H^2 dx dp / (2 pi hbar_s), midpoint rule.
inline double husimi_linear_entropy(const Eigen::MatrixXd& h, double dx, double dp,
                                    double hbar_s) {
    return 1.0 - h.array().square().sum() * dx * dp / (kTwoPi * hbar_s);
}

// Default 64x64 lattice: x over one period, p out to 4 standard deviations of
// the expected diffusive spread (p_scale^2 ~ D_q t + 1).
struct HusimiLattice {
    std::vector<double> xs, ps;
    double dx = 0.0, dp = 0.0;
};

inline HusimiLattice make_husimi_lattice(double p_scale, int nx = 64, int np = 64) {
    HusimiLattice lat;
    lat.dx = kTwoPi / nx;
    const double pmax = 4.0 * p_scale;
    lat.dp = 2.0 * pmax / np;
    for (int i = 0; i < nx; ++i) lat.xs.push_back((i + 0.5) * lat.dx);
    for (int j = 0; j < np; ++j) lat.ps.push_back(-pmax + (j + 0.5) * lat.dp);
    return lat;
}

// --- diffusion and regime detection ---------------------------------------------

// Slope of <E_1> over the window (units: energy per kick). Uses the dense
// energy series when present, else the scheduled rows.
inline double estimate_dq(const RunRecord& record, std::pair<std::int64_t, std::int64_t> window) {
    std::vector<double> t, e;
    if (!record.energy_e1.empty()) {
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(record.energy_e1.size()); ++i)
            if (i >= window.first && i <= window.second) {
                t.push_back(static_cast<double>(i));
                e.push_back(record.energy_e1[i]);
            }
    } else {
        for (const auto& r : record.rows)
            if (r.t >= window.first && r.t <= window.second && std::isfinite(r.e1)) {
                t.push_back(static_cast<double>(r.t));
                e.push_back(r.e1);
            }
    }
    if (t.size() < 10)
        throw InsufficientDataError("estimate_dq: only " + std::to_string(t.size()) +
                                    " samples in window, need 10");
    const LinFit f = linear_fit(t, e);
    if (!(f.slope > 0.0) || f.slope < 2.0 * f.slope_stderr)
        throw RegimeError("estimate_dq: slope " + std::to_string(f.slope) + " +- " +
                          std::to_string(f.slope_stderr) + " not a significant diffusive growth");
    return f.slope;
}

inline std::vector<double> moving_median(std::span<const double> y, int window = 5) {
    std::vector<double> out(y.size());
    const int half = window / 2;
    std::vector<double> buf;
    for (size_t i = 0; i < y.size(); ++i) {
        buf.clear();
        const size_t lo = i >= static_cast<size_t>(half) ? i - half : 0;
        const size_t hi = std::min(y.size() - 1, i + half);
        for (size_t j = lo; j <= hi; ++j) buf.push_back(y[j]);
        std::sort(buf.begin(), buf.end());
        out[i] = buf[buf.size() / 2];
    }
    return out;
}

struct WindowFitDiag {
    double t_lo = 0.0, t_hi = 0.0;
    double residual = 0.0; // relative RMS misfit of this candidate window
    bool accepted = false;
};

struct RegimeReport {
    std::optional<std::int64_t> t_b;
    std::optional<std::pair<double, double>> idl_interval;
    std::optional<double> t_star_numeric;
    std::optional<double> gamma;  // early S_lin rate (per kick)
    std::optional<double> a_late; // saturation coefficient in 1 - a t^{-1/2}
    std::vector<WindowFitDiag> early_diags, late_diags;
};

namespace detail {

// Scan windows [i0, e] (growing e) resp. [s, end]; among windows whose
// relative RMS is within 25% of the best, prefer the longest.
struct WindowScan {
    size_t lo = 0, hi = 0;
    double slope = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    bool found = false;
};

template <typename FitFn>
inline WindowScan scan_windows(size_t count, size_t min_pts, bool grow_from_start, FitFn fit,
                               std::vector<WindowFitDiag>* diags,
                               std::span<const double> tvals) {
    struct Cand {
        size_t lo, hi;
        double slope, residual;
    };
    std::vector<Cand> cands;
    if (grow_from_start) {
        for (size_t e = min_pts - 1; e < count; ++e) {
            auto [slope, res, ok] = fit(0, e);
            if (diags) diags->push_back({tvals[0], tvals[e], res, false});
            if (ok) cands.push_back({0, e, slope, res});
        }
    } else {
        for (size_t s = 0; s + min_pts <= count; ++s) {
            auto [slope, res, ok] = fit(s, count - 1);
            if (diags) diags->push_back({tvals[s], tvals[count - 1], res, false});
            if (ok) cands.push_back({s, count - 1, slope, res});
        }
    }
    WindowScan best;
    if (cands.empty()) return best;
    double rmin = std::numeric_limits<double>::infinity();
    for (const auto& c : cands) rmin = std::min(rmin, c.residual);
    size_t best_len = 0;
    for (const auto& c : cands) {
        const size_t len = c.hi - c.lo + 1;
        if (c.residual <= 1.25 * rmin + 1e-300 && len > best_len) {
            best = {c.lo, c.hi, c.slope, c.residual, true};
            best_len = len;
        }
    }
    if (diags)
        for (auto& d : *diags)
            if (d.t_lo == tvals[best.lo] && d.t_hi == tvals[best.hi]) d.accepted = true;
    return best;
}

// root of f(t) = gamma*t - 1 + a/sqrt(t) on [1, 1e12] by bisection
inline double crossing_time(double gamma, double a) {
    auto f = [&](double t) { return gamma * t - 1.0 + a / std::sqrt(t); };
    double lo = 1.0, hi = 1e12;
    if (f(lo) >= 0.0 || f(hi) <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// Locate the three energy regimes and the entropy crossover.
//
// t_b: last kick up to which the running slope (E(t)-E(0))/t of the smoothed
// dense energy series stays within `tb_slope_tol` of d_cl.
//
// t*: intersection of (a) the early linear fit of S_lin through the origin
// and (b) the late fit of S_lin to 1 - a t^{-1/2}; both windows picked by
// residual minimization over a window grid. Late windows whose fitted curve
// leaves [0, 1] are rejected, which automatically reports "no crossover" for
// uncoupled runs whose S_lin never saturates.
inline RegimeReport detect_regimes(const RunRecord& record, double d_cl,
                                   double tb_slope_tol = 0.5) {
    RegimeReport rep;

    // break time from the dense energy series
    if (record.energy_e1.size() >= 3 && d_cl > 0.0) {
        const auto e_sm = moving_median(record.energy_e1, 5);
        std::optional<std::int64_t> tb;
        for (size_t t = 1; t < e_sm.size(); ++t) {
            const double slope = (e_sm[t] - e_sm[0]) / static_cast<double>(t);
            if (std::abs(slope - d_cl) <= tb_slope_tol * d_cl)
                tb = static_cast<std::int64_t>(t);
            else
                break;
        }
        rep.t_b = tb;
    }

    // S_lin series (t >= 1)
    std::vector<double> ts, ys;
    for (const auto& r : record.rows)
        if (r.t >= 1 && std::isfinite(r.slin)) {
            ts.push_back(static_cast<double>(r.t));
            ys.push_back(r.slin);
        }
    if (ts.size() >= 16) {
        const auto ysm = moving_median(ys, 5);

        const size_t min_pts = 8;
        auto early_fit = [&](size_t lo, size_t hi) {
            std::span<const double> tw(ts.data() + lo, hi - lo + 1);
            std::span<const double> yw(ysm.data() + lo, hi - lo + 1);
            const LinFit f = linear_fit_through_origin(tw, yw);
            double yrms = 0;
            for (double v : yw) yrms += v * v;
            yrms = std::sqrt(yrms / tw.size());
            const double rel = yrms > 0 ? f.residual / yrms : std::numeric_limits<double>::infinity();
            return std::tuple<double, double, bool>(f.slope, rel, f.slope > 0.0);
        };
        auto early = detail::scan_windows(ts.size(), min_pts, true, early_fit, &rep.early_diags, ts);

        auto late_fit = [&](size_t lo, size_t hi) {
            double suu = 0, suy = 0, syy = 0;
            for (size_t i = lo; i <= hi; ++i) {
                const double u = 1.0 / std::sqrt(ts[i]);
                const double y = 1.0 - ysm[i];
                suu += u * u;
                suy += u * y;
                syy += y * y;
            }
            const double a = suu > 0 ? suy / suu : 0.0;
            double ssr = 0;
            double umax = 0;
            for (size_t i = lo; i <= hi; ++i) {
                const double u = 1.0 / std::sqrt(ts[i]);
                umax = std::max(umax, u);
                const double r = (1.0 - ysm[i]) - a * u;
                ssr += r * r;
            }
            const size_t n = hi - lo + 1;
            const double rel = syy > 0 ? std::sqrt(ssr / n) / std::sqrt(syy / n)
                                       : std::numeric_limits<double>::infinity();
            const bool in_range = a > 0.0 && a * umax < 1.0; // curve stays in [0,1]
            return std::tuple<double, double, bool>(a, rel, in_range);
        };
        auto late = detail::scan_windows(ts.size(), min_pts, false, late_fit, &rep.late_diags, ts);

        if (early.found) rep.gamma = early.slope;
        if (late.found) rep.a_late = late.slope;
        if (early.found && late.found && late.residual < 0.25) {
            const double tstar = detail::crossing_time(early.slope, late.slope);
            if (std::isfinite(tstar)) rep.t_star_numeric = tstar;
        }
    }

    if (rep.t_b && rep.t_star_numeric && *rep.t_star_numeric <= static_cast<double>(*rep.t_b))
        rep.t_star_numeric.reset(); // no separation: keep the energy-based break time only
    if (rep.t_b && rep.t_star_numeric)
        rep.idl_interval = {{static_cast<double>(*rep.t_b), *rep.t_star_numeric}};
    return rep;
}

// Longest early window over which `values(t)` is linear through the origin;
// used for the entanglement growth rate Gamma in coupling sweeps.
inline std::optional<std::pair<double, std::pair<double, double>>>
early_linear_rate(std::span<const double> t, std::span<const double> y) {
    std::vector<double> ts, ys;
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] >= 1.0) {
            ts.push_back(t[i]);
            ys.push_back(y[i]);
        }
    if (ts.size() < 8) return std::nullopt;
    const auto ysm = moving_median(ys, 5);
    auto fit = [&](size_t lo, size_t hi) {
        std::span<const double> tw(ts.data() + lo, hi - lo + 1);
        std::span<const double> yw(ysm.data() + lo, hi - lo + 1);
        const LinFit f = linear_fit_through_origin(tw, yw);
        double yrms = 0;
        for (double v : yw) yrms += v * v;
        yrms = std::sqrt(yrms / tw.size());
        const double rel = yrms > 0 ? f.residual / yrms : std::numeric_limits<double>::infinity();
        return std::tuple<double, double, bool>(f.slope, rel, f.slope > 0.0);
    };
    auto scan = detail::scan_windows(ts.size(), 8, true, fit, nullptr, ts);
    if (!scan.found) return std::nullopt;
    return {{scan.slope, {ts[scan.lo], ts[scan.hi]}}};
}

} // namespace ckr
