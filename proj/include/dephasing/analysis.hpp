#pragma once

// Measurement pipeline on coherence traces: Ramsey spectra, echo-peak
// tracking, decay constants and the CPMG idle-time sweep.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dephasing/bath.hpp"
#include "dephasing/dynamics.hpp"
#include "dephasing/error.hpp"
#include "dephasing/fitting.hpp"
#include "dephasing/schedule.hpp"

namespace dephasing {

// ---- Spectrum ----

struct Spectrum {
    std::vector<double> frequencies;
    std::vector<double> values;  ///< scaled so that the maximum is 1
    double peak_frequency{0.0};
    double raw_max{0.0};  ///< maximum before scaling
    bool normalized{false};
    std::vector<std::string> warnings;
};

inline std::vector<double> linear_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw ValidationError("grid: need step > 0 and hi >= lo");
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
    return g;
}

/// S(ω) = Re ∫_0^{T} Re ρ_eg(t) e^{−iωt} dt by the trapezoidal rule, peak-normalized.
inline Spectrum ramsey_spectrum(const CoherenceTrace& tr, const std::vector<double>& omega) {
    if (tr.times.size() < 2) throw ValidationError("ramsey_spectrum: need at least two samples");
    if (omega.empty()) throw ValidationError("ramsey_spectrum: empty frequency grid");
    Spectrum sp;
    sp.frequencies = omega;
    const double first = std::abs(tr.values.front());
    if (std::abs(tr.values.back()) > 1e-3 * first)
        sp.warnings.push_back("trace not decayed below 1e-3 of its initial value; spectrum truncated");
    const std::size_t n = tr.times.size();
    sp.values.reserve(omega.size());
    for (double w : omega) {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = tr.times[i + 1] - tr.times[i];
            const double f0 = tr.values[i].real() * std::cos(w * tr.times[i]);
            const double f1 = tr.values[i + 1].real() * std::cos(w * tr.times[i + 1]);
            acc += 0.5 * h * (f0 + f1);
        }
        sp.values.push_back(acc);
    }
    const auto it = std::max_element(sp.values.begin(), sp.values.end());
    sp.raw_max = *it;
    sp.peak_frequency = omega[static_cast<std::size_t>(it - sp.values.begin())];
    if (!(sp.raw_max > 0.0)) {
        sp.warnings.push_back("spectrum has no positive maximum; not normalized");
        return sp;
    }
    for (double& v : sp.values) v /= sp.raw_max;
    sp.normalized = true;
    return sp;
}

/// Mean oscillation frequency of ρ_eg: least-squares slope of the unwrapped phase
/// −arg ρ_eg over the leading samples with |ρ_eg| ≥ floor·|ρ_eg(0)|.
inline double oscillation_frequency(const CoherenceTrace& tr, double floor = 1e-3) {
    const auto y = tr.magnitudes();
    const std::size_t n = decay_window(y, floor);
    if (n < 2) throw ValidationError("oscillation_frequency: fewer than two samples above the floor");
    std::vector<double> ph(n);
    double prev = 0.0, offset = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = -std::arg(tr.values[i]);
        if (i > 0) {
            const double d = a - prev;
            if (d > std::numbers::pi) offset -= 2.0 * std::numbers::pi;
            if (d < -std::numbers::pi) offset += 2.0 * std::numbers::pi;
        }
        prev = a;
        ph[i] = a + offset;
    }
    double mt = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < n; ++i) mt += tr.times[i], mp += ph[i];
    mt /= static_cast<double>(n);
    mp /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (tr.times[i] - mt) * (ph[i] - mp);
        sxx += (tr.times[i] - mt) * (tr.times[i] - mt);
    }
    return sxy / sxx;
}

// ---- Echo peaks ----

struct EchoPeak {
    double dt{0.0};
    double dt2{0.0};
    double t_total{0.0};
    double value{0.0};
};

struct EchoSearch {
    double step = 0.05;   ///< Δt′ grid step
    double span = 100.0;  ///< Δt′ searched on (0, span]
    double tail_settle = 5.0;   ///< when no peaks: skip this long after the pulse
    double tail_span = 200.0;   ///< and fit the trace out to this Δt′
};

struct EchoPeakTrack {
    std::vector<EchoPeak> peaks;
    bool no_peaks{false};  ///< no Δt produced a local maximum in Δt′
};

/// Index of the first interior local maximum of y, if any.
inline std::optional<std::size_t> first_local_max(const std::vector<double>& y) {
    for (std::size_t j = 1; j + 1 < y.size(); ++j)
        if (y[j] > y[j - 1] && y[j] >= y[j + 1]) return j;
    return std::nullopt;
}

/// For each Δt, the first local maximum of |ρ_eg(Δt + Δt′)| over Δt′, refined by a parabola through three samples.
inline EchoPeakTrack echo_peak_track(const BathKernels& k, const std::vector<double>& dt_grid, EchoSearch search = {}) {
    if (!(search.step > 0.0) || !(search.span > 2.0 * search.step))
        throw ValidationError("echo_peak_track: need step > 0 and span > 2 step");
    EchoPeakTrack out;
    for (double dt : dt_grid) {
        if (!(dt > 0.0)) throw ValidationError("echo_peak_track: dt must be positive");
        const PulseSchedule s = hahn_echo(dt, search.span);
        std::vector<double> times;
        const auto n = static_cast<std::size_t>(std::floor(search.span / search.step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) times.push_back(dt + static_cast<double>(i) * search.step);
        const PathQuantities q = path_quantities(k, s, times, false);
        std::vector<double> y;
        y.reserve(q.gamma.size());
        for (double g : q.gamma) y.push_back(0.5 * std::exp(-g));
        const auto j = first_local_max(y);
        if (!j) continue;
        const double ym = y[*j - 1], y0 = y[*j], yp = y[*j + 1];
        const double curv = ym - 2.0 * y0 + yp;
        double shift = 0.0;
        double value = y0;
        if (curv < 0.0) {
            shift = 0.5 * (ym - yp) / curv;
            value = y0 - 0.125 * (ym - yp) * (ym - yp) / curv;
        }
        const double dt2 = (static_cast<double>(*j) + shift) * search.step;
        out.peaks.push_back({dt, dt2, dt + dt2, value});
    }
    out.no_peaks = out.peaks.empty();
    return out;
}

/// Decay constant of the peak series, the better of SingleExp and Gaussian.
inline FitResult echo_time_constant(const EchoPeakTrack& track) {
    std::vector<EchoPeak> p = track.peaks;
    std::sort(p.begin(), p.end(), [](const EchoPeak& a, const EchoPeak& b) { return a.t_total < b.t_total; });
    std::vector<double> t, y;
    for (const auto& e : p) {
        if (!t.empty() && e.t_total <= t.back()) continue;
        t.push_back(e.t_total);
        y.push_back(e.value);
    }
    return fit_time_constant(t, y, {FitModel::SingleExp, FitModel::Gaussian});
}

/// |ρ_eg| of one echo trace after the post-pulse drop has settled:
/// total times from dt + settle to dt + span.
inline std::pair<std::vector<double>, std::vector<double>> echo_tail(const BathKernels& k, double dt, double settle,
                                                                     double span, double step = 0.05) {
    if (!(settle >= 0.0) || !(span > settle)) throw ValidationError("echo_tail: need 0 <= settle < span");
    const PulseSchedule s = hahn_echo(dt, span);
    std::vector<double> times;
    for (double d = settle; d <= span + 1e-9; d += step) times.push_back(dt + d);
    const PathQuantities q = path_quantities(k, s, times, false);
    std::vector<double> y;
    for (double g : q.gamma) y.push_back(0.5 * std::exp(-g));
    return {times, y};
}

struct EchoConstant {
    FitResult fit;
    bool from_tail{false};  ///< no recovery peaks; fitted the post-pulse tail of the largest Δt
    EchoPeakTrack track;
};

/// T_E: Gaussian or exponential fit of the peak series, or, when no Δt shows a
/// recovery, a SingleExp fit of the settled tail of the longest echo.
inline EchoConstant echo_time_constant(const BathKernels& k, const std::vector<double>& dt_grid, EchoSearch search = {}) {
    EchoConstant out;
    out.track = echo_peak_track(k, dt_grid, search);
    if (out.track.peaks.size() >= 8) {
        out.fit = echo_time_constant(out.track);
        return out;
    }
    const double dt = *std::max_element(dt_grid.begin(), dt_grid.end());
    auto [t, y] = echo_tail(k, dt, search.tail_settle, search.tail_span, search.step);
    out.fit = fit_time_constant(t, y, {FitModel::SingleExp});
    out.from_tail = true;
    return out;
}

// ---- Ramsey constant ----

/// True when |ρ_eg| drops measurably below its initial value.
inline bool has_decay(const std::vector<double>& y, double rel = 1e-9) {
    if (y.empty()) return false;
    const double lo = *std::min_element(y.begin(), y.end());
    return lo < (1.0 - rel) * y.front();
}

struct RamseyWindows {
    double two_component = 1e-9;  ///< two-component fits use samples down to this fraction of |ρ(0)|
    double one_component = 1e-3;  ///< single-component fits stop here
};

/// T_R from a Ramsey trace: two-component models for s ≥ 1/2, single-component otherwise.
inline FitResult ramsey_time_constant(const CoherenceTrace& tr, RamseyWindows w = {}) {
    const std::vector<double> y = tr.magnitudes();
    const bool two = tr.spec.s >= 0.5;
    const std::size_t n = decay_window(y, two ? w.two_component : w.one_component);
    const std::vector<double> tt(tr.times.begin(), tr.times.begin() + static_cast<std::ptrdiff_t>(n));
    const std::vector<double> yy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
    if (two) return fit_time_constant(tt, yy, {FitModel::TwoExp, FitModel::ExpPlusGauss});
    return fit_time_constant(tt, yy, {FitModel::SingleExp, FitModel::Gaussian});
}

// ---- Dynamical-decoupling sweep ----

struct DdPoint {
    double dt{0.0};
    int cycles{0};
    double t_dd{0.0};
    bool lower_bound{false};  ///< decay too small to fit; t_dd is a lower bound
    std::optional<FitResult> fit;
    std::vector<double> times;   ///< cycle ends
    std::vector<double> values;  ///< |ρ_eg| at the cycle ends
};

struct DdSweepOptions {
    double total_time = 200.0;
    double value_floor = 1e-4;  ///< cycle-end samples at or below this are not fitted
};

/// T_DD(Δt): symmetric CPMG with floor(total/(2Δt)) cycles, |ρ_eg| sampled at every
/// cycle end and fitted with a single exponential with non-negative offset.
inline std::vector<DdPoint> dd_sweep(const BathKernels& k, const std::vector<double>& dt_grid, DdSweepOptions opt = {}) {
    std::vector<DdPoint> out;
    for (double dt : dt_grid) {
        if (!(dt > 0.0)) throw ValidationError("dd_sweep: dt must be positive");
        const int n = static_cast<int>(std::floor(opt.total_time / (2.0 * dt) + 1e-9));
        if (n < 2) throw ValidationError("dd_sweep: fewer than two cycles fit in the total time");
        const PulseSchedule s = cpmg_symmetric(n, dt);
        DdPoint pt;
        pt.dt = dt;
        pt.cycles = n;
        pt.times.push_back(0.0);
        for (int m = 1; m <= n; ++m) pt.times.push_back(2.0 * m * dt);
        const PathQuantities q = path_quantities(k, s, pt.times, false);
        for (double g : q.gamma) pt.values.push_back(0.5 * std::exp(-g));

        std::vector<double> t, y;
        for (std::size_t i = 0; i < pt.times.size(); ++i) {
            if (pt.values[i] <= opt.value_floor) break;
            t.push_back(pt.times[i]);
            y.push_back(pt.values[i]);
        }
        const double drop = t.empty() ? 0.0 : q.gamma[t.size() - 1] - q.gamma[0];
        if (t.size() < 8 || drop < 1e-6) {
            pt.lower_bound = true;
            pt.t_dd = (t.empty() ? 0.0 : t.back()) / std::max(drop, 1e-6);
        } else {
            FitOptions fo;
            fo.nonneg_offset = true;
            pt.fit = fit_model(FitModel::SingleExp, t, y, fo);
            pt.t_dd = pt.fit->time_constant;
        }
        out.push_back(std::move(pt));
    }
    return out;
}

}  // namespace dephasing
