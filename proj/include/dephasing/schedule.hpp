#pragma once

// Pulse schedules of instantaneous π_x pulses and the switching profile of the
// coherence path.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "dephasing/error.hpp"

namespace dephasing {

enum class ScheduleKind { Ramsey, HahnEcho, CpmgSymmetric, CpmgAsymmetric, Custom };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Ramsey: return "Ramsey";
        case ScheduleKind::HahnEcho: return "HahnEcho";
        case ScheduleKind::CpmgSymmetric: return "CpmgSymmetric";
        case ScheduleKind::CpmgAsymmetric: return "CpmgAsymmetric";
        case ScheduleKind::Custom: return "Custom";
    }
    return "?";
}

/// Idle intervals t_1 … t_{m+1}; a π pulse separates each consecutive pair.
struct PulseSchedule {
    ScheduleKind kind{ScheduleKind::Ramsey};
    int cycles{0};  // CPMG cycle count n (2n pulses); 0 otherwise
    std::vector<double> intervals;

    std::size_t pulse_count() const noexcept { return intervals.empty() ? 0 : intervals.size() - 1; }

    double duration() const noexcept {
        double t = 0.0;
        for (double d : intervals) t += d;
        return t;
    }

    /// Pulse instants, cumulative sums of the intervals.
    std::vector<double> pulse_times() const {
        std::vector<double> out;
        double t = 0.0;
        for (std::size_t i = 0; i + 1 < intervals.size(); ++i) {
            t += intervals[i];
            out.push_back(t);
        }
        return out;
    }

    std::string label() const {
        std::string s = to_string(kind);
        if (kind == ScheduleKind::CpmgSymmetric || kind == ScheduleKind::CpmgAsymmetric)
            s += "(" + std::to_string(cycles) + ")";
        return s;
    }
};

namespace detail {
inline void require_duration(double d, const char* what) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError(std::string("schedule: ") + what + " must be non-negative");
}
}  // namespace detail

inline PulseSchedule ramsey(double t) {
    detail::require_duration(t, "duration");
    return {ScheduleKind::Ramsey, 0, {t}};
}

inline PulseSchedule hahn_echo(double dt, double dt2) {
    detail::require_duration(dt, "dt");
    detail::require_duration(dt2, "dt'");
    return {ScheduleKind::HahnEcho, 0, {dt, dt2}};
}

/// (Δt/2, Δt, …, Δt, tail) with 2n pulses; tail defaults to Δt/2.
inline PulseSchedule cpmg_symmetric(int n, double dt, double tail = -1.0) {
    if (n < 1) throw ValidationError("schedule: n must be at least 1");
    detail::require_duration(dt, "dt");
    if (tail < 0.0) tail = 0.5 * dt;
    PulseSchedule s{ScheduleKind::CpmgSymmetric, n, {}};
    s.intervals.reserve(2 * static_cast<std::size_t>(n) + 1);
    s.intervals.push_back(0.5 * dt);
    for (int i = 0; i < 2 * n - 1; ++i) s.intervals.push_back(dt);
    s.intervals.push_back(tail);
    return s;
}

/// (Δt, …, Δt, 0) with 2n pulses.
inline PulseSchedule cpmg_asymmetric(int n, double dt) {
    if (n < 1) throw ValidationError("schedule: n must be at least 1");
    detail::require_duration(dt, "dt");
    PulseSchedule s{ScheduleKind::CpmgAsymmetric, n, {}};
    s.intervals.assign(2 * static_cast<std::size_t>(n), dt);
    s.intervals.push_back(0.0);
    return s;
}

inline PulseSchedule custom_schedule(std::vector<double> intervals) {
    if (intervals.empty()) throw ValidationError("schedule: at least one interval required");
    for (double d : intervals) detail::require_duration(d, "interval");
    return {ScheduleKind::Custom, 0, std::move(intervals)};
}

/// Ramsey: a = T. HahnEcho: a = Δt, b = Δt′. CPMG: a = Δt, b = n.
inline PulseSchedule make_schedule(ScheduleKind kind, double a, double b = 0.0) {
    switch (kind) {
        case ScheduleKind::Ramsey: return ramsey(a);
        case ScheduleKind::HahnEcho: return hahn_echo(a, b);
        case ScheduleKind::CpmgSymmetric:
        case ScheduleKind::CpmgAsymmetric: {
            if (b < 1.0 || b != std::floor(b)) throw ValidationError("schedule: n must be a positive integer");
            const int n = static_cast<int>(b);
            return kind == ScheduleKind::CpmgSymmetric ? cpmg_symmetric(n, a) : cpmg_asymmetric(n, a);
        }
        case ScheduleKind::Custom: break;
    }
    throw ValidationError("make_schedule: use custom_schedule for Custom");
}

/// Same schedule with the interval order reversed.
inline PulseSchedule reversed(const PulseSchedule& s) {
    PulseSchedule r = s;
    r.kind = ScheduleKind::Custom;
    r.intervals.assign(s.intervals.rbegin(), s.intervals.rend());
    return r;
}

/// The schedule observed up to time t: later intervals dropped, the current one
/// cut at t. A pulse exactly at t is kept when after_pulse is set.
inline PulseSchedule truncate(const PulseSchedule& s, double t, bool after_pulse = true) {
    if (t < 0.0) throw ValidationError("truncate: t must be non-negative");
    PulseSchedule r{s.kind, s.cycles, {}};
    double acc = 0.0;
    for (std::size_t i = 0; i < s.intervals.size(); ++i) {
        const double end = acc + s.intervals[i];
        const bool last = i + 1 == s.intervals.size();
        if (t < end || last || (t == end && !after_pulse)) {
            r.intervals.push_back(std::min(s.intervals[i], std::max(0.0, t - acc)));
            return r;
        }
        r.intervals.push_back(s.intervals[i]);
        acc = end;
    }
    return r;
}

// ---- Switching profile ----

/// Piecewise-constant v× = v − v′ along the coherence path: ±2, starting at +2.
struct SwitchingProfile {
    std::vector<double> breakpoints;  // 0 = t̃_0 ≤ … ≤ t̃_{m+1} = T
    std::vector<double> values;       // one per segment

    double duration() const noexcept { return breakpoints.empty() ? 0.0 : breakpoints.back(); }
    std::size_t segments() const noexcept { return values.size(); }

    /// Jump times and jump sizes of v×, including the switch-on at 0 and switch-off at T.
    void jumps(std::vector<double>& times, std::vector<double>& sizes) const {
        times.clear();
        sizes.clear();
        double prev = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            times.push_back(breakpoints[i]);
            sizes.push_back(values[i] - prev);
            prev = values[i];
        }
        times.push_back(duration());
        sizes.push_back(-prev);
    }
};

inline SwitchingProfile switching_profile(const PulseSchedule& s) {
    SwitchingProfile p;
    double t = 0.0;
    double v = 2.0;
    p.breakpoints.push_back(0.0);
    for (double d : s.intervals) {
        t += d;
        p.breakpoints.push_back(t);
        p.values.push_back(v);
        v = -v;
    }
    return p;
}

/// f×(ω) = ∫_0^T v×(t) e^{iωt} dt, summed segment by segment in a form that is
/// regular at ω = 0.
inline std::complex<double> filter_amplitude(const SwitchingProfile& p, double omega) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t l = 0; l < p.values.size(); ++l) {
        const double a = p.breakpoints[l];
        const double h = p.breakpoints[l + 1] - a;
        if (h == 0.0) continue;
        const double x = 0.5 * omega * h;
        const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
        acc += p.values[l] * h * sinc * std::polar(1.0, omega * (a + 0.5 * h));
    }
    return acc;
}

/// |f×(ω)|²
inline double filter_weight(const SwitchingProfile& p, double omega) { return std::norm(filter_amplitude(p, omega)); }

}  // namespace dephasing
