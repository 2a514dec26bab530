#pragma once

// Coherence traces ρ_eg(t) under pulse schedules, for factorized and
// correlated initial states, and a brute-force path-sum oracle.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dephasing/bath.hpp"
#include "dephasing/decoherence.hpp"
#include "dephasing/error.hpp"
#include "dephasing/mode_expansion.hpp"
#include "dephasing/schedule.hpp"

namespace dephasing {

enum class InitialState { Factorized, Correlated };

inline const char* to_string(InitialState s) {
    return s == InitialState::Factorized ? "factorized" : "correlated";
}

struct CoherenceTrace {
    std::vector<double> times;
    std::vector<std::complex<double>> values;
    PulseSchedule schedule;
    InitialState initial{InitialState::Factorized};
    BathSpec spec;

    std::vector<double> magnitudes() const {
        std::vector<double> out;
        out.reserve(values.size());
        for (const auto& v : values) out.push_back(std::abs(v));
        return out;
    }
};

namespace detail {

/// Thermal weights of the bare qubit: e^{±β/2}/Z with Z = 2cosh(β/2).
inline std::array<double, 2> boltzmann_weights(double beta) {
    const double p = 1.0 / (1.0 + std::exp(-beta));
    return {p, 1.0 - p};
}

inline std::complex<double> coherence(InitialState init, double beta, double gamma, double phase, double shift) {
    const std::complex<double> base = 0.5 * std::exp(std::complex<double>(-gamma, -phase));
    if (init == InitialState::Factorized) return base;
    const auto w = boltzmann_weights(beta);
    return base * (w[0] * std::polar(1.0, -2.0 * shift) - w[1] * std::polar(1.0, 2.0 * shift));
}

inline void require_sorted(const std::vector<double>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] >= 0.0) || !std::isfinite(t[i])) throw ValidationError("trace: sample times must be non-negative");
        if (i > 0 && t[i] < t[i - 1]) throw ValidationError("trace: sample times must be ascending");
    }
}

}  // namespace detail

/// Uniform grid 0, dt, …, up to t_end.
inline std::vector<double> uniform_times(double t_end, double dt = 0.01) {
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw ValidationError("uniform_times: need dt > 0 and t_end >= 0");
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    t.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t.push_back(static_cast<double>(i) * dt);
    return t;
}

inline CoherenceTrace ramsey_trace(const BathKernels& k, InitialState init, const std::vector<double>& times) {
    detail::require_sorted(times);
    CoherenceTrace tr;
    tr.times = times;
    tr.schedule = ramsey(times.empty() ? 0.0 : times.back());
    tr.initial = init;
    tr.spec = k.spec();
    tr.values.reserve(times.size());
    for (double t : times) {
        const double gamma = 4.0 * k.twice_integrated_correlation(t);
        const double shift = init == InitialState::Correlated ? 2.0 * k.integrated_relaxation(t) : 0.0;
        tr.values.push_back(detail::coherence(init, k.spec().beta, gamma, t, shift));
    }
    return tr;
}

inline CoherenceTrace ramsey_trace(const BathSpec& spec, InitialState init, const std::vector<double>& times) {
    return ramsey_trace(BathKernels(spec), init, times);
}

/// Γ, ω_q-phase and L̄-shift of the schedule truncated at each sample time.
/// Samples must be ascending; the switching sign is taken so that the segment
/// containing the sample carries v× = +2.
struct PathQuantities {
    std::vector<double> gamma;
    std::vector<double> phase;
    std::vector<double> shift;
};

inline PathQuantities path_quantities(const BathKernels& k, const PulseSchedule& s, const std::vector<double>& times,
                                      bool need_shift, bool after_pulse = true) {
    detail::require_sorted(times);
    const SwitchingProfile p = switching_profile(s);
    const double T = p.duration();
    if (!times.empty() && times.back() > T * (1.0 + 1e-12) + 1e-12)
        throw ValidationError("sequence_trace: sample time beyond the schedule");
    std::vector<double> tau, dv;
    p.jumps(tau, dv);
    tau.pop_back();  // the switch-off jump depends on the sample
    dv.pop_back();
    detail::LagCache phi([&k](double lag) { return k.twice_integrated_correlation(lag); }, T);

    PathQuantities out;
    out.gamma.reserve(times.size());
    out.phase.reserve(times.size());
    out.shift.reserve(times.size());
    double fixed = 0.0;      // −Σ_{i<j} δv_i δv_j Φ over jumps already passed
    std::size_t passed = 0;  // jumps already passed
    double area = 0.0;       // ∫ v× dt over completed segments
    double shift = 0.0;      // ∫ v× L̄ dt over completed segments
    for (double t : times) {
        while (passed < tau.size() && (tau[passed] < t || (after_pulse && tau[passed] == t))) {
            double row = 0.0;
            for (std::size_t i = 0; i < passed; ++i) row += dv[i] * phi(tau[passed] - tau[i]);
            fixed -= dv[passed] * row;
            if (passed > 0) {
                const double v = p.values[passed - 1];
                area += v * (tau[passed] - tau[passed - 1]);
                if (need_shift)
                    shift += v * (k.integrated_relaxation(tau[passed]) - k.integrated_relaxation(tau[passed - 1]));
            }
            ++passed;
        }
        if (passed == 0) {
            out.gamma.push_back(0.0);
            out.phase.push_back(0.0);
            out.shift.push_back(0.0);
            continue;
        }
        const double v = p.values[passed - 1];
        double row = 0.0;
        for (std::size_t i = 0; i < passed; ++i) row += dv[i] * phi(t - tau[i]);
        out.gamma.push_back(fixed + v * row);
        const double sign = v > 0.0 ? 1.0 : -1.0;
        const double start = tau[passed - 1];
        out.phase.push_back(0.5 * sign * (area + v * (t - start)));
        if (need_shift) {
            const double cur = v * (k.integrated_relaxation(t) - k.integrated_relaxation(start));
            out.shift.push_back(sign * (shift + cur));
        } else {
            out.shift.push_back(0.0);
        }
    }
    return out;
}

/// ρ_eg at each sample time, the schedule truncated at that time. A sample at a
/// pulse instant is taken just after the pulse unless after_pulse is false.
inline CoherenceTrace sequence_trace(const BathKernels& k, InitialState init, const PulseSchedule& s,
                                     const std::vector<double>& times, bool after_pulse = true) {
    const PathQuantities q = path_quantities(k, s, times, init == InitialState::Correlated, after_pulse);
    CoherenceTrace tr;
    tr.times = times;
    tr.schedule = s;
    tr.initial = init;
    tr.spec = k.spec();
    tr.values.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        tr.values.push_back(detail::coherence(init, k.spec().beta, q.gamma[i], q.phase[i], q.shift[i]));
    return tr;
}

inline CoherenceTrace sequence_trace(const BathSpec& spec, InitialState init, const PulseSchedule& s,
                                     const std::vector<double>& times, bool after_pulse = true) {
    return sequence_trace(BathKernels(spec), init, s, times, after_pulse);
}

/// Γ(t) from per-mode accumulators A_k(t) = ∫_0^t v×(t′) e^{−z_k(t−t′)} dt′,
/// advanced in closed form across each constant segment.
inline double mode_propagated_exponent(const ModeExpansion& e, const SwitchingProfile& p, double t) {
    if (t < 0.0) throw ValidationError("mode_propagated_exponent: t must be non-negative");
    if (t > p.duration() * (1.0 + 1e-12)) throw ValidationError("mode_propagated_exponent: t beyond the profile");
    if (t == 0.0) return 0.0;
    e.check_range(t);
    std::vector<std::complex<double>> acc(e.modes.size(), {0.0, 0.0});
    double gamma = 0.0;
    for (std::size_t l = 0; l < p.values.size(); ++l) {
        const double a = p.breakpoints[l];
        if (a >= t) break;
        const double h = std::min(p.breakpoints[l + 1], t) - a;
        if (h <= 0.0) continue;
        const double v = p.values[l];
        for (std::size_t m = 0; m < e.modes.size(); ++m) {
            const Mode& md = e.modes[m];
            const std::complex<double> zh(md.gamma * h, md.omega * h);
            const std::complex<double> f1 = detail::phi1(zh);
            const std::complex<double> f2 = detail::phi2(zh);
            gamma += (md.d * v * (acc[m] * h * f1 + v * h * h * f2)).real();
            acc[m] = std::exp(-zh) * acc[m] + v * h * f1;
        }
    }
    return gamma;
}

/// γ_pd = 2π lim_{ω→0} J coth(βω/2).
inline MaybeFinite markov_dephasing_rate(const BathSpec& spec) {
    spec.validate();
    if (spec.kappa == 0.0) return 0.0;
    if (spec.omega_ir > 0.0 || spec.s > 1.0) return 0.0;
    if (spec.s < 1.0) return Divergence{"zero-frequency noise diverges for s < 1; no Markov rate"};
    return 2.0 * std::numbers::pi * spec.kappa * 2.0 / spec.beta;
}

/// Explicit sum over all bra/ket label paths of the schedule truncated at t,
/// each weighted by its influence functional. At most four pulses.
inline std::complex<double> path_sum_oracle(const BathKernels& k, const PulseSchedule& s, InitialState init,
                                            double t, bool after_pulse = true) {
    if (s.pulse_count() > 4) throw ValidationError("path_sum_oracle: at most four pulses (two CPMG cycles)");
    if (t < 0.0 || t > s.duration() * (1.0 + 1e-12) + 1e-12)
        throw ValidationError("path_sum_oracle: t outside the schedule");
    const PulseSchedule cut = truncate(s, t, after_pulse);
    const std::size_t segs = cut.intervals.size();
    using C = std::complex<double>;
    const double r = std::numbers::sqrt2 / 2.0;
    // label 0 = ground, 1 = excited; σ_z|a⟩ = (−1)^{a+1}|a⟩
    const auto sz = [](int a) { return a == 1 ? 1.0 : -1.0; };
    // ⟨a|R_y(−π/2)|c⟩ and ⟨c|R_y(π/2)|b⟩
    const auto ry_minus = [r](int a, int c) { return (a == c) ? r : (a == 1 ? r : -r); };
    const auto ry_plus = [r](int c, int b) { return (c == b) ? r : (c == 1 ? -r : r); };
    // ⟨a|R_x(π)|b⟩ = −i ⟨a|σ_x|b⟩, ⟨a|R_x(−π)|b⟩ = i ⟨a|σ_x|b⟩
    const auto rx = [](int a, int b, double sign) { return a == b ? C{0.0, 0.0} : C{0.0, -sign}; };

    std::vector<double> starts(segs + 1, 0.0);
    for (std::size_t l = 0; l < segs; ++l) starts[l + 1] = starts[l] + cut.intervals[l];
    const double beta = k.spec().beta;
    const double z = 2.0 * std::cosh(0.5 * beta);

    C total{0.0, 0.0};
    const unsigned paths = 1u << segs;
    for (unsigned amask = 0; amask < paths; ++amask) {
        for (unsigned bmask = 0; bmask < paths; ++bmask) {
            std::vector<int> a(segs), b(segs);
            for (std::size_t l = 0; l < segs; ++l) {
                a[l] = (amask >> l) & 1u;
                b[l] = (bmask >> l) & 1u;
            }
            if (a.back() != 1 || b.back() != 0) continue;
            C amp{1.0, 0.0};
            for (std::size_t l = 0; l + 1 < segs; ++l)
                amp *= rx(a[l + 1], a[l], 1.0) * rx(b[l], b[l + 1], -1.0);
            if (amp == C{0.0, 0.0}) continue;
            SwitchingProfile p;
            p.breakpoints = starts;
            double phase = 0.0;
            double shift = 0.0;
            for (std::size_t l = 0; l < segs; ++l) {
                const double vx = sz(a[l]) - sz(b[l]);
                p.values.push_back(vx);
                phase += 0.5 * vx * cut.intervals[l];
                shift += vx * (k.integrated_relaxation(starts[l + 1]) - k.integrated_relaxation(starts[l]));
            }
            const double gamma = lag_exponent(k, p);
            const C path = amp * std::exp(C(-gamma, -phase));
            if (init == InitialState::Factorized) {
                total += path * ry_minus(a[0], 0) * ry_plus(0, b[0]);
                continue;
            }
            for (int c = 0; c < 2; ++c) {
                const double weight = std::exp(-0.5 * beta * sz(c)) / z;
                // +2i ∫ v× L̄ (−1)^{c+1}
                const C corr = std::polar(1.0, 2.0 * shift * sz(c));
                total += path * corr * weight * ry_minus(a[0], c) * ry_plus(c, b[0]);
            }
        }
    }
    return total;
}

inline std::complex<double> path_sum_oracle(const BathSpec& spec, const PulseSchedule& s, InitialState init,
                                            double t, bool after_pulse = true) {
    return path_sum_oracle(BathKernels(spec), s, init, t, after_pulse);
}

}  // namespace dephasing
