#pragma once

// Decoherence exponent Γ = ½ ∫∫ v×(t) C'(t − t') v×(t') dt dt' of a switching
// profile, by three independent routes, plus the echo/CPMG closed forms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <unordered_map>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dephasing/bath.hpp"
#include "dephasing/error.hpp"
#include "dephasing/schedule.hpp"
#include "dephasing/spectral_transform.hpp"

namespace dephasing {

namespace detail {

/// Memoizes f(lag) for lags that agree to a relative quantum of the total span.
class LagCache {
public:
    LagCache(std::function<double(double)> f, double span) : f_(std::move(f)), q_(span > 0.0 ? span * 1e-13 : 1.0) {}
    double operator()(double lag) {
        const auto key = static_cast<long long>(std::llround(lag / q_));
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double v = f_(lag);
        cache_.emplace(key, v);
        return v;
    }

private:
    std::function<double(double)> f_;
    double q_;
    std::unordered_map<long long, double> cache_;
};

/// ½ Σ_ij a_i a_j F(|τ_i − τ_j|) over the jumps of a profile, F(0) included once per i.
inline double pair_sum(const SwitchingProfile& p, const std::function<double(double)>& f) {
    std::vector<double> tau, dv;
    p.jumps(tau, dv);
    LagCache cache(f, p.duration());
    double diag = 0.0;
    double off = 0.0;
    const double f0 = cache(0.0);
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (dv[i] == 0.0) continue;
        diag += dv[i] * dv[i] * f0;
        double row = 0.0;
        for (std::size_t j = i + 1; j < tau.size(); ++j) {
            if (dv[j] == 0.0) continue;
            row += dv[j] * cache(tau[j] - tau[i]);
        }
        off += dv[i] * row;
    }
    return 0.5 * diag + off;
}

/// Gauss–Kronrod with bisection until the local error estimate falls below abs_tol.
inline double gk(const std::function<double(double)>& f, double a, double b, double abs_tol, double& err_acc,
                 int max_depth, int depth = 0) {
    double err = 0.0;
    double l1 = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 0, 0.0, &err, &l1);
    if (err > abs_tol && err > 1e-14 * l1 && depth < max_depth) {
        const double m = 0.5 * (a + b);
        return gk(f, a, m, 0.5 * abs_tol, err_acc, max_depth, depth + 1) +
               gk(f, m, b, 0.5 * abs_tol, err_acc, max_depth, depth + 1);
    }
    err_acc += err;
    return v;
}

/// Sums f over consecutive intervals, first coarsely to fix the scale, then adaptively.
inline double piecewise(const std::function<double(double)>& f, const std::vector<double>& cuts, double rel_tol,
                        double& err, int max_depth = 4) {
    double rough = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double e = 0.0;
        rough += std::abs(boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, cuts[i], cuts[i + 1], 0,
                                                                                         0.0, &e));
    }
    const double budget = rel_tol * rough / std::max<std::size_t>(1, cuts.size() - 1);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) acc += gk(f, cuts[i], cuts[i + 1], budget, err, max_depth);
    return acc;
}

}  // namespace detail

// ---- Time-domain routes ----

/// Γ from jump pairs: Γ = −½ Σ_ij δv_i δv_j Φ(|τ_i − τ_j|), Φ the twice-integrated C'.
inline double lag_exponent(const BathKernels& k, const SwitchingProfile& p) {
    if (p.duration() == 0.0) return 0.0;
    return -detail::pair_sum(p, [&k](double lag) { return k.twice_integrated_correlation(lag); });
}

/// Γ = ∫_0^T C'(τ) A(τ) dτ with A(τ) = ∫ v×(t) v×(t + τ) dt, integrated between
/// the kinks of A by adaptive Gauss–Kronrod. Cost grows as (segments)² per node.
inline double time_domain_exponent(const BathKernels& k, const SwitchingProfile& p) {
    const double T = p.duration();
    if (T == 0.0) return 0.0;
    const auto& bp = p.breakpoints;
    const std::size_t m = p.values.size();
    const auto overlap = [&](double tau) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double lo = std::max(bp[i], bp[j] - tau);
                const double hi = std::min(bp[i + 1], bp[j + 1] - tau);
                if (hi > lo) acc += p.values[i] * p.values[j] * (hi - lo);
            }
        }
        return acc;
    };
    std::vector<double> kinks{0.0, T};
    for (std::size_t i = 0; i < bp.size(); ++i)
        for (std::size_t j = i + 1; j < bp.size(); ++j) kinks.push_back(bp[j] - bp[i]);
    // resolve the fast initial decay of C' as well
    const double tc = 1.0 / k.spec().omega_c;
    for (double x = tc; x < T; x *= 4.0) kinks.push_back(x);
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end(), [T](double a, double b) { return b - a <= 1e-14 * T; }),
                kinks.end());
    const std::function<double(double)> f = [&](double tau) { return k.correlation_real(tau) * overlap(tau); };
    double err = 0.0;
    const double acc = detail::piecewise(f, kinks, 1e-12, err, 12);
    if (err > 1e-8 * std::abs(acc) + 1e-12) throw QuadratureError("time_domain_exponent: not converged", err / std::abs(acc));
    return acc;
}

// ---- Frequency-domain routes ----

struct FrequencyOptions {
    double upper_factor = 20.0;  ///< explicit quadrature on [0, upper_factor·ω_c]
    bool include_tail = true;    ///< add the exact remainder beyond the explicit range
    double rel_tol = 1e-12;
};

namespace detail {

/// ∫_a^b J coth · kernel dω, with a power-law substitution absorbing ω^{s−1} near 0
/// and panels no wider than the oscillation period 2π/T_osc.
inline double spectral_integral(const BathSpec& spec, const std::function<double(double)>& kernel, double upper,
                                double t_osc, double& err) {
    const auto w = [&spec](double om) { return om > 0.0 ? symmetrized_density(spec, om) : 0.0; };
    const double width = t_osc > 0.0 ? 2.0 * std::numbers::pi / t_osc : upper;
    const double w1 = std::min({1.0, 0.25 * width, upper});
    double acc = 0.0;
    const double lo = spec.omega_ir;
    if (lo < w1) {
        if (lo > 0.0) {
            const std::function<double(double)> f = [&](double om) { return w(om) * kernel(om); };
            acc += piecewise(f, {lo, w1}, 1e-13, err);
        } else {
            const double pw = std::max(1.0, 1.0 / spec.s);
            const std::function<double(double)> f = [&](double u) {
                if (u <= 0.0) return 0.0;
                const double om = w1 * std::pow(u, pw);
                return w(om) * kernel(om) * w1 * pw * std::pow(u, pw - 1.0);
            };
            acc += piecewise(f, {0.0, 0.5, 1.0}, 1e-13, err);
        }
    }
    const std::function<double(double)> f = [&](double om) { return w(om) * kernel(om); };
    std::vector<double> cuts{std::max(w1, lo)};
    while (cuts.back() < upper) cuts.push_back(std::min({upper, cuts.back() + width, 2.0 * cuts.back()}));
    if (cuts.size() > 1) acc += piecewise(f, cuts, 1e-13, err);
    return acc;
}

/// ½ ∫_Ω^∞ J coth |f×|² dω = ½ Σ_ij δv_i δv_j ∫_Ω^∞ (J coth/ω²) cos ω(τ_i − τ_j) dω
inline double band_tail(const BathSpec& spec, const SwitchingProfile& p, double omega_lo) {
    quad::TransformOptions opt;
    opt.lower_limit = std::max(omega_lo, spec.omega_ir);
    const quad::SpectralTransform tail([spec](double om) { return symmetrized_density(spec, om) / (om * om); }, 0.0,
                                       spec.omega_c, opt);
    return pair_sum(p, [&tail](double lag) { return tail(quad::Kernel::Cos, lag); });
}

}  // namespace detail

/// Γ = ½ ∫_0^∞ J(ω) coth(βω/2) |f×(ω)|² dω.
inline double decoherence_exponent(const BathKernels& k, const SwitchingProfile& p, FrequencyOptions opt = {}) {
    const double T = p.duration();
    if (T == 0.0) return 0.0;
    const BathSpec& spec = k.spec();
    const double upper = opt.upper_factor * spec.omega_c;
    double err = 0.0;
    double acc = 0.5 * detail::spectral_integral(spec, [&p](double om) { return filter_weight(p, om); }, upper, T, err);
    if (err > 1e-8 * std::abs(acc) + 1e-14) throw QuadratureError("decoherence_exponent: not converged", err);
    if (opt.include_tail) acc += detail::band_tail(spec, p, upper);
    return acc;
}

inline double decoherence_exponent(const BathSpec& spec, const SwitchingProfile& p, FrequencyOptions opt = {}) {
    return decoherence_exponent(BathKernels(spec), p, opt);
}

/// Echo kernel (1 − cos 2x) tan²(x/2) with x = ωΔt, replaced by its Taylor
/// expansion 8 − 4y² within |y| < 1e-3 of a pole, y = x − (2m+1)π.
inline double echo_kernel(double x) {
    const double m = std::round((x - std::numbers::pi) / (2.0 * std::numbers::pi));
    const double y = x - (2.0 * m + 1.0) * std::numbers::pi;
    if (std::abs(y) < 1e-3) return 8.0 - 4.0 * y * y;
    const double t = std::tan(0.5 * x);
    return (1.0 - std::cos(2.0 * x)) * t * t;
}

/// CPMG kernel (1 − cos 2nx) tan²(x/2) written as 2 sin²(x/2) [sin(ny)/sin(y/2)]²,
/// which is finite at the poles of tan.
inline double dd_kernel(int n, double x) {
    const double m = std::round((x - std::numbers::pi) / (2.0 * std::numbers::pi));
    const double y = x - (2.0 * m + 1.0) * std::numbers::pi;
    const double sh = std::sin(0.5 * x);
    double r;
    if (std::abs(y) < 1e-8)
        r = 2.0 * n;
    else
        r = std::sin(n * y) / std::sin(0.5 * y);
    return 2.0 * sh * sh * r * r;
}

/// Exponent of ρ_eg(2Δt) for the echo with Δt′ = Δt: 4 ∫ J coth (1 − cos 2ωΔt) tan²(ωΔt/2)/ω² dω.
inline double closed_form_echo_exponent(const BathKernels& k, double dt, FrequencyOptions opt = {}) {
    if (!(dt > 0.0)) throw ValidationError("closed_form_echo_exponent: dt must be positive");
    const BathSpec& spec = k.spec();
    const double upper = opt.upper_factor * spec.omega_c;
    double err = 0.0;
    const auto kern = [dt](double om) { return echo_kernel(om * dt) / (om * om); };
    double acc = 4.0 * detail::spectral_integral(spec, kern, upper, 2.0 * dt, err);
    if (err > 1e-8 * std::abs(acc) + 1e-14) throw QuadratureError("closed_form_echo_exponent: not converged", err);
    if (opt.include_tail) acc += detail::band_tail(spec, switching_profile(hahn_echo(dt, dt)), upper);
    return acc;
}

/// Exponent of ρ_eg(2nΔt) for the asymmetric CPMG: 4 ∫ J coth (1 − cos 2nωΔt) tan²(ωΔt/2)/ω² dω.
inline double closed_form_dd_exponent(const BathKernels& k, int n, double dt, FrequencyOptions opt = {}) {
    if (n < 1) throw ValidationError("closed_form_dd_exponent: n must be at least 1");
    if (!(dt > 0.0)) throw ValidationError("closed_form_dd_exponent: dt must be positive");
    const BathSpec& spec = k.spec();
    const double upper = opt.upper_factor * spec.omega_c;
    double err = 0.0;
    const auto kern = [n, dt](double om) { return dd_kernel(n, om * dt) / (om * om); };
    double acc = 4.0 * detail::spectral_integral(spec, kern, upper, 2.0 * n * dt, err);
    if (err > 1e-8 * std::abs(acc) + 1e-14) throw QuadratureError("closed_form_dd_exponent: not converged", err);
    if (opt.include_tail) acc += detail::band_tail(spec, switching_profile(cpmg_asymmetric(n, dt)), upper);
    return acc;
}

/// CPMG exponent with the bath restricted to ω ≤ omega_max < π/Δt, below the first
/// filter resonance: ∫ g (1 − cos 2nωΔt) dω with g = 4 J coth tan²(ωΔt/2)/ω², the
/// oscillatory part by Filon quadrature so the cost does not grow with n.
inline double band_limited_dd_exponent(const BathSpec& spec, long long n, double dt, double omega_max) {
    if (n < 1) throw ValidationError("band_limited_dd_exponent: n must be at least 1");
    if (!(dt > 0.0)) throw ValidationError("band_limited_dd_exponent: dt must be positive");
    if (!(omega_max > 0.0) || omega_max * dt >= std::numbers::pi)
        throw DomainError("band_limited_dd_exponent: omega_max must lie below pi/dt");
    spec.validate();
    const double T = 2.0 * static_cast<double>(n) * dt;
    quad::TransformOptions opt;
    opt.first_break = std::min(1e-3, 0.1 / T);
    if (spec.omega_ir > 0.0) opt.lower_limit = spec.omega_ir;
    opt.upper_factor = 1.0;
    opt.power_tail = false;
    const quad::SpectralTransform g(
        [spec, dt](double om) {
            const double t = std::tan(0.5 * om * dt);
            return 4.0 * symmetrized_density(spec, om) * t * t / (om * om);
        },
        spec.s - 1.0, omega_max, opt);
    if (g.error_estimate() > 1e-9 * g(quad::Kernel::One, 0.0))
        throw QuadratureError("band_limited_dd_exponent: weight not resolved", g.error_estimate());
    return g(quad::Kernel::OneMinusCos, T);
}

/// Δt² ∫_0^∞ J coth dω, the large-n limit of the CPMG exponent for ω_cΔt ≪ 1.
inline double asymptotic_saturation(const BathKernels& k, double dt) {
    if (!(dt > 0.0)) throw ValidationError("asymptotic_saturation: dt must be positive");
    return dt * dt * k.noise_integral();
}

inline double asymptotic_saturation(const BathSpec& spec, double dt) {
    return asymptotic_saturation(BathKernels(spec), dt);
}

}  // namespace dephasing
