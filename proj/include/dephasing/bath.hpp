#pragma once

// Power-law bath with a quartic cutoff and the transforms derived from it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <string>
#include <variant>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dephasing/error.hpp"
#include "dephasing/spectral_transform.hpp"

namespace dephasing {

struct BathSpec {
    double s{1.0};                                  // spectral exponent
    double kappa{0.04 / (2.0 * std::numbers::pi)};  // coupling strength
    double omega_c{50.0};                           // cutoff frequency
    double omega_ph{1.0};                           // reference frequency of kappa's unit
    double beta{5.0};                               // inverse temperature
    double omega_ir{0.0};                           // infrared floor: J vanishes below it (0 = none)

    static BathSpec reference(double s) {
        BathSpec b;
        b.s = s;
        return b;
    }

    void validate() const {
        auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!finite_pos(s)) throw ValidationError("bath: s must be positive");
        if (!std::isfinite(kappa) || kappa < 0.0) throw ValidationError("bath: kappa must be non-negative");
        if (!finite_pos(omega_c)) throw ValidationError("bath: omega_c must be positive");
        if (!finite_pos(omega_ph)) throw ValidationError("bath: omega_ph must be positive");
        if (!finite_pos(beta)) throw ValidationError("bath: beta must be positive");
        if (!std::isfinite(omega_ir) || omega_ir < 0.0 || omega_ir >= omega_c)
            throw ValidationError("bath: omega_ir must lie in [0, omega_c)");
    }

    bool operator==(const BathSpec&) const = default;
};

/// The five exponents of the reference family.
inline constexpr double kReferenceExponents[] = {1.0, 0.5, 0.25, 0.125, 1.0 / 14.0};

/// Signalled instead of a number where a quantity is infinite.
struct Divergence {
    std::string reason;
};

using MaybeFinite = std::variant<double, Divergence>;

inline bool is_divergent(const MaybeFinite& v) { return std::holds_alternative<Divergence>(v); }

// ---- Spectral densities ----

inline double spectral_density(const BathSpec& b, double omega) {
    if (omega == 0.0 || std::abs(omega) < b.omega_ir) return 0.0;
    const double x = omega / b.omega_c;
    const double damp = 1.0 + x * x;
    const double mag = b.kappa * std::pow(b.omega_ph, 1.0 - b.s) * std::pow(std::abs(omega), b.s) / (damp * damp);
    return omega > 0.0 ? mag : -mag;
}

/// J(ω)·coth(βω/2) for ω > 0.
inline double symmetrized_density(const BathSpec& b, double omega) {
    return spectral_density(b, omega) / std::tanh(0.5 * b.beta * omega);
}

inline MaybeFinite noise_power(const BathSpec& b, double omega) {
    if (omega == 0.0) {
        if (b.kappa == 0.0 || b.omega_ir > 0.0) return 0.0;
        if (b.s > 1.0) return 0.0;
        if (b.s == 1.0) return b.kappa / b.beta;
        return Divergence{"noise power diverges at zero frequency for s < 1"};
    }
    return spectral_density(b, omega) / -std::expm1(-b.beta * omega);
}

// ---- Correlation transforms ----

/// Precomputed half-line transforms of one bath. Construction samples the
/// weights once; every evaluation afterwards is O(panels).
class BathKernels {
public:
    explicit BathKernels(const BathSpec& b, quad::TransformOptions opt = {}) : spec_(b) {
        b.validate();
        if (b.omega_ir > 0.0) opt.lower_limit = b.omega_ir;
        const double s = b.s;
        const double wc = b.omega_c;
        sym_ = std::make_unique<quad::SpectralTransform>([b](double w) { return symmetrized_density(b, w); },
                                                         s - 1.0, wc, opt);
        plain_ = std::make_unique<quad::SpectralTransform>([b](double w) { return spectral_density(b, w); }, s,
                                                           wc, opt);
        over_w_ = std::make_unique<quad::SpectralTransform>(
            [b](double w) { return spectral_density(b, w) / w; }, s - 1.0, wc, opt);
        over_w2_ = std::make_unique<quad::SpectralTransform>(
            [b](double w) { return spectral_density(b, w) / (w * w); }, s - 1.0, wc, opt);
        sym_over_w_ = std::make_unique<quad::SpectralTransform>(
            [b](double w) { return symmetrized_density(b, w) / w; }, s - 1.0, wc, opt);
        sym_over_w2_ = std::make_unique<quad::SpectralTransform>(
            [b](double w) { return symmetrized_density(b, w) / (w * w); }, s - 1.0, wc, opt);
        check(*sym_, "symmetrized density");
        check(*over_w_, "relaxation weight");
    }

    const BathSpec& spec() const noexcept { return spec_; }

    /// C'(t) = ∫ J coth(βω/2) cos ωt dω
    double correlation_real(double t) const { return (*sym_)(quad::Kernel::Cos, std::abs(t)); }
    /// C''(t) = −∫ J sin ωt dω
    double correlation_imag(double t) const {
        const double v = -(*plain_)(quad::Kernel::Sin, std::abs(t));
        return t < 0.0 ? -v : v;
    }
    std::complex<double> correlation(double t) const { return {correlation_real(t), correlation_imag(t)}; }

    /// L̄(t) = ∫ (J/ω) cos ωt dω
    double relaxation_integral(double t) const { return (*over_w_)(quad::Kernel::Cos, t); }
    /// λ = ∫ J/ω dω
    double reorganization_energy() const { return (*over_w_)(quad::Kernel::One, 0.0); }
    /// ∫_0^t L̄ = ∫ (J/ω²) sin ωt dω
    double integrated_relaxation(double t) const { return (*over_w2_)(quad::Kernel::Sin, t); }

    /// ∫_0^t ∫_0^{t'} C'(u) du dt' = ∫ J coth (1 − cos ωt)/ω² dω
    double twice_integrated_correlation(double t) const {
        return (*sym_over_w2_)(quad::Kernel::OneMinusCos, std::abs(t));
    }
    /// ∫_0^t C'(u) du = ∫ J coth sin ωt / ω dω
    double integrated_correlation(double t) const { return (*sym_over_w_)(quad::Kernel::Sin, t); }

    /// ∫ J coth dω, the short-time noise strength C'(0).
    double noise_integral() const { return (*sym_)(quad::Kernel::One, 0.0); }

private:
    static void check(const quad::SpectralTransform& tr, const char* what) {
        const double total = std::abs(tr(quad::Kernel::One, 0.0));
        const double err = tr.error_estimate();
        if (err > 1e-9 * total + 1e-300)
            throw QuadratureError(std::string("bath transform: ") + what + " not resolved", err);
    }

    BathSpec spec_;
    std::unique_ptr<quad::SpectralTransform> sym_, plain_, over_w_, over_w2_, sym_over_w_, sym_over_w2_;
};

inline std::complex<double> correlation(const BathSpec& b, double t) {
    if (t < 0.0) throw ValidationError("correlation: t must be non-negative");
    return BathKernels(b).correlation(t);
}

inline double relaxation_integral(const BathSpec& b, double t) {
    if (t < 0.0) throw ValidationError("relaxation_integral: t must be non-negative");
    return BathKernels(b).relaxation_integral(t);
}

inline double reorganization_energy(const BathSpec& b) { return BathKernels(b).reorganization_energy(); }

/// L̄ from dL̄/dt = C'' started at λ, integrated with adaptive Gauss–Kronrod.
inline double relaxation_integral_ode(const BathKernels& k, double t) {
    if (t < 0.0) throw ValidationError("relaxation_integral_ode: t must be non-negative");
    if (t == 0.0) return k.reorganization_energy();
    double err = 0.0;
    const auto f = [&k](double u) { return k.correlation_imag(u); };
    // one panel per unit of the cutoff period keeps each piece smooth
    const int pieces = std::max(1, static_cast<int>(std::ceil(t * k.spec().omega_c / 4.0)));
    double acc = 0.0;
    double worst = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double a = t * i / pieces;
        const double b = t * (i + 1) / pieces;
        acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 3, 1e-10, &err);
        worst = std::max(worst, err);
    }
    return k.reorganization_energy() + acc;
}

}  // namespace dephasing
