#pragma once

// Half-line spectral transforms  I(t) = ∫_0^∞ g(ω) K(ωt) dω  for the kernels
// K ∈ {1, cos, sin, 1 − cos}.
//
// The weight g is sampled once at construction: a power-law substitution panel
// [0, a0] absorbs the integrable singularity at ω = 0, and geometric panels
// [a_j, r·a_j] cover the rest. On each geometric panel g is projected onto
// Legendre polynomials, so the oscillatory factor is integrated exactly
// (Filon–Legendre):  ∫_{-1}^{1} P_k(x) e^{iθx} dx = 2 i^k j_k(θ).
// The cost of an evaluation is therefore independent of t.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "dephasing/error.hpp"

namespace dephasing::quad {

enum class Kernel { One, Cos, Sin, OneMinusCos };

/// Gauss–Legendre rule on [-1, 1] with N nodes, expanded from Boost's half tables.
template <unsigned N>
struct GaussLegendre {
    std::array<double, N> x{};
    std::array<double, N> w{};

    GaussLegendre() {
        using rule = boost::math::quadrature::gauss<double, N>;
        const auto& ax = rule::abscissa();
        const auto& wt = rule::weights();
        unsigned k = 0;
        for (std::size_t i = 0; i < ax.size(); ++i) {
            if (ax[i] == 0.0) {
                x[k] = 0.0;
                w[k++] = wt[i];
                continue;
            }
            x[k] = -ax[i];
            w[k++] = wt[i];
            x[k] = ax[i];
            w[k++] = wt[i];
        }
    }

    static const GaussLegendre& get() {
        static const GaussLegendre rule;
        return rule;
    }
};

/// Spherical Bessel functions j_0..j_{n-1} at θ > 0.
inline void spherical_bessel_sequence(double theta, double* out, int n) {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    if (theta >= n) {
        // upward recurrence is stable while k < θ
        out[0] = s / theta;
        if (n > 1) out[1] = s / (theta * theta) - c / theta;
        for (int k = 1; k + 1 < n; ++k) out[k + 1] = (2.0 * k + 1.0) / theta * out[k] - out[k - 1];
        return;
    }
    // Miller's backward recurrence, normalised with Σ (2k+1) j_k² = 1.
    const int start = n + 20 + static_cast<int>(theta);
    std::vector<double> tmp(static_cast<std::size_t>(start) + 2, 0.0);
    tmp[start] = 1.0;
    for (int k = start; k > 0; --k) {
        tmp[k - 1] = (2.0 * k + 1.0) / theta * tmp[k] - tmp[k + 1];
        if (std::abs(tmp[k - 1]) > 1e100)
            for (int i = k - 1; i <= start; ++i) tmp[i] *= 1e-100;
    }
    double norm = 0.0;
    for (int k = start; k >= 0; --k) norm += (2.0 * k + 1.0) * tmp[k] * tmp[k];
    const double scale = 1.0 / std::sqrt(norm);
    for (int k = 0; k < n; ++k) out[k] = tmp[k] * scale;
}

struct TransformOptions {
    double first_break = 1e-3;   ///< end of the substitution panel [0, a0]
    double lower_limit = 0.0;    ///< if positive, the weight vanishes below it and no substitution panel is used
    double ratio = 1.5;          ///< geometric panel ratio
    double upper_factor = 1e6;   ///< panels extend to upper_factor · scale
    double coeff_tol = 1e-14;    ///< relative size of trailing Legendre coefficients
    int max_refine = 8;          ///< bisection depth for stubborn panels
    bool power_tail = true;      ///< extrapolate the non-oscillatory kernels beyond the last panel
};

class SpectralTransform {
public:
    static constexpr unsigned kNodes = 20;

    /// g: weight on (0, ∞). integrand_power: exponent e with g(ω)K(ωt) ~ ω^e as ω → 0
    /// (e > −1). scale: characteristic frequency (the bath cutoff).
    SpectralTransform(std::function<double(double)> g, double integrand_power, double scale,
                      TransformOptions opt = {})
        : opt_(opt) {
        if (!(integrand_power > -1.0)) throw ValidationError("spectral transform: integrand not integrable at 0");
        if (opt_.lower_limit > 0.0)
            opt_.first_break = opt_.lower_limit;
        else
            build_substitution_panel(g, integrand_power);
        build_geometric_panels(g, scale);
    }

    double operator()(Kernel kernel, double t) const {
        if (t == 0.0) {
            if (kernel == Kernel::Sin || kernel == Kernel::OneMinusCos) return 0.0;
            kernel = Kernel::One;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < sub_omega_.size(); ++i)
            sum += sub_gw_[i] * direct_kernel(kernel, sub_omega_[i] * t);
        const auto& rule = GaussLegendre<kNodes>::get();
        std::array<double, kNodes> jk{};
        for (const auto& p : panels_) {
            const double theta = t * p.half;
            if (kernel == Kernel::One || theta <= 2.0) {
                double acc = 0.0;
                for (unsigned i = 0; i < kNodes; ++i)
                    acc += rule.w[i] * p.g[i] * direct_kernel(kernel, (p.mid + p.half * rule.x[i]) * t);
                sum += p.half * acc;
                continue;
            }
            spherical_bessel_sequence(theta, jk.data(), kNodes);
            // Σ_k c_k 2 i^k j_k(θ): real part from even k, imaginary from odd k
            double re = 0.0;
            double im = 0.0;
            for (unsigned k = 0; k < kNodes; k += 4) {
                re += p.c[k] * jk[k];
                if (k + 1 < kNodes) im += p.c[k + 1] * jk[k + 1];
                if (k + 2 < kNodes) re -= p.c[k + 2] * jk[k + 2];
                if (k + 3 < kNodes) im -= p.c[k + 3] * jk[k + 3];
            }
            const std::complex<double> inner(2.0 * re, 2.0 * im);
            const std::complex<double> val = p.half * std::polar(1.0, p.mid * t) * inner;
            switch (kernel) {
                case Kernel::Cos: sum += val.real(); break;
                case Kernel::Sin: sum += val.imag(); break;
                case Kernel::OneMinusCos: sum += 2.0 * p.half * p.c[0] - val.real(); break;
                case Kernel::One: break;
            }
        }
        if (kernel == Kernel::One || kernel == Kernel::OneMinusCos) sum += tail_one_;
        return sum;
    }

    /// Sum over panels of the trailing-coefficient magnitude; a rough absolute error bound.
    double error_estimate() const noexcept { return error_estimate_; }
    std::size_t panel_count() const noexcept { return panels_.size(); }

private:
    struct Panel {
        double mid = 0.0;
        double half = 0.0;
        std::array<double, kNodes> g{};
        std::array<double, kNodes> c{};  ///< Legendre coefficients of g on the panel
    };

    static double direct_kernel(Kernel k, double x) {
        switch (k) {
            case Kernel::One: return 1.0;
            case Kernel::Cos: return std::cos(x);
            case Kernel::Sin: return std::sin(x);
            case Kernel::OneMinusCos: {
                const double sh = std::sin(0.5 * x);
                return 2.0 * sh * sh;
            }
        }
        return 0.0;
    }

    void build_substitution_panel(const std::function<double(double)>& g, double e) {
        // ω = a0 u^p with p (e + 1) = 1 makes the integrand bounded and smooth in u.
        const double p = e < 0.0 ? 1.0 / (e + 1.0) : 1.0;
        const double a0 = opt_.first_break;
        static constexpr std::array<double, 5> breaks{0.0, 0.5, 0.75, 0.9, 1.0};
        using rule = GaussLegendre<30>;
        const auto& r = rule::get();
        for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
            const double ua = breaks[s];
            const double ub = breaks[s + 1];
            const double hm = 0.5 * (ub - ua);
            const double um = 0.5 * (ub + ua);
            for (unsigned i = 0; i < 30; ++i) {
                const double u = um + hm * r.x[i];
                const double omega = a0 * std::pow(u, p);
                const double jac = a0 * p * std::pow(u, p - 1.0);
                sub_omega_.push_back(omega);
                sub_gw_.push_back(hm * r.w[i] * jac * g(omega));
            }
        }
    }

    void fill_panel(const std::function<double(double)>& g, double a, double b, Panel& p) const {
        const auto& rule = GaussLegendre<kNodes>::get();
        p.mid = 0.5 * (a + b);
        p.half = 0.5 * (b - a);
        for (unsigned i = 0; i < kNodes; ++i) p.g[i] = g(p.mid + p.half * rule.x[i]);
        // c_k = (2k+1)/2 Σ_i w_i g_i P_k(x_i)
        p.c.fill(0.0);
        for (unsigned i = 0; i < kNodes; ++i) {
            const double x = rule.x[i];
            double pkm1 = 1.0;
            double pk = x;
            p.c[0] += rule.w[i] * p.g[i];
            p.c[1] += rule.w[i] * p.g[i] * x;
            for (unsigned k = 1; k + 1 < kNodes; ++k) {
                const double pkp1 = ((2.0 * k + 1.0) * x * pk - k * pkm1) / (k + 1.0);
                pkm1 = pk;
                pk = pkp1;
                p.c[k + 1] += rule.w[i] * p.g[i] * pk;
            }
        }
        for (unsigned k = 0; k < kNodes; ++k) p.c[k] *= 0.5 * (2.0 * k + 1.0);
    }

    static double trailing(const Panel& p) {
        double big = 0.0;
        for (double c : p.c) big = std::max(big, std::abs(c));
        const double tail = std::abs(p.c[kNodes - 1]) + std::abs(p.c[kNodes - 2]);
        return big > 0.0 ? tail / big : 0.0;
    }

    void add_panel(const std::function<double(double)>& g, double a, double b, int depth) {
        Panel p;
        fill_panel(g, a, b, p);
        if (trailing(p) > opt_.coeff_tol && depth < opt_.max_refine) {
            const double m = std::sqrt(a * b);
            add_panel(g, a, m, depth + 1);
            add_panel(g, m, b, depth + 1);
            return;
        }
        error_estimate_ += 2.0 * p.half * (std::abs(p.c[kNodes - 1]) + std::abs(p.c[kNodes - 2]));
        panels_.push_back(p);
    }

    void build_geometric_panels(const std::function<double(double)>& g, double scale) {
        const double upper = opt_.upper_factor * scale;
        double a = opt_.first_break;
        while (a < upper) {
            const double b = std::min(a * opt_.ratio, upper);
            add_panel(g, a, b, 0);
            a = b;
        }
        // power-law tail beyond the last panel, for the non-oscillatory kernel
        const double ga = g(upper / opt_.ratio);
        const double gb = g(upper);
        if (opt_.power_tail && ga > 0.0 && gb > 0.0) {
            const double q = std::log(gb / ga) / std::log(opt_.ratio);
            if (q < -1.0) tail_one_ = -gb * upper / (q + 1.0);
        }
    }

    TransformOptions opt_;
    std::vector<double> sub_omega_;
    std::vector<double> sub_gw_;
    std::vector<Panel> panels_;
    double tail_one_ = 0.0;
    double error_estimate_ = 0.0;
};

}  // namespace dephasing::quad
