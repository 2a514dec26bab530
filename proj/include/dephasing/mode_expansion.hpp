#pragma once

// Damped-exponential expansion C(t) ≈ Σ_k d_k exp(−iω_k t − γ_k t), fitted on
// [0, t_max] and certified on a grid disjoint from the fitting grid.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "dephasing/bath.hpp"
#include "dephasing/error.hpp"

namespace dephasing {

struct Mode {
    std::complex<double> d;  // amplitude
    double omega{0.0};       // oscillation frequency
    double gamma{0.0};       // decay rate
};

namespace detail {

/// (1 − e^{−x})/x
inline double phi1(double x) {
    if (std::abs(x) < 1e-5) return 1.0 - x / 2.0 + x * x / 6.0;
    return -std::expm1(-x) / x;
}

/// (x − 1 + e^{−x})/x²
inline double phi2(double x) {
    if (std::abs(x) < 1e-3) return 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
    return (x + std::expm1(-x)) / (x * x);
}

inline std::complex<double> phi1(std::complex<double> z) {
    if (std::abs(z) < 1e-5) return 1.0 - z / 2.0 + z * z / 6.0;
    return (1.0 - std::exp(-z)) / z;
}

inline std::complex<double> phi2(std::complex<double> z) {
    if (std::abs(z) < 1e-3) return 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
    return (z - 1.0 + std::exp(-z)) / (z * z);
}

}  // namespace detail

struct ModeExpansion {
    std::vector<Mode> modes;
    double t_max{0.0};
    double tol{0.0};       ///< requested bound, relative to |C(0)|
    double achieved{0.0};  ///< certified max error: |ΔC| relative to |C(0)|, ∫∫ Re C relative to itself

    std::size_t size() const noexcept { return modes.size(); }

    void check_range(double t) const {
        if (t < 0.0 || t > t_max * (1.0 + 1e-12))
            throw DomainError("mode expansion: t outside the certified range [0, t_max]");
    }

    std::complex<double> correlation(double t) const {
        check_range(t);
        std::complex<double> acc{0.0, 0.0};
        for (const auto& m : modes) acc += m.d * std::exp(std::complex<double>(-m.gamma * t, -m.omega * t));
        return acc;
    }

    /// ∫_0^t ∫_0^{t'} Re C
    double twice_integrated_correlation(double t) const {
        check_range(t);
        double acc = 0.0;
        for (const auto& m : modes) {
            const std::complex<double> z(m.gamma, m.omega);
            acc += (m.d * t * t * detail::phi2(z * t)).real();
        }
        return acc;
    }

    /// ∫_0^t Im C
    double integrated_imag(double t) const {
        check_range(t);
        double acc = 0.0;
        for (const auto& m : modes) {
            const std::complex<double> z(m.gamma, m.omega);
            acc += (m.d * t * detail::phi1(z * t)).imag();
        }
        return acc;
    }
};

struct ModeFitOptions {
    int k_max = 64;
    int grid_points = 512;
    int check_points = 2000;
    int k_start = 6;
    int k_step = 2;
    int lm_iterations = 30;  ///< Levenberg–Marquardt iterations per refinement
};

namespace detail {

/// C and Φ = ∫∫ Re C sampled on one grid.
struct Samples {
    std::vector<double> t;
    Eigen::VectorXd re, im, phi;
};

/// Rows of Re d: C' scaled by 1/|C(0)|, then Φ relative to itself (t > 0 only).
/// Rows of Im d: C'' scaled by 1/|C(0)|.
inline void design(const Samples& s, const Eigen::VectorXd& rates, double c0, Eigen::MatrixXd& a_re,
                   Eigen::VectorXd& b_re, Eigen::MatrixXd& a_im, Eigen::VectorXd& b_im) {
    const Eigen::Index n = static_cast<Eigen::Index>(s.t.size());
    const Eigen::Index k = rates.size();
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (s.phi[i] > 0.0) ++m;
    a_re.resize(n + m, k);
    b_re.resize(n + m);
    a_im.resize(n, k);
    b_im.resize(n);
    Eigen::Index r = n;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = s.t[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < k; ++j) {
            const double e = std::exp(-rates[j] * t) / c0;
            a_re(i, j) = e;
            a_im(i, j) = e;
        }
        b_re[i] = s.re[i] / c0;
        b_im[i] = s.im[i] / c0;
        if (s.phi[i] > 0.0) {
            for (Eigen::Index j = 0; j < k; ++j) a_re(r, j) = t * t * phi2(rates[j] * t) / s.phi[i];
            b_re[r] = 1.0;
            ++r;
        }
    }
}

/// Least-squares amplitudes for fixed real rates; returns the weighted residual.
inline Eigen::VectorXd solve_amplitudes(const Samples& s, const Eigen::VectorXd& rates, double c0,
                                        Eigen::VectorXcd& d) {
    Eigen::MatrixXd a_re, a_im;
    Eigen::VectorXd b_re, b_im;
    design(s, rates, c0, a_re, b_re, a_im, b_im);
    const Eigen::VectorXd x_re = a_re.colPivHouseholderQr().solve(b_re);
    const Eigen::VectorXd x_im = a_im.colPivHouseholderQr().solve(b_im);
    d.resize(rates.size());
    for (Eigen::Index j = 0; j < rates.size(); ++j) d[j] = {x_re[j], x_im[j]};
    Eigen::VectorXd res(b_re.size() + b_im.size());
    res << a_re * x_re - b_re, a_im * x_im - b_im;
    return res;
}

/// Maps unconstrained parameters onto rates confined to [lo, hi] (log-uniform).
struct RateMap {
    double lo, hi;
    double rate(double x) const { return lo * std::pow(hi / lo, 0.5 * (1.0 + std::tanh(x))); }
    double param(double r) const { return std::atanh(2.0 * std::log(r / lo) / std::log(hi / lo) - 1.0); }
    Eigen::VectorXd rates(const Eigen::VectorXd& x) const { return x.unaryExpr([this](double v) { return rate(v); }); }
};

/// Residual of the variable-projection problem.
struct RateFunctor : Eigen::DenseFunctor<double> {
    const Samples* s;
    double c0;
    RateMap map;

    RateFunctor(int k, int values, const Samples& ss, double c, RateMap m)
        : Eigen::DenseFunctor<double>(k, values), s(&ss), c0(c), map(m) {}

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        Eigen::VectorXcd d;
        fvec = solve_amplitudes(*s, map.rates(x), c0, d);
        return 0;
    }
};

}  // namespace detail

/// Fits C(t) of the bath on [0, t_max] to tolerance tol·|C(0)|, with the twice
/// integrated real part held to tol relative, using the fewest modes found up to opt.k_max.
inline ModeExpansion fit_mode_expansion(const BathKernels& kernels, double t_max, double tol,
                                        ModeFitOptions opt = {}) {
    if (!(t_max > 0.0)) throw ValidationError("fit_mode_expansion: t_max must be positive");
    if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("fit_mode_expansion: tol must lie in (0, 1)");
    const BathSpec& spec = kernels.spec();

    // fitting grid: t = 0 plus geometric nodes resolving the cutoff time
    const double t0 = std::min(1e-2 / spec.omega_c, t_max * 1e-4);
    std::vector<double> tf{0.0};
    const int ng = opt.grid_points - 1;
    const double ratio = std::pow(t_max / t0, 1.0 / (ng - 1));
    for (int i = 0; i < ng; ++i) tf.push_back(t0 * std::pow(ratio, i));
    tf.back() = t_max;

    // check grid: geometric midpoints of the fitting grid plus a uniform grid
    std::vector<double> tc;
    for (std::size_t i = 1; i + 1 < tf.size(); ++i) tc.push_back(std::sqrt(tf[i] * tf[i + 1]));
    const int nu = std::max(0, opt.check_points - static_cast<int>(tc.size()));
    for (int i = 0; i < nu; ++i) {
        const double t = t_max * (i + 0.5) / nu;
        if (!std::binary_search(tf.begin(), tf.end(), t)) tc.push_back(t);
    }
    std::sort(tc.begin(), tc.end());

    const auto sample = [&kernels](std::vector<double> ts) {
        detail::Samples out;
        const auto n = static_cast<Eigen::Index>(ts.size());
        out.re.resize(n);
        out.im.resize(n);
        out.phi.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = ts[static_cast<std::size_t>(i)];
            out.re[i] = kernels.correlation_real(t);
            out.im[i] = kernels.correlation_imag(t);
            out.phi[i] = t > 0.0 ? kernels.twice_integrated_correlation(t) : 0.0;
        }
        out.t = std::move(ts);
        return out;
    };
    const detail::Samples fit = sample(tf);
    const detail::Samples chk = sample(tc);
    const double c0 = std::abs(fit.re[0]);
    if (c0 == 0.0) {
        ModeExpansion zero;
        zero.t_max = t_max;
        zero.tol = tol;
        return zero;
    }

    // worst of |ΔC|/|C(0)| and |ΔΦ|/Φ over both grids
    const auto certify = [&](const Eigen::VectorXd& rates, const Eigen::VectorXcd& d) {
        double worst = 0.0;
        for (const detail::Samples* g : {&chk, &fit}) {
            for (std::size_t i = 0; i < g->t.size(); ++i) {
                const double t = g->t[i];
                const auto ii = static_cast<Eigen::Index>(i);
                std::complex<double> c{0.0, 0.0};
                double phi = 0.0;
                for (Eigen::Index k = 0; k < rates.size(); ++k) {
                    c += d[k] * std::exp(-rates[k] * t);
                    phi += d[k].real() * t * t * detail::phi2(rates[k] * t);
                }
                worst = std::max(worst, std::abs(c - std::complex<double>(g->re[ii], g->im[ii])) / c0);
                if (g->phi[ii] > 0.0) worst = std::max(worst, std::abs(phi - g->phi[ii]) / g->phi[ii]);
            }
        }
        return worst;
    };

    const auto pack = [&](const Eigen::VectorXd& rates, const Eigen::VectorXcd& d, double err) {
        ModeExpansion out;
        out.t_max = t_max;
        out.tol = tol;
        out.achieved = err;
        for (Eigen::Index k = 0; k < rates.size(); ++k) out.modes.push_back({d[k], 0.0, rates[k]});
        return out;
    };

    // rate dictionary spans the slowest resolvable scale to well beyond the cutoff
    const double g_lo = 0.3 / t_max;
    const double g_hi = 8.0 * spec.omega_c;
    double best_err = std::numeric_limits<double>::infinity();
    for (int k = opt.k_start; k <= opt.k_max; k += opt.k_step) {
        Eigen::VectorXd rates(k);
        for (int j = 0; j < k; ++j) rates[j] = g_lo * std::pow(g_hi / g_lo, k == 1 ? 0.0 : double(j) / (k - 1));
        Eigen::VectorXcd d;
        const Eigen::VectorXd r0 = detail::solve_amplitudes(fit, rates, c0, d);
        double err = certify(rates, d);
        if (err <= tol) return pack(rates, d, err);

        // refine the dictionary by variable projection
        const detail::RateMap map{0.01 / t_max, 50.0 * spec.omega_c};
        detail::RateFunctor f(k, static_cast<int>(r0.size()), fit, c0, map);
        Eigen::NumericalDiff<detail::RateFunctor> nd(f);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::RateFunctor>> lm(nd);
        lm.setMaxfev(opt.lm_iterations * (k + 1));
        Eigen::VectorXd x = rates.unaryExpr([&map](double r) { return map.param(r); });
        lm.minimize(x);
        rates = map.rates(x);
        detail::solve_amplitudes(fit, rates, c0, d);
        err = certify(rates, d);
        if (err <= tol) return pack(rates, d, err);
        best_err = std::min(best_err, err);
    }
    throw FitError("fit_mode_expansion: tolerance not reached with k_max modes", best_err);
}

inline ModeExpansion fit_mode_expansion(const BathSpec& spec, double t_max, double tol, ModeFitOptions opt = {}) {
    return fit_mode_expansion(BathKernels(spec), t_max, tol, opt);
}

}  // namespace dephasing
