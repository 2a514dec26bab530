#pragma once

// Least-squares decay models for coherence magnitudes:
//   TwoExp        A e^{−Bt} + C e^{−Dt} + E          T = 1/D, D < B
//   ExpPlusGauss  A e^{−Bt} + C e^{−(Dt)²} + E       T = 1/D
//   SingleExp     a e^{−bt} + c                      T = 1/b
//   Gaussian      a e^{−(bt)²} + c                   T = 1/b

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "dephasing/error.hpp"

namespace dephasing {

enum class FitModel { TwoExp, ExpPlusGauss, SingleExp, Gaussian };

inline const char* to_string(FitModel m) {
    switch (m) {
        case FitModel::TwoExp: return "TwoExp";
        case FitModel::ExpPlusGauss: return "ExpPlusGauss";
        case FitModel::SingleExp: return "SingleExp";
        case FitModel::Gaussian: return "Gaussian";
    }
    return "?";
}

inline FitModel fit_model_from_string(const std::string& s) {
    for (FitModel m : {FitModel::TwoExp, FitModel::ExpPlusGauss, FitModel::SingleExp, FitModel::Gaussian})
        if (s == to_string(m)) return m;
    throw ValidationError("unknown fit model: " + s);
}

inline constexpr bool is_two_component(FitModel m) { return m == FitModel::TwoExp || m == FitModel::ExpPlusGauss; }

struct FitResult {
    FitModel model{FitModel::SingleExp};
    std::vector<double> params;  ///< (A, B, C, D, E) or (a, b, c)
    double residual{0.0};        ///< sum of squared errors
    double time_constant{0.0};
    std::size_t samples{0};
};

namespace detail {

/// Model value and gradient in the internal parameters, where every rate is
/// stored as its logarithm.
inline double model_eval(FitModel m, const Eigen::VectorXd& p, double t, double* grad) {
    switch (m) {
        case FitModel::TwoExp:
        case FitModel::ExpPlusGauss: {
            const double b = std::exp(p[1]);
            const double d = std::exp(p[3]);
            const double e1 = std::exp(-b * t);
            const double dt = d * t;
            const double e2 = m == FitModel::TwoExp ? std::exp(-dt) : std::exp(-dt * dt);
            if (grad) {
                grad[0] = e1;
                grad[1] = -p[0] * t * b * e1;
                grad[2] = e2;
                grad[3] = m == FitModel::TwoExp ? -p[2] * dt * e2 : -2.0 * p[2] * dt * dt * e2;
                grad[4] = 1.0;
            }
            return p[0] * e1 + p[2] * e2 + p[4];
        }
        case FitModel::SingleExp:
        case FitModel::Gaussian: {
            const double bt = std::exp(p[1]) * t;
            const double e = m == FitModel::SingleExp ? std::exp(-bt) : std::exp(-bt * bt);
            if (grad) {
                grad[0] = e;
                grad[1] = m == FitModel::SingleExp ? -p[0] * bt * e : -2.0 * p[0] * bt * bt * e;
                grad[2] = 1.0;
            }
            return p[0] * e + p[2];
        }
    }
    return 0.0;
}

inline int param_count(FitModel m) { return is_two_component(m) ? 5 : 3; }

/// Residuals of one model; with zero_offset the trailing offset is held at 0
/// and left out of the parameter vector.
struct DecayFunctor : Eigen::DenseFunctor<double> {
    FitModel model;
    bool zero_offset;
    const std::vector<double>* t;
    const std::vector<double>* y;
    DecayFunctor(FitModel m, bool zero, const std::vector<double>& tt, const std::vector<double>& yy)
        : Eigen::DenseFunctor<double>(param_count(m) - (zero ? 1 : 0), static_cast<int>(tt.size())),
          model(m), zero_offset(zero), t(&tt), y(&yy) {}
    Eigen::VectorXd full(const Eigen::VectorXd& p) const {
        if (!zero_offset) return p;
        Eigen::VectorXd q(p.size() + 1);
        q << p, 0.0;
        return q;
    }
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        const Eigen::VectorXd q = full(p);
        for (std::size_t i = 0; i < t->size(); ++i)
            f[static_cast<Eigen::Index>(i)] = model_eval(model, q, (*t)[i], nullptr) - (*y)[i];
        return 0;
    }
    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        const Eigen::VectorXd q = full(p);
        std::array<double, 5> g{};
        for (std::size_t i = 0; i < t->size(); ++i) {
            model_eval(model, q, (*t)[i], g.data());
            for (Eigen::Index k = 0; k < p.size(); ++k) j(static_cast<Eigen::Index>(i), k) = g[k];
        }
        return 0;
    }
};

/// Least-squares line through (x, ln y) over the points with y > 0: returns (slope, intercept).
inline std::optional<std::pair<double, double>> log_line(const std::vector<double>& x, const std::vector<double>& y,
                                                         std::size_t lo, std::size_t hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        if (!(y[i] > 0.0)) continue;
        const double ly = std::log(y[i]);
        sx += x[i];
        sy += ly;
        sxx += x[i] * x[i];
        sxy += x[i] * ly;
        ++n;
    }
    const double den = n * sxx - sx * sx;
    if (n < 2 || den == 0.0) return std::nullopt;
    const double slope = (n * sxy - sx * sy) / den;
    return std::make_pair(slope, (sy - slope * sx) / n);
}

/// Starting point from log-linear regressions on the data, in internal parameters.
inline Eigen::VectorXd initial_guess(FitModel m, const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    const double span = std::max(t.back() - t.front(), 1e-300);
    const double y0 = y.front();
    const auto safe_rate = [span](double r) { return std::log(std::clamp(r, 1e-3 / span, 1e3 / span)); };
    const bool gauss = m == FitModel::Gaussian || m == FitModel::ExpPlusGauss;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = gauss ? t[i] * t[i] : t[i];

    if (!is_two_component(m)) {
        Eigen::VectorXd p(3);
        const auto line = log_line(x, y, 0, n);
        const double slope = line ? std::min(line->first, -1e-12) : -1.0 / (span * (gauss ? span : 1.0));
        p << (line ? std::exp(line->second) : y0), safe_rate(gauss ? std::sqrt(-slope) : -slope), 0.0;
        return p;
    }
    // slow component from the second half, fast component from what remains early on
    const auto slow = log_line(x, y, n / 2, n);
    double rate_slow = 1.0 / span;
    double amp_slow = 0.5 * y0;
    if (slow && slow->first < 0.0) {
        rate_slow = gauss ? std::sqrt(-slow->first) : -slow->first;
        amp_slow = std::min(std::exp(slow->second), y0);
    }
    const auto slow_at = [&](double tt) {
        const double z = rate_slow * tt;
        return amp_slow * (gauss ? std::exp(-z * z) : std::exp(-z));
    };
    std::vector<double> rest(n);
    for (std::size_t i = 0; i < n; ++i) rest[i] = y[i] - slow_at(t[i]);
    std::size_t early = 1;
    while (early < n && rest[early] > 0.05 * rest[0] && early < n / 4) ++early;
    const auto fast = rest[0] > 0.0 ? log_line(t, rest, 0, std::max<std::size_t>(early, 2)) : std::nullopt;
    double rate_fast = 10.0 * rate_slow;
    double amp_fast = std::max(y0 - amp_slow, 1e-3 * y0);
    if (fast && fast->first < 0.0) {
        rate_fast = std::max(-fast->first, 1.5 * rate_slow);
        amp_fast = std::exp(fast->second);
    }
    Eigen::VectorXd p(5);
    p << amp_fast, safe_rate(rate_fast), amp_slow, safe_rate(rate_slow), 0.0;
    return p;
}

inline double sum_squares(FitModel m, const Eigen::VectorXd& p, const std::vector<double>& t,
                          const std::vector<double>& y) {
    double r = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double d = model_eval(m, p, t[i], nullptr) - y[i];
        r += d * d;
    }
    return r;
}

}  // namespace detail

struct FitOptions {
    bool nonneg_offset = false;  ///< refit with the offset pinned at 0 if it comes out negative
};

namespace detail {

/// Linear amplitudes and offset for fixed rates; returns the sum of squares.
inline double linear_amplitudes(FitModel m, Eigen::VectorXd& p, const std::vector<double>& t,
                                const std::vector<double>& y) {
    const int k = param_count(m);
    const Eigen::Index n = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd a(n, k == 5 ? 3 : 2);
    Eigen::VectorXd rhs(n);
    std::array<double, 5> g{};
    for (Eigen::Index i = 0; i < n; ++i) {
        model_eval(m, p, t[static_cast<std::size_t>(i)], g.data());
        if (k == 5)
            a.row(i) << g[0], g[2], 1.0;
        else
            a.row(i) << g[0], 1.0;
        rhs[i] = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
    if (k == 5) {
        p[0] = c[0];
        p[2] = c[1];
        p[4] = c[2];
    } else {
        p[0] = c[0];
        p[2] = c[1];
    }
    return (a * c - rhs).squaredNorm();
}

/// Best few points of a log-spaced rate grid, amplitudes solved exactly at each.
inline std::vector<Eigen::VectorXd> grid_starts(FitModel m, const std::vector<double>& t, const std::vector<double>& y,
                                                std::size_t keep) {
    const double span = std::max(t.back() - t.front(), 1e-300);
    constexpr int kPoints = 16;
    std::vector<double> rates(kPoints);
    for (int i = 0; i < kPoints; ++i) rates[i] = std::log(0.1 / span * std::pow(1e4, i / double(kPoints - 1)));
    std::vector<std::pair<double, Eigen::VectorXd>> found;
    const int k = param_count(m);
    for (int i = 0; i < kPoints; ++i) {
        for (int j = 0; j < (k == 5 ? kPoints : 1); ++j) {
            if (m == FitModel::TwoExp && j >= i) continue;
            Eigen::VectorXd p = Eigen::VectorXd::Zero(k);
            p[1] = rates[i];
            if (k == 5) p[3] = rates[j];
            const double r = linear_amplitudes(m, p, t, y);
            if (std::isfinite(r)) found.emplace_back(r, p);
        }
    }
    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < std::min(keep, found.size()); ++i) out.push_back(found[i].second);
    return out;
}

inline std::pair<Eigen::VectorXd, double> multi_start(FitModel m, bool zero_offset, const Eigen::VectorXd& base,
                                                      const std::vector<double>& t, const std::vector<double>& y) {
    static constexpr std::array<std::array<double, 2>, 6> kShifts{
        {{0.0, 0.0}, {-0.7, 0.0}, {0.7, 0.0}, {0.0, -0.7}, {0.0, 0.7}, {0.7, -0.7}}};
    std::vector<Eigen::VectorXd> starts;
    for (const auto& sh : kShifts) {
        Eigen::VectorXd p = base;
        if (param_count(m) == 5) {
            p[1] += sh[0];
            p[3] += sh[1];
        } else {
            p[1] += sh[0] + sh[1];
        }
        starts.push_back(p);
    }
    for (Eigen::VectorXd& p : grid_starts(m, t, y, 4)) {
        if (zero_offset) p[p.size() - 1] = 0.0;
        starts.push_back(std::move(p));
    }
    Eigen::VectorXd best;
    double best_r = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& p : starts) {
        DecayFunctor f(m, zero_offset, t, y);
        Eigen::VectorXd x = zero_offset ? Eigen::VectorXd(p.head(p.size() - 1)) : p;
        Eigen::LevenbergMarquardt<DecayFunctor> lm(f);
        lm.setMaxfev(4000);
        lm.setXtol(1e-15);
        lm.setFtol(1e-15);
        lm.minimize(x);
        if (!x.allFinite()) continue;
        const Eigen::VectorXd q = f.full(x);
        const double r = sum_squares(m, q, t, y);
        if (std::isfinite(r) && r < best_r) {
            best_r = r;
            best = q;
        }
    }
    return {best, best_r};
}

}  // namespace detail

/// Multi-start least squares for one model: the log-linear estimate, five
/// deterministic shifts of its log-rates and the best points of a coarse rate grid.
inline FitResult fit_model(FitModel m, const std::vector<double>& t, const std::vector<double>& y,
                           FitOptions opt = {}) {
    if (t.size() != y.size()) throw ValidationError("fit: t and y differ in length");
    if (t.size() < 8) throw ValidationError("fit: at least 8 samples required");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]) || !std::isfinite(y[i])) throw ValidationError("fit: non-finite sample");
        if (!(y[i] > 0.0)) throw ValidationError("fit: samples must be positive");
        if (i > 0 && !(t[i] > t[i - 1])) throw ValidationError("fit: times must be strictly ascending");
    }
    const Eigen::VectorXd base = detail::initial_guess(m, t, y);
    auto [best, best_r] = detail::multi_start(m, false, base, t, y);
    if (opt.nonneg_offset && std::isfinite(best_r) && best[best.size() - 1] < 0.0)
        std::tie(best, best_r) = detail::multi_start(m, true, base, t, y);
    if (!std::isfinite(best_r)) throw FitError(std::string("fit: no start converged for ") + to_string(m), best_r);

    FitResult out;
    out.model = m;
    out.residual = best_r;
    out.samples = t.size();
    if (detail::param_count(m) == 5) {
        double a = best[0], b = std::exp(best[1]), c = best[2], d = std::exp(best[3]);
        if (m == FitModel::TwoExp && d > b) {
            std::swap(a, c);
            std::swap(b, d);
        }
        out.params = {a, b, c, d, best[4]};
        out.time_constant = 1.0 / d;
    } else {
        const double b = std::exp(best[1]);
        out.params = {best[0], b, best[2]};
        out.time_constant = 1.0 / b;
    }
    return out;
}

/// Best model among the candidates by residual.
inline FitResult fit_time_constant(const std::vector<double>& t, const std::vector<double>& y,
                                   const std::vector<FitModel>& models, FitOptions opt = {}) {
    if (models.empty()) throw ValidationError("fit: no candidate models");
    std::optional<FitResult> best;
    double worst_error = 0.0;
    std::string why;
    for (FitModel m : models) {
        try {
            FitResult r = fit_model(m, t, y, opt);
            if (!best || r.residual < best->residual) best = std::move(r);
        } catch (const FitError& e) {
            worst_error = e.best();
            why = e.what();
        }
    }
    if (!best) throw FitError("fit: every candidate failed (" + why + ")", worst_error);
    return *best;
}

/// Leading samples down to the first one below floor·y[0].
inline std::size_t decay_window(const std::vector<double>& y, double floor) {
    if (y.empty()) return 0;
    const double limit = floor * y.front();
    std::size_t k = 0;
    while (k < y.size() && y[k] >= limit) ++k;
    return k;
}

}  // namespace dephasing
