#pragma once

// Executes experiment configs and the named recipes, writing CSV/JSON artifacts
// and a manifest into one output directory.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dephasing/analysis.hpp"
#include "dephasing/bath.hpp"
#include "dephasing/config.hpp"
#include "dephasing/dynamics.hpp"
#include "dephasing/fitting.hpp"
#include "dephasing/io.hpp"
#include "dephasing/schedule.hpp"

namespace dephasing {

/// Calls f(i) for i in [0, n) on up to `threads` workers. The first exception (by index) is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> r{"table1", "fig1", "fig2", "fig3d"};
    return r;
}

/// Infrared floor the recipes use for the reference family.
inline constexpr double kRecipeInfraredFloor = 1e-8;

/// "s1", "s1_2", … for reciprocal-integer exponents, otherwise the number.
inline std::string exponent_label(double s) {
    const double r = 1.0 / s;
    const double n = std::round(r);
    if (std::abs(r - n) < 1e-9 * r) return n == 1.0 ? "s1" : "s1_" + std::to_string(static_cast<long long>(n));
    return "s" + io::format_number(s);
}

namespace detail {

inline io::json fit_json(const FitResult& f) {
    return {{"model", to_string(f.model)},
            {"time_constant", io::number(f.time_constant)},
            {"residual", io::number(f.residual)},
            {"samples", f.samples},
            {"params", io::numbers(f.params)}};
}

inline io::json schedule_json(const PulseSchedule& s) {
    return {{"label", s.label()}, {"intervals", io::numbers(s.intervals)}};
}

inline io::Table trace_table(const CoherenceTrace& tr) {
    io::Table t{{"t", "re", "im", "abs"}, {}};
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        t.add({tr.times[i], tr.values[i].real(), tr.values[i].imag(), std::abs(tr.values[i])});
    return t;
}

inline std::vector<double> span_times(double t_end, double step) { return uniform_times(t_end, step); }

inline io::json markov_json(const BathSpec& b) {
    const MaybeFinite r = markov_dephasing_rate(b);
    if (is_divergent(r)) return "divergent";
    return io::number(std::get<double>(r));
}

inline io::json ramsey_fit_json(const CoherenceTrace& tr, const Tolerances& tol) {
    const auto y = tr.magnitudes();
    if (!has_decay(y)) return {{"status", "no decay; fit skipped"}};
    try {
        io::json j = fit_json(ramsey_time_constant(tr, {tol.two_component_window, tol.one_component_window}));
        j["status"] = "ok";
        return j;
    } catch (const std::exception& e) {
        return {{"status", std::string("fit failed: ") + e.what()}};
    }
}

inline EchoSearch echo_search(const Tolerances& t) {
    return {t.echo_step, t.echo_span, t.echo_tail_settle, t.echo_tail_span};
}

inline io::Table peak_table(const EchoPeakTrack& tr) {
    io::Table t{{"dt", "dt2", "t_total", "value"}, {}};
    for (const auto& p : tr.peaks) t.add({p.dt, p.dt2, p.t_total, p.value});
    return t;
}

inline io::json echo_json(const EchoConstant& e) {
    io::json j = fit_json(e.fit);
    j["source"] = e.from_tail ? "post-pulse tail of the longest echo" : "recovery peak series";
    j["peaks"] = e.track.peaks.size();
    j["no_peaks"] = e.track.no_peaks;
    return j;
}

inline std::vector<DdPoint> dd_sweep_parallel(const BathKernels& k, const std::vector<double>& grid, DdSweepOptions o,
                                              int threads) {
    std::vector<DdPoint> out(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) { out[i] = dd_sweep(k, {grid[i]}, o).front(); });
    return out;
}

inline EchoPeakTrack echo_track_parallel(const BathKernels& k, const std::vector<double>& grid, EchoSearch s,
                                         int threads) {
    std::vector<EchoPeakTrack> parts(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) { parts[i] = echo_peak_track(k, {grid[i]}, s); });
    EchoPeakTrack out;
    for (auto& p : parts) out.peaks.insert(out.peaks.end(), p.peaks.begin(), p.peaks.end());
    out.no_peaks = out.peaks.empty();
    return out;
}

inline EchoConstant echo_constant_parallel(const BathKernels& k, const std::vector<double>& grid, EchoSearch s,
                                           int threads) {
    EchoConstant out;
    out.track = echo_track_parallel(k, grid, s, threads);
    if (out.track.peaks.size() >= 8) {
        out.fit = echo_time_constant(out.track);
        return out;
    }
    const double dt = *std::max_element(grid.begin(), grid.end());
    auto [t, y] = echo_tail(k, dt, s.tail_settle, s.tail_span, s.step);
    out.fit = fit_time_constant(t, y, {FitModel::SingleExp});
    out.from_tail = true;
    return out;
}

inline io::Table dd_table(const std::vector<DdPoint>& pts) {
    io::Table t{{"dt", "cycles", "t_dd", "lower_bound"}, {}};
    for (const auto& p : pts) t.add({p.dt, static_cast<double>(p.cycles), p.t_dd, p.lower_bound ? 1.0 : 0.0});
    return t;
}

}  // namespace detail

/// Runs one experiment; returns a summary that is also written as summary.json.
inline io::json run_experiment(const ExperimentConfig& c, io::ArtifactWriter& out, int threads = 1) {
    using namespace detail;
    const BathKernels k(c.bath);
    io::json summary;
    summary["experiment"] = c.experiment;

    if (c.experiment == "ramsey" || c.experiment == "spectrum" || c.experiment == "fit") {
        const CoherenceTrace tr = ramsey_trace(k, c.initial, span_times(c.t_end, c.time_step));
        out.write_csv("trace.csv", trace_table(tr));
        summary["schedule"] = schedule_json(tr.schedule);
        summary["final_abs"] = io::number(std::abs(tr.values.back()));
        summary["markov_rate"] = markov_json(c.bath);
        if (c.experiment == "ramsey") summary["fit"] = ramsey_fit_json(tr, c.tol);
        if (c.experiment == "spectrum") {
            const Spectrum sp = ramsey_spectrum(tr, c.omega_grid.values());
            io::Table t{{"omega", "spectrum"}, {}};
            for (std::size_t i = 0; i < sp.values.size(); ++i) t.add({sp.frequencies[i], sp.values[i]});
            out.write_csv("spectrum.csv", t);
            summary["peak_frequency"] = io::number(sp.peak_frequency);
            summary["raw_max"] = io::number(sp.raw_max);
            summary["normalized"] = sp.normalized;
            summary["warnings"] = sp.warnings;
        }
        if (c.experiment == "fit") {
            const auto y = tr.magnitudes();
            io::json fits = io::json::array();
            std::optional<FitResult> best;
            if (!has_decay(y)) {
                summary["status"] = "no decay; fit skipped";
            } else {
                for (FitModel m : c.models) {
                    const double floor = is_two_component(m) ? c.tol.two_component_window : c.tol.one_component_window;
                    const std::size_t n = decay_window(y, floor);
                    const std::vector<double> t(tr.times.begin(), tr.times.begin() + static_cast<std::ptrdiff_t>(n));
                    const std::vector<double> v(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
                    try {
                        FitResult r = fit_model(m, t, v);
                        fits.push_back(fit_json(r));
                        if (!best || r.residual < best->residual) best = r;
                    } catch (const std::exception& e) {
                        fits.push_back({{"model", to_string(m)}, {"status", std::string("failed: ") + e.what()}});
                    }
                }
                summary["status"] = best ? "ok" : "every model failed";
            }
            summary["candidates"] = fits;
            if (best) summary["best"] = fit_json(*best);
        }
    } else if (c.experiment == "echo") {
        const PulseSchedule s = hahn_echo(c.dt, c.dt2);
        const CoherenceTrace tr = sequence_trace(k, c.initial, s, span_times(s.duration(), c.time_step));
        out.write_csv("trace.csv", trace_table(tr));
        summary["schedule"] = schedule_json(s);
        summary["final_abs"] = io::number(std::abs(tr.values.back()));
    } else if (c.experiment == "dd") {
        const PulseSchedule s = cpmg_symmetric(c.cycles, c.dt);
        const CoherenceTrace tr = sequence_trace(k, c.initial, s, span_times(s.duration(), c.time_step));
        out.write_csv("trace.csv", trace_table(tr));
        summary["schedule"] = schedule_json(s);
        std::vector<double> ends{0.0};
        for (int m = 1; m <= c.cycles; ++m) ends.push_back(2.0 * m * c.dt);
        const CoherenceTrace ce = sequence_trace(k, c.initial, s, ends);
        out.write_csv("cycle_ends.csv", trace_table(ce));
        summary["final_abs"] = io::number(std::abs(ce.values.back()));
    } else if (c.experiment == "echo-map") {
        const EchoConstant e = echo_constant_parallel(k, c.dt_grid.values(), echo_search(c.tol), threads);
        out.write_csv("peaks.csv", peak_table(e.track));
        summary["echo"] = echo_json(e);
    } else if (c.experiment == "dd-sweep") {
        DdSweepOptions o;
        o.total_time = c.total_time;
        o.value_floor = c.tol.dd_value_floor;
        const auto pts = dd_sweep_parallel(k, c.dt_grid.values(), o, threads);
        out.write_csv("dd_sweep.csv", dd_table(pts));
        std::size_t arg = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i].t_dd > pts[arg].t_dd) arg = i;
        summary["argmax_dt"] = io::number(pts[arg].dt);
        summary["max_t_dd"] = io::number(pts[arg].t_dd);
        std::size_t bounds = 0;
        for (const auto& p : pts) bounds += p.lower_bound;
        summary["lower_bound_points"] = bounds;
    } else {
        throw ValidationError("run: unknown experiment '" + c.experiment + "'");
    }
    summary["config"] = c.to_json();
    out.write_json("summary.json", summary);
    return summary;
}

// ---- Recipes ----

namespace detail {

inline BathSpec recipe_bath(double s) {
    BathSpec b = BathSpec::reference(s);
    b.omega_ir = kRecipeInfraredFloor;
    return b;
}

inline io::json recipe_meta(const std::string& name) {
    io::json exps = io::json::array();
    for (double s : kReferenceExponents) exps.push_back(io::number(s));
    const BathSpec b = BathSpec::reference(1.0);
    return {{"recipe", name},
            {"bath", {{"s", exps}, {"kappa", io::number(b.kappa)}, {"omega_c", io::number(b.omega_c)},
                      {"omega_ph", io::number(b.omega_ph)}, {"beta", io::number(b.beta)},
                      {"omega_ir", io::number(kRecipeInfraredFloor)}}}};
}

inline io::json recipe_table1(io::ArtifactWriter& out, int threads) {
    const std::vector<double> s_list(std::begin(kReferenceExponents), std::end(kReferenceExponents));
    const Tolerances tol;
    const auto grid = Grid::range(0.25, 60.0, 0.25).values();
    std::vector<io::json> rows(s_list.size());
    std::vector<std::vector<double>> csv(s_list.size());
    parallel_for(s_list.size(), threads, [&](std::size_t i) {
        const double s = s_list[i];
        const double t_end = s >= 1.0 ? 500.0 : 200.0;
        const BathKernels k(recipe_bath(s));
        const CoherenceTrace tr = ramsey_trace(k, InitialState::Factorized, uniform_times(t_end, 0.01));
        const FitResult tr_fit = ramsey_time_constant(tr);
        const CoherenceTrace tr_exact =
            ramsey_trace(BathKernels(BathSpec::reference(s)), InitialState::Factorized, uniform_times(t_end, 0.01));
        const FitResult exact_fit = ramsey_time_constant(tr_exact);
        const EchoConstant e = echo_time_constant(k, grid, echo_search(tol));
        rows[i] = {{"s", io::number(s)},
                   {"T_R", io::number(tr_fit.time_constant)},
                   {"T_E", io::number(e.fit.time_constant)},
                   {"ramsey_fit", fit_json(tr_fit)},
                   {"echo_fit", echo_json(e)},
                   {"T_R_exact_bath", io::number(exact_fit.time_constant)}};
        csv[i] = {s, tr_fit.time_constant, e.fit.time_constant, exact_fit.time_constant};
    });
    io::Table t{{"s", "T_R", "T_E", "T_R_exact_bath"}, {}};
    for (auto& r : csv) t.add(r);
    out.write_csv("table1.csv", t);
    io::json j;
    j["rows"] = rows;
    out.write_json("table1.json", j);
    return j;
}

inline io::json recipe_fig1(io::ArtifactWriter& out, int threads) {
    const std::vector<double> s_list(std::begin(kReferenceExponents), std::end(kReferenceExponents));
    const auto omega = Grid::range(0.0, 3.0, 0.001).values();
    struct Result {
        CoherenceTrace trace[2];
        Spectrum spec[2];
    };
    std::vector<Result> res(s_list.size());
    parallel_for(s_list.size(), threads, [&](std::size_t i) {
        const BathKernels k(recipe_bath(s_list[i]));
        const auto times = uniform_times(500.0, 0.01);
        for (int st = 0; st < 2; ++st) {
            const auto init = st == 0 ? InitialState::Factorized : InitialState::Correlated;
            res[i].trace[st] = ramsey_trace(k, init, times);
            res[i].spec[st] = ramsey_spectrum(res[i].trace[st], omega);
        }
    });
    io::json peaks = io::json::array();
    io::Table spectra{{"omega"}, {}};
    for (double s : s_list)
        for (const char* st : {"factorized", "correlated"}) spectra.header.push_back(exponent_label(s) + "_" + st);
    for (std::size_t w = 0; w < omega.size(); ++w) {
        std::vector<double> row{omega[w]};
        for (const auto& r : res)
            for (int st = 0; st < 2; ++st) row.push_back(r.spec[st].values[w]);
        spectra.add(row);
    }
    out.write_csv("fig1_spectra.csv", spectra);
    for (std::size_t i = 0; i < s_list.size(); ++i) {
        io::Table t{{"t", "abs_factorized", "re_factorized", "abs_correlated", "re_correlated"}, {}};
        const auto& a = res[i].trace[0];
        const auto& b = res[i].trace[1];
        for (std::size_t j = 0; j < a.times.size() && a.times[j] <= 100.0 + 1e-9; j += 10)
            t.add({a.times[j], std::abs(a.values[j]), a.values[j].real(), std::abs(b.values[j]), b.values[j].real()});
        out.write_csv("fig1_trace_" + exponent_label(s_list[i]) + ".csv", t);
        peaks.push_back({{"s", io::number(s_list[i])},
                         {"peak_factorized", io::number(res[i].spec[0].peak_frequency)},
                         {"peak_correlated", io::number(res[i].spec[1].peak_frequency)},
                         {"warnings", res[i].spec[1].warnings}});
    }
    io::json j;
    j["peaks"] = peaks;
    out.write_json("fig1_peaks.json", j);
    return j;
}

inline io::json recipe_fig2(io::ArtifactWriter& out, int threads) {
    const std::vector<double> s_list(std::begin(kReferenceExponents), std::end(kReferenceExponents));
    const Tolerances tol;
    const auto grid = Grid::range(0.25, 60.0, 0.25).values();
    const auto map_axis = Grid::range(0.0, 20.0, 0.25).values();
    struct Result {
        EchoConstant echo;
        io::Table map{{"dt", "dt2", "abs"}, {}};
        io::Table tail{{"dt", "t_total", "abs"}, {}};
    };
    std::vector<Result> res(s_list.size());
    parallel_for(s_list.size(), threads, [&](std::size_t i) {
        const BathKernels k(recipe_bath(s_list[i]));
        res[i].echo = echo_time_constant(k, grid, echo_search(tol));
        for (double dt : map_axis) {
            std::vector<double> times;
            for (double d2 : map_axis) times.push_back(dt + d2);
            const PulseSchedule s = dt > 0.0 ? hahn_echo(dt, map_axis.back()) : ramsey(map_axis.back());
            const PathQuantities q = path_quantities(k, s, times, false);
            for (std::size_t j = 0; j < times.size(); ++j) res[i].map.add({dt, map_axis[j], 0.5 * std::exp(-q.gamma[j])});
        }
        if (res[i].echo.from_tail)
            for (double dt : {5.0, 10.0, 20.0, 40.0}) {
                const auto [t, y] = echo_tail(k, dt, 0.0, 200.0, 0.5);
                for (std::size_t j = 0; j < t.size(); ++j) res[i].tail.add({dt, t[j], y[j]});
            }
    });
    io::json rows = io::json::array();
    for (std::size_t i = 0; i < s_list.size(); ++i) {
        const std::string lab = exponent_label(s_list[i]);
        out.write_csv("fig2_peaks_" + lab + ".csv", peak_table(res[i].echo.track));
        out.write_csv("fig2_map_" + lab + ".csv", res[i].map);
        if (!res[i].tail.rows.empty()) out.write_csv("fig2_tail_" + lab + ".csv", res[i].tail);
        io::json r = echo_json(res[i].echo);
        r["s"] = io::number(s_list[i]);
        rows.push_back(r);
    }
    io::json j;
    j["echo"] = rows;
    out.write_json("fig2_summary.json", j);
    return j;
}

inline io::json recipe_fig3d(io::ArtifactWriter& out, int threads) {
    const std::vector<double> s_list(std::begin(kReferenceExponents), std::end(kReferenceExponents));
    std::vector<double> grid{0.02, 0.05, 0.1, 0.15};
    for (double d : Grid::range(0.2, 10.0, 0.2).values()) grid.push_back(d);
    std::vector<std::vector<DdPoint>> res(s_list.size());
    for (std::size_t i = 0; i < s_list.size(); ++i) {
        const BathKernels k(recipe_bath(s_list[i]));
        res[i] = dd_sweep_parallel(k, grid, {}, threads);
    }
    io::Table t{{"dt"}, {}};
    for (double s : s_list) {
        t.header.push_back("t_dd_" + exponent_label(s));
        t.header.push_back("lower_bound_" + exponent_label(s));
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> row{grid[g]};
        for (const auto& r : res) {
            row.push_back(r[g].t_dd);
            row.push_back(r[g].lower_bound ? 1.0 : 0.0);
        }
        t.add(row);
    }
    out.write_csv("fig3d.csv", t);
    io::json rows = io::json::array();
    for (std::size_t i = 0; i < s_list.size(); ++i) {
        std::size_t arg = 0;
        for (std::size_t g = 0; g < grid.size(); ++g)
            if (grid[g] >= 1.0 && (grid[arg] < 1.0 || res[i][g].t_dd > res[i][arg].t_dd)) arg = g;
        rows.push_back({{"s", io::number(s_list[i])}, {"argmax_dt_above_1", io::number(grid[arg])},
                        {"max_t_dd", io::number(res[i][arg].t_dd)}});
    }
    io::json j;
    j["dd"] = rows;
    out.write_json("fig3d_summary.json", j);
    return j;
}

}  // namespace detail

inline io::json run_recipe(const std::string& name, io::ArtifactWriter& out, int threads = 1) {
    io::json r;
    if (name == "table1") r = detail::recipe_table1(out, threads);
    else if (name == "fig1") r = detail::recipe_fig1(out, threads);
    else if (name == "fig2") r = detail::recipe_fig2(out, threads);
    else if (name == "fig3d") r = detail::recipe_fig3d(out, threads);
    else throw ValidationError("recipe: unknown name '" + name + "' (table1, fig1, fig2, fig3d)");
    return r;
}

}  // namespace dephasing
