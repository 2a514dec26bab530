#pragma once

// Experiment configuration: a JSON document validated against a fixed schema.
// Unknown keys are rejected; to_json() writes every field, defaults included.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dephasing/bath.hpp"
#include "dephasing/dynamics.hpp"
#include "dephasing/error.hpp"
#include "dephasing/fitting.hpp"
#include "dephasing/io.hpp"

namespace dephasing {

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"ramsey", "echo", "echo-map", "dd", "dd-sweep", "spectrum", "fit"};
    return k;
}

/// Either an explicit list or start/stop/step.
struct Grid {
    std::vector<double> list;
    double start{0.0}, stop{0.0}, step{0.0};

    bool is_list() const noexcept { return !list.empty(); }

    std::vector<double> values() const {
        if (is_list()) return list;
        std::vector<double> g;
        const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) g.push_back(io::round12(start + static_cast<double>(i) * step));
        return g;
    }

    io::json to_json() const {
        if (is_list()) return list;
        return {{"start", start}, {"stop", stop}, {"step", step}};
    }

    static Grid range(double a, double b, double h) { return {{}, a, b, h}; }
};

struct Tolerances {
    double one_component_window = 1e-3;  ///< single-component Ramsey fits stop below this fraction of |ρ(0)|
    double two_component_window = 1e-9;  ///< two-component fits stop here
    double dd_value_floor = 1e-4;        ///< dd-sweep fits use cycle ends above this
    double echo_step = 0.05;             ///< Δt′ grid step of the peak search
    double echo_span = 100.0;            ///< Δt′ search range
    double echo_tail_settle = 5.0;
    double echo_tail_span = 200.0;

    /// name → member, for overrides and serialization.
    std::map<std::string, double*> fields() {
        return {{"one_component_window", &one_component_window}, {"two_component_window", &two_component_window},
                {"dd_value_floor", &dd_value_floor},             {"echo_step", &echo_step},
                {"echo_span", &echo_span},                       {"echo_tail_settle", &echo_tail_settle},
                {"echo_tail_span", &echo_tail_span}};
    }
};

struct ExperimentConfig {
    std::string experiment{"ramsey"};
    BathSpec bath{};
    InitialState initial{InitialState::Factorized};
    // schedule
    double dt{4.0};
    double dt2{4.0};
    int cycles{5};
    double total_time{200.0};
    double t_end{100.0};
    // grids
    double time_step{0.01};
    Grid dt_grid{Grid::range(0.2, 10.0, 0.2)};
    Grid omega_grid{Grid::range(0.0, 3.0, 0.001)};
    std::vector<FitModel> models{FitModel::SingleExp, FitModel::Gaussian};
    Tolerances tol{};
    std::string output;

    /// Every field with full precision, so a parsed copy is bit-identical.
    io::json to_json() const {
        io::json j;
        j["experiment"] = experiment;
        j["bath"] = {{"s", bath.s},         {"kappa", bath.kappa}, {"omega_c", bath.omega_c},
                     {"omega_ph", bath.omega_ph}, {"beta", bath.beta},   {"omega_ir", bath.omega_ir}};
        j["initial_state"] = initial == InitialState::Factorized ? "factorized" : "correlated";
        j["schedule"] = {{"dt", dt}, {"dt2", dt2}, {"n", cycles}, {"total_time", total_time}, {"t_end", t_end}};
        j["grids"] = {{"time_step", time_step}, {"dt_grid", dt_grid.to_json()}, {"omega_grid", omega_grid.to_json()}};
        io::json m = io::json::array();
        for (FitModel f : models) m.push_back(to_string(f));
        j["fit"] = {{"models", m}};
        io::json t;
        Tolerances copy = tol;
        for (const auto& [k, p] : copy.fields()) t[k] = *p;
        j["tolerances"] = t;
        j["output"] = output;
        return j;
    }
};

namespace detail {

inline void reject_unknown(const io::json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ValidationError("config: " + path + ": expected an object");
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ValidationError("config: " + path + "/" + k + ": unknown key");
}

inline double get_number(const io::json& obj, const std::string& key, const std::string& path, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError("config: " + path + "/" + key + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError("config: " + path + "/" + key + ": must be finite");
    return d;
}

inline void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ValidationError("config: " + path + ": " + what);
}

inline Grid get_grid(const io::json& obj, const std::string& key, const std::string& path, const Grid& fallback,
                     bool positive) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    const std::string p = path + "/" + key;
    Grid g;
    if (v.is_array()) {
        require(!v.empty(), p, "empty list");
        for (std::size_t i = 0; i < v.size(); ++i) {
            require(v[i].is_number(), p + "/" + std::to_string(i), "expected a number");
            g.list.push_back(v[i].get<double>());
        }
        require(std::is_sorted(g.list.begin(), g.list.end()), p, "values must be ascending");
    } else {
        reject_unknown(v, p, {"start", "stop", "step"});
        require(v.contains("start") && v.contains("stop") && v.contains("step"), p, "needs start, stop and step");
        g.start = get_number(v, "start", p, 0.0);
        g.stop = get_number(v, "stop", p, 0.0);
        g.step = get_number(v, "step", p, 0.0);
        require(g.step > 0.0, p + "/step", "must be positive");
        require(g.stop >= g.start, p, "stop must not be below start");
    }
    if (positive)
        for (double x : g.values()) require(x > 0.0, p, "values must be positive");
    return g;
}

}  // namespace detail

/// Defaults that depend on the experiment kind, applied before the document is read.
inline ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    if (experiment == "echo-map") c.dt_grid = Grid::range(0.25, 60.0, 0.25);
    if (experiment == "spectrum") c.t_end = 500.0;
    if (experiment == "dd") c.dt = 4.0, c.cycles = 25;
    return c;
}

/// Parses and validates a config document. Overrides are "name=value" pairs for the tolerances block.
inline ExperimentConfig parse_config(const io::json& doc, const std::vector<std::string>& overrides = {}) {
    using namespace detail;
    reject_unknown(doc, "", {"experiment", "bath", "initial_state", "schedule", "grids", "fit", "tolerances", "output"});
    require(doc.contains("experiment") && doc.at("experiment").is_string(), "/experiment", "required string");
    const std::string kind = doc.at("experiment").get<std::string>();
    const auto& kinds = experiment_kinds();
    require(std::find(kinds.begin(), kinds.end(), kind) != kinds.end(), "/experiment", "unknown experiment '" + kind + "'");
    ExperimentConfig c = default_config(kind);

    if (doc.contains("bath")) {
        const auto& b = doc.at("bath");
        reject_unknown(b, "/bath", {"s", "kappa", "omega_c", "omega_ph", "beta", "omega_ir"});
        c.bath.s = get_number(b, "s", "/bath", c.bath.s);
        c.bath.kappa = get_number(b, "kappa", "/bath", c.bath.kappa);
        c.bath.omega_c = get_number(b, "omega_c", "/bath", c.bath.omega_c);
        c.bath.omega_ph = get_number(b, "omega_ph", "/bath", c.bath.omega_ph);
        c.bath.beta = get_number(b, "beta", "/bath", c.bath.beta);
        c.bath.omega_ir = get_number(b, "omega_ir", "/bath", c.bath.omega_ir);
    }
    try {
        c.bath.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config: /bath: ") + e.what());
    }

    if (doc.contains("initial_state")) {
        const auto& v = doc.at("initial_state");
        require(v.is_string(), "/initial_state", "expected a string");
        const std::string s = v.get<std::string>();
        if (s == "factorized") c.initial = InitialState::Factorized;
        else if (s == "correlated") c.initial = InitialState::Correlated;
        else require(false, "/initial_state", "expected 'factorized' or 'correlated'");
    }

    if (doc.contains("schedule")) {
        const auto& s = doc.at("schedule");
        reject_unknown(s, "/schedule", {"dt", "dt2", "n", "total_time", "t_end"});
        c.dt = get_number(s, "dt", "/schedule", c.dt);
        c.dt2 = get_number(s, "dt2", "/schedule", c.dt2);
        if (s.contains("n")) {
            require(s.at("n").is_number_integer(), "/schedule/n", "expected an integer");
            c.cycles = s.at("n").get<int>();
        }
        c.total_time = get_number(s, "total_time", "/schedule", c.total_time);
        c.t_end = get_number(s, "t_end", "/schedule", c.t_end);
    }
    require(c.dt > 0.0, "/schedule/dt", "must be positive");
    require(c.dt2 >= 0.0, "/schedule/dt2", "must be non-negative");
    require(c.cycles >= 1, "/schedule/n", "must be at least 1");
    require(c.total_time > 0.0, "/schedule/total_time", "must be positive");
    require(c.t_end > 0.0, "/schedule/t_end", "must be positive");

    if (doc.contains("grids")) {
        const auto& g = doc.at("grids");
        reject_unknown(g, "/grids", {"time_step", "dt_grid", "omega_grid"});
        c.time_step = get_number(g, "time_step", "/grids", c.time_step);
        c.dt_grid = get_grid(g, "dt_grid", "/grids", c.dt_grid, true);
        c.omega_grid = get_grid(g, "omega_grid", "/grids", c.omega_grid, false);
    }
    require(c.time_step > 0.0, "/grids/time_step", "must be positive");

    if (doc.contains("fit")) {
        const auto& f = doc.at("fit");
        reject_unknown(f, "/fit", {"models"});
        if (f.contains("models")) {
            const auto& m = f.at("models");
            require(m.is_array() && !m.empty(), "/fit/models", "expected a non-empty list");
            c.models.clear();
            for (std::size_t i = 0; i < m.size(); ++i) {
                require(m[i].is_string(), "/fit/models/" + std::to_string(i), "expected a model name");
                try {
                    c.models.push_back(fit_model_from_string(m[i].get<std::string>()));
                } catch (const ValidationError& e) {
                    throw ValidationError("config: /fit/models/" + std::to_string(i) + ": " + e.what());
                }
            }
        }
    }

    auto fields = c.tol.fields();
    if (doc.contains("tolerances")) {
        const auto& t = doc.at("tolerances");
        std::set<std::string> names;
        for (const auto& [k, p] : fields) names.insert(k);
        reject_unknown(t, "/tolerances", names);
        for (auto& [k, p] : fields) *p = get_number(t, k, "/tolerances", *p);
    }
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        require(eq != std::string::npos, "--tol-override", "expected key=value, got '" + o + "'");
        const std::string key = o.substr(0, eq);
        const auto it = fields.find(key);
        require(it != fields.end(), "--tol-override", "unknown tolerance '" + key + "'");
        try {
            std::size_t used = 0;
            const double v = std::stod(o.substr(eq + 1), &used);
            require(used == o.size() - eq - 1 && std::isfinite(v), "--tol-override", "bad number in '" + o + "'");
            *it->second = v;
        } catch (const std::logic_error&) {
            require(false, "--tol-override", "bad number in '" + o + "'");
        }
    }
    for (const auto& [k, p] : fields) require(*p > 0.0, "/tolerances/" + k, "must be positive");

    if (doc.contains("output")) {
        require(doc.at("output").is_string(), "/output", "expected a string");
        c.output = doc.at("output").get<std::string>();
    }
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
    io::json doc;
    try {
        doc = io::json::parse(text);
    } catch (const io::json::parse_error& e) {
        throw ValidationError(std::string("config: parse error: ") + e.what());
    }
    return parse_config(doc, overrides);
}

}  // namespace dephasing
