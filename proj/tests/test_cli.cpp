#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "dephasing/dephasing.hpp"

using namespace dephasing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dephasing_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string validation_message(const std::string& text, const std::vector<std::string>& overrides = {}) {
    try {
        parse_config_text(text, overrides);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return "";
}

std::map<std::string, std::string> directory_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = io::read_file(e.path());
    return out;
}

io::json manifest_without_timestamp(const fs::path& dir) {
    io::json m = io::json::parse(io::read_file(dir / "manifest.json"));
    m.erase("created");
    return m;
}

void expect_manifest_complete(const fs::path& dir) {
    const io::json m = io::json::parse(io::read_file(dir / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& f : m.at("files")) {
        const std::string name = f.at("file").get<std::string>();
        listed.insert(name);
        const std::string bytes = io::read_file(dir / name);
        EXPECT_EQ(f.at("bytes").get<std::size_t>(), bytes.size()) << name;
        char hex[16];
        std::snprintf(hex, sizeof hex, "%08x", io::crc32(bytes));
        EXPECT_EQ(f.at("crc32").get<std::string>(), hex) << name;
    }
    for (const auto& [name, body] : directory_contents(dir))
        if (name != "manifest.json") EXPECT_TRUE(listed.count(name)) << "orphan " << name;
}

struct Outcome {
    int status;
    std::string out;
    std::string err;
};

Outcome cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path();
    const fs::path o = dir / ("dephasing_cli_stdout_" + std::to_string(counter));
    const fs::path e = dir / ("dephasing_cli_stderr_" + std::to_string(counter++));
    const std::string cmd =
        env + " '" + std::string(DEPHASING_CLI_PATH) + "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
    const int raw = std::system(cmd.c_str());
    Outcome r{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, io::read_file(o), io::read_file(e)};
    fs::remove(o);
    fs::remove(e);
    return r;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const char* kDecoupled = R"({"experiment": "ramsey", "bath": {"kappa": 0}, "schedule": {"t_end": 20}})";

}  // namespace

// ---- config schema ----

TEST(Config, MinimalDocumentTakesDefaults) {
    const ExperimentConfig c = parse_config_text(R"({"experiment": "echo"})");
    EXPECT_EQ(c.experiment, "echo");
    EXPECT_EQ(c.bath, BathSpec{});
    EXPECT_EQ(c.initial, InitialState::Factorized);
    EXPECT_EQ(c.time_step, 0.01);
}

TEST(Config, ExperimentKindDefaults) {
    EXPECT_EQ(parse_config_text(R"({"experiment": "echo-map"})").dt_grid.values().size(), 240u);
    EXPECT_EQ(parse_config_text(R"({"experiment": "spectrum"})").t_end, 500.0);
    EXPECT_EQ(parse_config_text(R"({"experiment": "dd"})").cycles, 25);
}

TEST(Config, UnknownKeysRejectedWithPath) {
    EXPECT_NE(validation_message(R"({"experiment": "ramsey", "colour": 1})").find("/colour"), std::string::npos);
    EXPECT_NE(validation_message(R"({"experiment": "ramsey", "bath": {"gamma": 1}})").find("/bath/gamma"),
              std::string::npos);
    EXPECT_NE(validation_message(R"({"experiment": "dd-sweep", "grids": {"dt_grid": {"start": 1, "stop": 2, "step": 1, "n": 3}}})")
                  .find("/grids/dt_grid/n"),
              std::string::npos);
}

TEST(Config, BadValuesRejectedWithPath) {
    const std::map<std::string, std::string> cases{
        {R"({})", "/experiment"},
        {R"({"experiment": "sweep"})", "/experiment"},
        {R"({"experiment": "ramsey", "bath": {"s": -1}})", "/bath"},
        {R"({"experiment": "ramsey", "bath": {"beta": "hot"}})", "/bath/beta"},
        {R"({"experiment": "dd", "schedule": {"n": 2.5}})", "/schedule/n"},
        {R"({"experiment": "dd", "schedule": {"n": 0}})", "/schedule/n"},
        {R"({"experiment": "echo", "schedule": {"dt": 0}})", "/schedule/dt"},
        {R"({"experiment": "ramsey", "initial_state": "mixed"})", "/initial_state"},
        {R"({"experiment": "dd-sweep", "grids": {"dt_grid": [2, 1]}})", "/grids/dt_grid"},
        {R"({"experiment": "dd-sweep", "grids": {"dt_grid": [0, 1]}})", "/grids/dt_grid"},
        {R"({"experiment": "fit", "fit": {"models": ["Lorentzian"]}})", "/fit/models/0"},
        {R"({"experiment": "ramsey", "tolerances": {"echo_step": -1}})", "/tolerances/echo_step"},
        {R"({"experiment": "ramsey",)", "parse error"}};
    for (const auto& [text, path] : cases) {
        const std::string msg = validation_message(text);
        EXPECT_NE(msg.find(path), std::string::npos) << text << " -> " << msg;
    }
}

TEST(Config, ToleranceOverridesApplyAfterDocument) {
    const ExperimentConfig c =
        parse_config_text(R"({"experiment": "echo-map", "tolerances": {"echo_step": 0.1}})", {"echo_step=0.02", "echo_span=50"});
    EXPECT_EQ(c.tol.echo_step, 0.02);
    EXPECT_EQ(c.tol.echo_span, 50.0);
    EXPECT_NE(validation_message(R"({"experiment": "ramsey"})", {"echo_stride=1"}).find("unknown tolerance"), std::string::npos);
    EXPECT_NE(validation_message(R"({"experiment": "ramsey"})", {"echo_step"}).find("key=value"), std::string::npos);
    EXPECT_NE(validation_message(R"({"experiment": "ramsey"})", {"echo_step=0.1x"}).find("bad number"), std::string::npos);
    EXPECT_NE(validation_message(R"({"experiment": "ramsey"})", {"echo_step=-2"}).find("must be positive"), std::string::npos);
}

TEST(Config, EmittedDocumentRoundTripsBitExactly) {
    ExperimentConfig c = parse_config_text(R"({"experiment": "dd-sweep", "initial_state": "correlated",
        "grids": {"dt_grid": [0.1, 0.30000000000000004, 3]}, "fit": {"models": ["TwoExp", "Gaussian"]}})");
    c.bath = BathSpec::reference(1.0 / 14.0);
    c.bath.omega_ir = 1e-8;
    c.tol.echo_step = 1.0 / 3.0;
    const std::string once = c.to_json().dump();
    const ExperimentConfig back = parse_config_text(once);
    EXPECT_EQ(back.bath, c.bath);
    EXPECT_EQ(back.bath.kappa, 0.04 / (2.0 * std::numbers::pi));
    EXPECT_EQ(back.dt_grid.values(), c.dt_grid.values());
    EXPECT_EQ(back.tol.echo_step, 1.0 / 3.0);
    EXPECT_EQ(back.to_json().dump(), once);
}

// ---- runner ----

TEST(Runner, DecoupledRamseyFlagsNoDecay) {
    const fs::path dir = scratch("decoupled");
    io::ArtifactWriter w(dir);
    const io::json s = run_experiment(parse_config_text(kDecoupled), w);
    EXPECT_EQ(s.at("fit").at("status"), "no decay; fit skipped");
    const std::string csv = io::read_file(dir / "trace.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,re,im,abs");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(line.substr(line.rfind(',') + 1), "0.5") << line;
        ++rows;
    }
    EXPECT_EQ(rows, 2001);
}

TEST(Runner, SummaryRecordsResolvedConfig) {
    const fs::path dir = scratch("summary");
    io::ArtifactWriter w(dir);
    const ExperimentConfig c = parse_config_text(kDecoupled);
    run_experiment(c, w);
    const io::json s = io::json::parse(io::read_file(dir / "summary.json"));
    EXPECT_EQ(parse_config(s.at("config")).to_json(), c.to_json());
    EXPECT_EQ(s.at("config").at("tolerances").size(), 7u);
}

TEST(Runner, DeepSubOhmicSweepPeaksAtThree) {
    const fs::path dir = scratch("sweep");
    io::ArtifactWriter w(dir);
    const ExperimentConfig c = parse_config_text(R"({"experiment": "dd-sweep",
        "bath": {"s": 0.07142857142857142}, "grids": {"dt_grid": {"start": 1, "stop": 6, "step": 0.5}}})");
    const io::json s = run_experiment(c, w, 2);
    EXPECT_EQ(s.at("argmax_dt").get<double>(), 3.0);
    std::istringstream in(io::read_file(dir / "dd_sweep.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "dt,cycles,t_dd,lower_bound");
    double best = -1.0, at = 0.0;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string dt, cycles, t_dd;
        std::getline(row, dt, ',');
        std::getline(row, cycles, ',');
        std::getline(row, t_dd, ',');
        if (std::stod(t_dd) > best) best = std::stod(t_dd), at = std::stod(dt);
    }
    EXPECT_EQ(at, 3.0);
}

TEST(Runner, ThreadCountDoesNotChangeOutput) {
    const ExperimentConfig c = parse_config_text(R"({"experiment": "dd-sweep",
        "bath": {"s": 0.125}, "grids": {"dt_grid": [0.5, 1, 2, 4]}})");
    const fs::path a = scratch("threads1"), b = scratch("threads3");
    io::ArtifactWriter wa(a), wb(b);
    run_experiment(c, wa, 1);
    run_experiment(c, wb, 3);
    EXPECT_EQ(directory_contents(a), directory_contents(b));
}

TEST(Runner, EveryExperimentKindWritesListedFiles) {
    const std::map<std::string, std::string> docs{
        {"ramsey", R"({"experiment": "ramsey", "schedule": {"t_end": 30}})"},
        {"echo", R"({"experiment": "echo", "bath": {"s": 0.5}, "schedule": {"dt": 3, "dt2": 5}})"},
        {"echo-map", R"({"experiment": "echo-map", "bath": {"s": 0.25}, "grids": {"dt_grid": {"start": 1, "stop": 5, "step": 1}}})"},
        {"dd", R"({"experiment": "dd", "schedule": {"dt": 2, "n": 4}})"},
        {"dd-sweep", R"({"experiment": "dd-sweep", "grids": {"dt_grid": [1, 2]}})"},
        {"spectrum", R"({"experiment": "spectrum", "initial_state": "correlated", "schedule": {"t_end": 100},
                         "grids": {"omega_grid": {"start": 0.5, "stop": 1.5, "step": 0.01}}})"},
        {"fit", R"({"experiment": "fit", "bath": {"s": 0.25}, "schedule": {"t_end": 60}, "fit": {"models": ["Gaussian", "SingleExp"]}})"}};
    for (const auto& [kind, text] : docs) {
        const fs::path dir = scratch("kind_" + kind);
        io::ArtifactWriter w(dir);
        const io::json s = run_experiment(parse_config_text(text), w);
        w.finish({{"command", "run"}});
        EXPECT_EQ(s.at("experiment"), kind);
        expect_manifest_complete(dir);
        EXPECT_GE(w.file_count(), 2u) << kind;
    }
}

TEST(Runner, NumbersUseTwelveSignificantDigits) {
    EXPECT_EQ(io::format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(io::format_number(62.5), "62.5");
    EXPECT_EQ(io::format_number(-2.0e-20), "-2e-20");
    io::Table t{{"a", "b"}, {}};
    t.add({1.0, 2.0 / 3.0});
    EXPECT_EQ(t.str(), "a,b\n1,0.666666666667\n");
}

// ---- manifest and determinism ----

TEST(Manifest, ListsEveryFileWithChecksum) {
    const fs::path dir = scratch("manifest");
    io::ArtifactWriter w(dir);
    run_experiment(parse_config_text(R"({"experiment": "dd", "schedule": {"dt": 1, "n": 3}})"), w);
    w.finish();
    expect_manifest_complete(dir);
    const io::json m = io::json::parse(io::read_file(dir / "manifest.json"));
    EXPECT_EQ(m.at("files").size(), 3u);
    EXPECT_TRUE(m.contains("created"));
}

TEST(Manifest, RecipeRerunIsByteIdentical) {
    const fs::path a = scratch("recipe_a"), b = scratch("recipe_b");
    io::ArtifactWriter wa(a), wb(b);
    run_recipe("fig3d", wa, 1);
    wa.finish(detail::recipe_meta("fig3d"));
    run_recipe("fig3d", wb, 2);
    wb.finish(detail::recipe_meta("fig3d"));
    auto ca = directory_contents(a), cb = directory_contents(b);
    ca.erase("manifest.json");
    cb.erase("manifest.json");
    EXPECT_EQ(ca, cb);
    EXPECT_EQ(manifest_without_timestamp(a), manifest_without_timestamp(b));
    expect_manifest_complete(a);
    const io::json j = io::json::parse(io::read_file(a / "fig3d_summary.json"));
    ASSERT_EQ(j.at("dd").size(), 5u);
    EXPECT_EQ(j.at("dd")[4].at("argmax_dt_above_1").get<double>(), 3.0);
}

TEST(Manifest, UnknownRecipeRejected) {
    io::ArtifactWriter w(scratch("unknown_recipe"));
    EXPECT_THROW(run_recipe("fig4", w), ValidationError);
}

TEST(Labels, ExponentLabels) {
    EXPECT_EQ(exponent_label(1.0), "s1");
    EXPECT_EQ(exponent_label(0.5), "s1_2");
    EXPECT_EQ(exponent_label(1.0 / 14.0), "s1_14");
    EXPECT_EQ(exponent_label(0.3), "s0.3");
}

// ---- binary ----

TEST(Binary, ValidatePrintsResolvedConfig) {
    const fs::path dir = scratch("bin_validate");
    const auto cfg = write_config(dir, "c.json", kDecoupled);
    const Outcome r = cli("validate '" + cfg.string() + "' --tol-override echo_step=0.2");
    ASSERT_EQ(r.status, 0) << r.err;
    const io::json j = io::json::parse(r.out);
    EXPECT_EQ(j.at("tolerances").at("echo_step").get<double>(), 0.2);
    EXPECT_EQ(j.at("bath").at("kappa").get<double>(), 0.0);
}

TEST(Binary, InvalidConfigExitsWithTwoAndPath) {
    const fs::path dir = scratch("bin_invalid");
    const auto cfg = write_config(dir, "bad.json", R"({"experiment": "ramsey", "schedule": {"dtt": 1}})");
    for (const std::string sub : {"validate", "run"}) {
        const std::string out = sub == "run" ? " --out '" + (dir / "o").string() + "'" : "";
        const Outcome r = cli(sub + " '" + cfg.string() + "'" + out);
        EXPECT_EQ(r.status, 2) << sub;
        EXPECT_NE(r.err.find("/schedule/dtt"), std::string::npos) << r.err;
    }
    EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(Binary, RunWritesManifestIntoOutDirectory) {
    const fs::path dir = scratch("bin_run");
    const auto cfg = write_config(dir, "c.json", kDecoupled);
    const Outcome r = cli("run '" + cfg.string() + "' --out '" + (dir / "o").string() + "' --threads 2");
    ASSERT_EQ(r.status, 0) << r.err;
    expect_manifest_complete(dir / "o");
    const io::json m = io::json::parse(io::read_file(dir / "o" / "manifest.json"));
    EXPECT_EQ(m.at("meta").at("command"), "run");
    EXPECT_EQ(m.at("meta").at("config"), parse_config_text(kDecoupled).to_json());
}

TEST(Binary, OutputRootFromEnvironment) {
    const fs::path dir = scratch("bin_env");
    const auto cfg = write_config(dir, "c.json", R"({"experiment": "ramsey", "bath": {"kappa": 0}, "schedule": {"t_end": 2}})");
    const Outcome r = cli("run '" + cfg.string() + "'", "DEPHASING_OUT='" + (dir / "root").string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "root" / "ramsey" / "manifest.json"));
}

TEST(Binary, ConfigOutputEntryUsedWithoutFlag) {
    const fs::path dir = scratch("bin_cfg_out");
    const fs::path target = dir / "from_config";
    const auto cfg = write_config(dir, "c.json",
        R"({"experiment": "ramsey", "bath": {"kappa": 0}, "schedule": {"t_end": 2}, "output": ")" + target.string() + "\"}");
    ASSERT_EQ(cli("run '" + cfg.string() + "'").status, 0);
    EXPECT_TRUE(fs::exists(target / "trace.csv"));
}

TEST(Binary, UsageErrorsAreRejected) {
    EXPECT_NE(cli("").status, 0);
    EXPECT_NE(cli("recipe fig9").status, 0);
    EXPECT_NE(cli("run /nonexistent/config.json").status, 0);
    EXPECT_EQ(cli("recipe fig3d --tol-override echo_step=1 --out /tmp/dephasing_cli_test_never").status, 2);
}

TEST(Binary, TableRecipeReportsBothConstantsForEveryExponent) {
    const fs::path dir = scratch("bin_table1");
    const Outcome r = cli("recipe table1 --out '" + dir.string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    expect_manifest_complete(dir);
    const io::json j = io::json::parse(io::read_file(dir / "table1.json"));
    ASSERT_EQ(j.at("rows").size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(j.at("rows")[i].at("s").get<double>(), io::round12(kReferenceExponents[i]));
        EXPECT_GT(j.at("rows")[i].at("T_R").get<double>(), 0.0);
        EXPECT_GT(j.at("rows")[i].at("T_E").get<double>(), 0.0);
    }
    const io::json m = io::json::parse(io::read_file(dir / "manifest.json"));
    EXPECT_EQ(m.at("meta").at("recipe"), "table1");
    EXPECT_EQ(m.at("meta").at("bath").at("omega_ir").get<double>(), kRecipeInfraredFloor);
}
