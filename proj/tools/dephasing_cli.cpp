// Command-line front end: run <config>, recipe <name>, validate <config>.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dephasing/dephasing.hpp"

namespace fs = std::filesystem;
using namespace dephasing;

namespace {

// --out wins, then the config's own output entry, then $DEPHASING_OUT/<name>, then ./out/<name>.
fs::path output_dir(const std::string& flag, const std::string& from_config, const std::string& name) {
    if (!flag.empty()) return flag;
    if (!from_config.empty()) return from_config;
    const char* root = std::getenv("DEPHASING_OUT");
    return fs::path(root && *root ? root : "out") / name;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pure-dephasing qubit simulator: Ramsey, Hahn echo and CPMG under a spin-boson bath"};
    app.require_subcommand(1);

    std::string out_flag;
    int threads = 1;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out_flag, "output directory");
        sub->add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
        sub->add_option("--tol-override", overrides, "override a tolerance, key=value (repeatable)");
    };

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    add_common(run);

    std::string recipe;
    auto* rec = app.add_subcommand("recipe", "regenerate a reference result: table1, fig1, fig2, fig3d");
    rec->add_option("name", recipe, "recipe name")->required()->check(CLI::IsMember(recipe_names()));
    add_common(rec);

    auto* val = app.add_subcommand("validate", "check a config and print it with defaults filled in");
    val->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    val->add_option("--tol-override", overrides, "override a tolerance, key=value (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (val->parsed()) {
            const ExperimentConfig c = parse_config_text(io::read_file(config_path), overrides);
            std::cout << c.to_json().dump(2) << "\n";
            return 0;
        }
        if (run->parsed()) {
            const ExperimentConfig c = parse_config_text(io::read_file(config_path), overrides);
            io::ArtifactWriter w(output_dir(out_flag, c.output, c.experiment));
            run_experiment(c, w, threads);
            w.finish({{"command", "run"}, {"config", c.to_json()}});
            std::cout << "wrote " << w.file_count() << " files to " << w.dir().string() << "\n";
            return 0;
        }
        if (rec->parsed()) {
            if (!overrides.empty()) throw ValidationError("recipe: --tol-override is not accepted by recipes");
            io::ArtifactWriter w(output_dir(out_flag, "", recipe));
            run_recipe(recipe, w, threads);
            io::json meta = detail::recipe_meta(recipe);
            meta["command"] = "recipe";
            w.finish(meta);
            std::cout << "wrote " << w.file_count() << " files to " << w.dir().string() << "\n";
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
