// jetflow command line: axially symmetric compressible subsonic jet solver.
//
//   jetflow upstream --config run.cfg
//   jetflow solve    --config run.cfg [--out DIR] [--threads N] [--level K]
//   jetflow sweep    --config run.cfg --lambda L1 --lambda L2 ...
//   jetflow export   --out DIR
//
// JETFLOW_OUT overrides the output directory.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "jetflow/pipeline.hpp"

namespace {

jetflow::RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    return jetflow::parse_config(in);
}

void apply_overrides(jetflow::RunConfig& cfg, const std::string& out_dir, int threads) {
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (const char* env = std::getenv("JETFLOW_OUT"); env && *env) cfg.out_dir = env;
    if (threads > 0) cfg.threads = threads;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"axisymmetric compressible subsonic jet solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads = 0, level_cap = 0;
    std::vector<double> lambdas;

    auto* up = app.add_subcommand("upstream", "solve the incoming state and closures");
    up->add_option("--config", config_path, "run configuration file")->required();

    auto* solve = app.add_subcommand("solve", "full jet solve with continuation");
    solve->add_option("--config", config_path, "run configuration file")->required();
    solve->add_option("--out", out_dir, "output directory override");
    solve->add_option("--threads", threads, "solver thread count override");
    solve->add_option("--level", level_cap, "cap the number of continuation levels");

    auto* sweep = app.add_subcommand("sweep", "Lambda sweep on the first truncation level");
    sweep->add_option("--config", config_path, "run configuration file")->required();
    sweep->add_option("--lambda", lambdas, "Lambda values (repeatable)")->required();
    sweep->add_option("--out", out_dir, "output directory override");
    sweep->add_option("--threads", threads, "solver thread count override");

    auto* exp = app.add_subcommand("export", "rebuild plot data from an output directory");
    exp->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (up->parsed()) {
            auto cfg = load_config(config_path);
            apply_overrides(cfg, out_dir, threads);
            return jetflow::cmd_upstream(cfg, std::cout, std::cerr);
        }
        if (solve->parsed()) {
            auto cfg = load_config(config_path);
            apply_overrides(cfg, out_dir, threads);
            return jetflow::cmd_solve(cfg, std::cout, std::cerr, level_cap);
        }
        if (sweep->parsed()) {
            auto cfg = load_config(config_path);
            apply_overrides(cfg, out_dir, threads);
            return jetflow::cmd_sweep(cfg, lambdas, std::cout, std::cerr);
        }
        if (exp->parsed()) {
            std::string dir = out_dir;
            if (const char* env = std::getenv("JETFLOW_OUT"); env && *env) dir = env;
            return jetflow::cmd_export(dir, std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "jetflow: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
