// regimekit: batch regime-analysis pipeline over dated closing-price CSVs.
//
// Subcommands run one pipeline stage each; `run` executes everything in
// order. Stage outputs land under <output>/<stage>/ and downstream stages
// read the upstream files, so stages can be rerun individually.

#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regimekit/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"regime analysis toolkit (BDS, HHT regimes, HHSA profiles, VLMC metrics)"};
    app.require_subcommand(1);

    std::string config_path = "regimekit.ini";
    std::string out_override;
    std::vector<std::string> ticker_filter;
    app.add_option("--config", config_path, "pipeline config file")->capture_default_str();
    app.add_option("--out", out_override, "output directory (overrides config and environment)");
    app.add_option("--tickers", ticker_filter,
                   "restrict the run to these tickers (comma separated)")
        ->delimiter(',');

    std::vector<std::string> stage_filter;
    CLI::App* cmd_run = app.add_subcommand("run", "run all stages");
    cmd_run->add_option("--stage", stage_filter, "subset of stages to run")->delimiter(',');

    std::set<regimekit::Stage> stages;
    for (regimekit::Stage st :
         {regimekit::Stage::Ingest, regimekit::Stage::Bds, regimekit::Stage::Regimes,
          regimekit::Stage::Sensitivity, regimekit::Stage::Hhsa, regimekit::Stage::Vlmc,
          regimekit::Stage::Metrics, regimekit::Stage::Report}) {
        app.add_subcommand(regimekit::to_string(st),
                           std::string("run the ") + regimekit::to_string(st) + " stage")
            ->callback([&stages, st] { stages.insert(st); });
    }

    CLI11_PARSE(app, argc, argv);

    regimekit::PipelineConfig cfg = regimekit::load_config(config_path);
    if (!ticker_filter.empty()) cfg.filter_tickers(ticker_filter);
    if (const char* env = std::getenv("REGIMEKIT_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    if (!out_override.empty()) cfg.output_dir = out_override;
    cfg.validate();

    if (cmd_run->parsed()) {
        if (stage_filter.empty()) {
            stages = regimekit::all_stages();
        } else {
            for (const auto& name : stage_filter)
                stages.insert(regimekit::stage_from_string(name));
        }
    }

    regimekit::RunManifest manifest = regimekit::run_pipeline(cfg, stages);
    for (const auto& [stage, sec] : manifest.timings)
        std::cout << stage << ": " << sec << "s\n";
    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << manifest.files.size() << " file(s) under " << cfg.output_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const regimekit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const regimekit::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const regimekit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
