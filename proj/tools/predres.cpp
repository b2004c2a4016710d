// SPDX-License-Identifier: Apache-2.0
//
// predres run --config path.json [--set key=value]...
// predres list-experiments
#include "predres/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv)
{
    CLI::App app{"Predictive resampling experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    std::string config_path;
    std::vector<std::string> overrides;
    run->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    run->add_option("--set", overrides, "Override as key=value (repeatable)");

    auto* list = app.add_subcommand("list-experiments", "List experiments and their parameters");

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) {
        for (const predres::ExperimentInfo& info : predres::list_experiments()) {
            std::cout << info.name << "\n  " << info.description << '\n';
            for (const auto& [key, value] : info.parameters) {
                std::cout << "    " << key << " = " << (value.empty() ? "\"\"" : value) << '\n';
            }
        }
        return 0;
    }

    try {
        std::ifstream in(config_path);
        std::stringstream text;
        text << in.rdbuf();
        predres::ExperimentConfig config = predres::parse_experiment_config(text.str());
        for (const std::string& assignment : overrides) {
            predres::apply_override(config, assignment);
        }
        const predres::RunReport report = predres::run_experiment(config);
        std::cout << "wrote " << report.files.size() << " files to " << report.output_dir << '\n';
        for (const std::string& file : report.files) {
            std::cout << "  " << file << '\n';
        }
    } catch (const std::exception& error) {
        std::cerr << "predres: " << error.what() << '\n';
        return 1;
    }
    return 0;
}
