// Copyright (C) 2026 The spotflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spotflow/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spotflow: selective region denoising for rectified-flow transformers"};
    app.require_subcommand(1);

    std::string scenario, out, param;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> values;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "scenario JSON file")->required();
        sub->add_option("--out", out, "output directory")->required();
        sub->add_option("--seed-override", seed, "replace the scenario's top-level seed");
    };
    CLI::App* run = app.add_subcommand("run", "run the selective pipeline on a scenario");
    add_common(run);
    CLI::App* compare = app.add_subcommand("compare", "run baseline and selective pipeline and compare them");
    add_common(compare);
    CLI::App* sweep = app.add_subcommand("sweep", "compare runs over a list of parameter values");
    add_common(sweep);
    sweep->add_option("--param", param, "tau, reset_interval or kinit")->required();
    sweep->add_option("--values", values, "comma separated values")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? spotflow::kExitOk : spotflow::kExitConfig;
    }

    if (run->parsed()) return spotflow::cmd_run(scenario, out, seed, std::cerr);
    if (compare->parsed()) return spotflow::cmd_compare(scenario, out, seed, std::cerr);
    return spotflow::cmd_sweep(scenario, param, values, out, seed, std::cerr);
}
