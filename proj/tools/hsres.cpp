// Command-line driver for the resonance pipeline.

#include "hsres/error.hpp"
#include "hsres/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

using namespace hsres;

int main(int argc, char** argv)
{
    CLI::App app{"Resonances of three-body Coulomb systems in the adiabatic hyperspherical approach"};
    app.require_subcommand(1);

    std::string config_path, system, out, model, stage;
    std::optional<int> resonance;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--system", system, "system when no config is given: ahs, toy or free");
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_option("--model", model, "fit model: general or diagonal")
            ->check(CLI::IsMember({"general", "diagonal"}));
        sub->add_option("--resonance", resonance, "plateau index v, counted upward in energy")
            ->check(CLI::NonNegativeNumber);
    };
    std::vector<std::pair<CLI::App*, Stage>> stages;
    for (Stage s : {Stage::Terms, Stage::Couplings, Stage::Scan, Stage::Sample, Stage::Fit, Stage::Xsec}) {
        CLI::App* sub = app.add_subcommand(to_string(s), std::string("run the ") + to_string(s) + " stage");
        common(sub);
        stages.emplace_back(sub, s);
    }
    CLI::App* pipeline = app.add_subcommand("pipeline", "run all stages in order, reusing valid caches");
    common(pipeline);
    pipeline->add_option("--stage", stage, "last stage to run (default xsec)");

    CLI11_PARSE(app, argc, argv);

    try {
        require(config_path.empty() || system.empty(), ErrorKind::Validation,
                "--system and --config are exclusive; set \"system\" in the config");
        RunConfig config = !config_path.empty() ? RunConfig::load(config_path)
                                                : RunConfig::defaults(parse_system(system.empty() ? "ahs" : system));
        if (!out.empty())
            config.out = out;
        if (!model.empty())
            config.model = parse_fit_model(model);
        if (resonance)
            config.scan.resonance = *resonance;
        Pipeline p(config);

        std::vector<StageOutcome> outcomes;
        if (pipeline->parsed()) {
            outcomes = p.run_through(stage.empty() ? Stage::Xsec : parse_stage(stage));
        } else {
            for (const auto& [sub, s] : stages)
                if (sub->parsed())
                    outcomes.push_back(p.run(s));
        }
        for (const auto& o : outcomes)
            std::cout << o.summary << (o.reused ? " (cached)" : "") << '\n';
    } catch (const Error& e) {
        std::cerr << "hsres: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "hsres: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
