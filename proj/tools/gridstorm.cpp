#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gridstorm/pipeline/commands.hpp"

int main(int argc, char** argv) {
    using namespace gridstorm;
    CommandOptions o;
    for (int i = 0; i < argc; ++i) o.argv.emplace_back(argv[i]);

    CLI::App app{"Simulate AGC grids under load-alteration and false-data attacks, train LAA agents and "
                 "synthesize stealthy combined attacks."};
    app.require_subcommand(1);

    std::string config, attack, laa, train_cfg, falsify_cfg, out, basis;
    std::size_t horizon = 0;
    bool have_horizon = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "Grid configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Master seed");
        sub->add_option_function<std::size_t>(
            "--horizon", [&](const std::size_t& h) { horizon = h, have_horizon = true; }, "Simulated steps");
        sub->add_option("--out", out, "Output directory");
        sub->add_option("--signal-basis", basis, "Frequency used by the success predicate")
            ->check(CLI::IsMember({"measured", "true"}));
    };

    CLI::App* sim = app.add_subcommand("simulate", "Run the closed loop, optionally under an attack");
    common(sim);
    sim->add_option("--attack", attack, "Attack vector file")->check(CLI::ExistingFile);
    sim->add_flag("--noise", o.noise, "Add process and measurement noise");

    CLI::App* train = app.add_subcommand("train-laa", "Train a DDPG load-alteration agent");
    common(train);
    train->add_option("--train-config", train_cfg, "Training configuration (JSON)")->check(CLI::ExistingFile);
    train->add_flag("--assert-improving", o.assert_improving, "Exit 1 if the reward trend does not improve");

    CLI::App* fal = app.add_subcommand("falsify", "Search false data that completes an LAA schedule");
    common(fal);
    fal->add_option("--laa", laa, "Breaker schedule file")->required();
    fal->add_option("--falsify-config", falsify_cfg, "Falsification configuration (JSON)")
        ->check(CLI::ExistingFile);

    CLI::App* val = app.add_subcommand("validate", "Re-simulate an attack and report the success predicate");
    common(val);
    val->add_option("--attack", attack, "Attack vector file")->required();
    val->add_option("--falsify-config", falsify_cfg, "Falsification configuration (noise_seeds)")
        ->check(CLI::ExistingFile);

    CLI::App* cmp = app.add_subcommand("compare", "Overlay LAA-only, FDIA-only and combined runs");
    common(cmp);
    cmp->add_option("--attack", attack, "Combined attack vector file")->check(CLI::ExistingFile);
    cmp->add_option("--laa", laa, "Breaker schedule file (LAA-only without --attack)")->check(CLI::ExistingFile);
    cmp->add_flag("--laa-only", o.laa_only, "Breaker schedule alone");
    cmp->add_flag("--fdia-only", o.fdia_only, "False data alone");
    cmp->add_flag("--combined", o.combined, "Breaker schedule and false data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInputError;
    }

    o.command = app.get_subcommands().front()->get_name();
    o.config = config;
    if (!attack.empty()) o.attack = attack;
    if (!laa.empty()) o.laa = laa;
    if (!train_cfg.empty()) o.train_config = train_cfg;
    if (!falsify_cfg.empty()) o.falsify_config = falsify_cfg;
    if (!out.empty()) o.out = out;
    if (have_horizon) o.horizon = horizon;
    if (!basis.empty()) o.basis = parse_signal_basis(basis);
    return run_command(o, std::cout, std::cerr);
}
