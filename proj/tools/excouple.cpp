// excouple: command-line front end for the coupling experiments.
//
//   excouple couple          simulate coupled runs, emit runs.jsonl / tail.csv
//   excouple tv              exact TV curve, coupling bound and decay fit
//   excouple solve           G_p / G_s membership verdict and A - A closure
//   excouple demo-freegroup  possible-vs-successful separation on F2
//
// Options may also come from a flat "key = value" file given by --config;
// command-line flags override file values.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "excouple/experiments.hpp"

int main(int argc, char** argv) {
    using namespace excouple;

    CLI::App app{"Exact couplings of random walks on discrete groups"};
    app.set_config("--config", "", "flat key = value configuration file");
    app.require_subcommand(1);
    app.fallthrough();

    ExperimentConfig cfg;
    std::uint64_t seed = 0;
    std::uint64_t horizon = 0;
    bool no_timestamp = false;
    std::string nu = "single";
    std::string mass = "auto";

    app.add_option("--group", cfg.group, "Z, Z^d, C<m>, F<r>, or a product such as \"Z x C3\"")->capture_default_str();
    app.add_option("--measure", cfg.measure, "step distribution, e.g. \"0:1/2; 1:1/2\" or \"a;A;b;B\"");
    app.add_option("--x", cfg.x, "starting shift of the second walk")->capture_default_str();
    app.add_option("--n-max", cfg.n_max, "largest convolution power examined")->capture_default_str();
    auto* horizon_opt = app.add_option("--horizon", horizon, "simulation horizon in steps");
    app.add_option("--runs", cfg.runs, "Monte Carlo runs")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "master seed (required for simulations)");
    app.add_option("--out", cfg.out, "output directory")->capture_default_str();
    app.add_option("--threads", cfg.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--nu-strategy", nu, "single | greedy")
        ->capture_default_str()
        ->check(CLI::IsMember({"single", "greedy"}));
    app.add_option("--fit-lo", cfg.fit_lo, "first n of the decay fit")->capture_default_str();
    app.add_option("--fit-hi", cfg.fit_hi, "last n of the decay fit (0: n-max)")->capture_default_str();
    app.add_option("--tail-rows", cfg.tail_rows, "largest n in tail.csv")->capture_default_str();
    app.add_option("--closure-radius", cfg.closure_radius, "emit the A - A closure to this radius (0: off)")
        ->capture_default_str();
    app.add_option("--mass", mass, "auto | exact | double")
        ->capture_default_str()
        ->check(CLI::IsMember({"auto", "exact", "double"}));
    app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp line from CSV output");

    std::map<std::string, CommandResult (*)(const ExperimentConfig&)> commands{
        {"couple", &cmd_couple}, {"tv", &cmd_tv}, {"solve", &cmd_solve}, {"demo-freegroup", &cmd_demo_freegroup}};
    app.add_subcommand("couple", "simulate the block coupling and its coupling-time tail");
    app.add_subcommand("tv", "exact total-variation curve, coupling bound and decay fit");
    app.add_subcommand("solve", "membership verdicts for G_p and G_s");
    app.add_subcommand("demo-freegroup", "possible vs successful coupling on F2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and friends exit 0; any other parse problem is a bad configuration.
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (*seed_opt) cfg.seed = seed;
    if (*horizon_opt) cfg.horizon = horizon;
    cfg.timestamp = !no_timestamp;
    cfg.nu_strategy = nu == "greedy" ? NuStrategy::GreedyMaxMass : NuStrategy::SingleAtom;
    cfg.mass = mass == "exact" ? MassMode::Exact : mass == "double" ? MassMode::Double : MassMode::Auto;

    const std::string name = app.get_subcommands().front()->get_name();
    const CommandResult result = run_command(commands.at(name), cfg);
    if (result.exit_code != 0) {
        std::cerr << "excouple " << name << ": " << result.message << '\n';
        return result.exit_code;
    }
    if (!result.message.empty()) std::cout << result.message << '\n';
    for (const auto& f : result.files) std::cout << f.string() << '\n';
    return 0;
}
