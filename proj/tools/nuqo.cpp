// nuqo: spectra, rocking curves, level schemes and photon correlations of
// 57Fe layers in grazing-incidence x-ray cavities.

#include <iostream>

#include <CLI11.hpp>

#include "nuqo/spectra_cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nuclear resonance spectra in x-ray thin-film cavities"};
    app.require_subcommand(1);

    nuqo::CliOptions opts;
    std::size_t points = 0;
    double from = 0.0, to = 0.0;
    std::string engine, preset, out, scenario;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "scenario JSON file");
        sub->add_option("--preset", preset, "built-in scenario (paper-figure3, paper-figure4a..d)");
        sub->add_option("--out", out, "output file (default: stdout)");
        sub->add_flag("--svg", opts.svg, "also write <out>.svg");
        sub->add_option("--points", points, "scan points")->check(CLI::PositiveNumber);
        sub->add_option("--from", from, "scan start (gamma, or mrad for angle scans)");
        sub->add_option("--to", to, "scan end");
        sub->add_flag("--couple-cavity-detuning", opts.couple_cavity_detuning,
                      "recompute Delta_C from the mode dispersion at every probe detuning");
        sub->add_option("--engine", engine, "linear | quantum")->check(CLI::IsMember({"linear", "quantum"}));
    };
    for (const char* verb : {"run", "rocking", "levelscheme", "g2", "validate"}) {
        const char* help = "";
        if (std::string(verb) == "run") help = "scan the reflectance and write a spectrum CSV";
        if (std::string(verb) == "rocking") help = "rocking curve |R(phi)|^2 at fixed detuning";
        if (std::string(verb) == "levelscheme") help = "export energies, drives and couplings of the effective levels";
        if (std::string(verb) == "g2") help = "second-order correlation of the reflected field (quantum engine)";
        if (std::string(verb) == "validate") help = "run all parameter validators";
        add_common(app.add_subcommand(verb, help));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return nuqo::kExitInput;
    }

    auto* sub = app.get_subcommands().front();
    opts.verb = sub->get_name();
    if (sub->count("scenario")) opts.scenario_path = scenario;
    if (sub->count("--preset")) opts.preset = preset;
    if (sub->count("--out")) opts.out = out;
    if (sub->count("--points")) opts.points = points;
    if (sub->count("--from")) opts.from = from;
    if (sub->count("--to")) opts.to = to;
    if (sub->count("--engine")) opts.engine = engine;
    return nuqo::run_command(opts, std::cout, std::cerr);
}
