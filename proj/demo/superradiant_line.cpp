// Unmagnetized 57Fe layer at the first guided mode: prints the collective
// shift and width, then |R|^2 around the nuclear line as CSV.

#include <cstdio>
#include <iostream>

#include "nuqo/output.hpp"
#include "nuqo/scenario.hpp"

int main() {
    const auto s = nuqo::builtin_preset("paper-figure3");
    const auto cp = nuqo::collective_parameters(s.cavity, s.coupling, s.cavity_detuning);
    std::printf("# Delta_LS = %.4f gamma, gamma_S = %.4f gamma, FWHM = %.4f gamma\n", cp.lamb_shift,
                cp.superradiance, 1.0 + cp.superradiance);

    const auto grid = nuqo::linspace(-100.0, 100.0, 201);
    const auto sp = nuqo::scan_detuning(nuqo::system_builder(s), grid, nuqo::detuning_model(s, false));
    nuqo::write_spectrum_csv(std::cout, nuqo::scenario_hash(s), sp);
}
