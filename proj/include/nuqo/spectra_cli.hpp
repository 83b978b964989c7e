#pragma once

// Command implementations behind the nuqo executable: run, rocking,
// levelscheme, g2, validate. Each returns the process exit code.

#include <atomic>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nuqo/errors.hpp"
#include "nuqo/linear_response.hpp"
#include "nuqo/master_equation.hpp"
#include "nuqo/output.hpp"
#include "nuqo/scenario.hpp"

namespace nuqo {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitSolver = 3, kExitResourceCap = 4 };

struct CliOptions {
    std::string verb;
    std::optional<std::string> scenario_path;
    std::optional<std::string> preset;
    std::optional<std::string> out;
    bool svg = false;
    std::optional<std::size_t> points;
    std::optional<double> from;
    std::optional<double> to;
    bool couple_cavity_detuning = false;
    std::optional<std::string> engine;
};

inline const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const InvalidScenario*>(&e)) return "InvalidScenario";
    if (dynamic_cast<const EnergyConservationViolation*>(&e)) return "EnergyConservationViolation";
    if (dynamic_cast<const InvalidParameters*>(&e)) return "InvalidParameters";
    if (dynamic_cast<const InvalidGeometry*>(&e)) return "InvalidGeometry";
    if (dynamic_cast<const InvalidEnsemble*>(&e)) return "InvalidEnsemble";
    if (dynamic_cast<const CorruptedTable*>(&e)) return "CorruptedTable";
    if (dynamic_cast<const NotApplicable*>(&e)) return "NotApplicable";
    if (dynamic_cast<const DegenerateSpectrum*>(&e)) return "DegenerateSpectrum";
    if (dynamic_cast<const ResourceCapExceeded*>(&e)) return "ResourceCapExceeded";
    if (dynamic_cast<const AmbiguousSteadyState*>(&e)) return "AmbiguousSteadyState";
    if (dynamic_cast<const IntegratorError*>(&e)) return "IntegratorError";
    if (dynamic_cast<const UndefinedObservable*>(&e)) return "UndefinedObservable";
    return "Error";
}

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ResourceCapExceeded*>(&e)) return kExitResourceCap;
    if (dynamic_cast<const DegenerateSpectrum*>(&e) || dynamic_cast<const AmbiguousSteadyState*>(&e) ||
        dynamic_cast<const IntegratorError*>(&e))
        return kExitSolver;
    return kExitInput;
}

// Work items are independent; results land in fixed slots so output order
// never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) f(i);
        });
}

// ---------------------------------------------------------------------------
// Scans

inline std::vector<double> scan_grid(const ScanSpec& spec) {
    auto g = linspace(spec.from, spec.to, spec.points);
    require_monotone(g);
    return g;
}

inline cplx quantum_point(const Scenario& s, double probe, double cavity_detuning) {
    QuantumConfig c = quantum_config(s);
    c.probe_detuning = probe;
    c.cavity_detuning = cavity_detuning;
    return quantum_reflectance(c);
}

// Quantum scans record ambiguous steady states per point, like the linear
// engine does for degenerate coherence systems.
inline Spectrum quantum_scan(std::span<const double> grid, const std::function<cplx(double)>& eval) {
    Spectrum sp;
    sp.abscissa.assign(grid.begin(), grid.end());
    sp.amplitude.resize(grid.size());
    sp.intensity.resize(grid.size());
    std::vector<std::optional<std::string>> errors(grid.size());
    std::vector<std::exception_ptr> fatal(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        try {
            sp.amplitude[i] = eval(grid[i]);
            sp.intensity[i] = std::norm(sp.amplitude[i]);
        } catch (const AmbiguousSteadyState& e) {
            errors[i] = e.what();
        } catch (const IntegratorError& e) {
            errors[i] = e.what();
        } catch (...) {
            fatal[i] = std::current_exception();
        }
    });
    for (auto& f : fatal)
        if (f) std::rethrow_exception(f);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (errors[i]) {
            sp.amplitude[i] = {nan, nan};
            sp.intensity[i] = nan;
            sp.failures.push_back({i, grid[i], *errors[i]});
        }
    return sp;
}

/// Detuning scan (abscissa in gamma) or angle scan (abscissa in mrad).
inline Spectrum compute_scan(const Scenario& s, const ScanSpec& spec, Engine engine) {
    const auto grid = scan_grid(spec);
    if (spec.axis == ScanAxis::detuning) {
        const auto model = detuning_model(s, spec.couple_cavity_detuning);
        if (engine == Engine::linear) return scan_detuning(system_builder(s), grid, model);
        quantum_config(s);  // surfaces missing options before any work starts
        auto sp = quantum_scan(grid, [&](double d) { return quantum_point(s, d, model.at(d)); });
        sp.cavity_detuning_coupled = model.coupled;
        return sp;
    }
    std::vector<double> rad(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) rad[i] = grid[i] * kMilliradian;
    Spectrum sp;
    if (engine == Engine::linear) {
        sp = scan_angle(system_builder(s), rad, spec.probe_detuning, s.cavity);
    } else {
        quantum_config(s);
        sp = quantum_scan(rad, [&](double phi) {
            return quantum_point(s, spec.probe_detuning,
                                 cavity_detuning_linear(phi - s.cavity.resonance_angle, s.cavity.detuning_slope));
        });
    }
    sp.abscissa = grid;
    for (auto& f : sp.failures) f.abscissa /= kMilliradian;
    return sp;
}

struct RockingMinimum {
    double angle_mrad;
    double intensity;
};

/// Grid minimum of |R(phi)|^2 refined by golden-section search between the
/// neighbouring grid points.
inline RockingMinimum rocking_minimum(const Scenario& s, const ScanSpec& spec, const Spectrum& sp, Engine engine) {
    std::size_t best = sp.intensity.size();
    for (std::size_t i = 0; i < sp.intensity.size(); ++i)
        if (std::isfinite(sp.intensity[i]) && (best == sp.intensity.size() || sp.intensity[i] < sp.intensity[best]))
            best = i;
    if (best == sp.intensity.size()) throw DegenerateSpectrum(spec.probe_detuning, "rocking curve has no valid points");
    if (sp.abscissa.size() < 3 || best == 0 || best + 1 == sp.abscissa.size())
        return {sp.abscissa[best], sp.intensity[best]};
    const auto build = system_builder(s);
    auto f = [&](double mrad) {
        const double dc =
            cavity_detuning_linear(mrad * kMilliradian - s.cavity.resonance_angle, s.cavity.detuning_slope);
        if (engine == Engine::linear) return std::norm(reflectance(build(dc), spec.probe_detuning));
        return std::norm(quantum_point(s, spec.probe_detuning, dc));
    };
    double a = sp.abscissa[best - 1];
    double c = sp.abscissa[best + 1];
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = c - r * (c - a), x2 = a + r * (c - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 100 && c - a > 1e-12 * std::max(1.0, std::abs(c)); ++it) {
        if (f1 < f2) {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - r * (c - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (c - a);
            f2 = f(x2);
        }
    }
    const double x = 0.5 * (a + c);
    return {x, f(x)};
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline Scenario load_for(const CliOptions& o) {
    if (o.preset && o.scenario_path)
        throw InvalidScenario("$", "give either a scenario file or --preset, not both");
    if (o.preset) return builtin_preset(*o.preset);
    if (!o.scenario_path) throw InvalidScenario("$", "no scenario file given (or use --preset <name>)");
    return load_scenario_file(*o.scenario_path);
}

inline Engine engine_for(const CliOptions& o, const Scenario& s) {
    if (!o.engine) return s.engine;
    if (*o.engine == "linear") return Engine::linear;
    if (*o.engine == "quantum") return Engine::quantum;
    throw InvalidScenario("--engine", "expected linear or quantum");
}

inline void apply_overrides(const CliOptions& o, ScanSpec& spec) {
    if (o.points) spec.points = *o.points;
    if (o.from) spec.from = *o.from;
    if (o.to) spec.to = *o.to;
    if (o.couple_cavity_detuning) spec.couple_cavity_detuning = true;
    if (spec.points < 1) throw InvalidScenario("--points", "must be at least 1");
}

template <class Write>
void emit(const CliOptions& o, std::ostream& out, Write&& write) {
    if (!o.out) {
        write(out);
        return;
    }
    std::ofstream f(*o.out, std::ios::binary);
    if (!f) throw InvalidScenario("--out", "cannot open '" + *o.out + "' for writing");
    write(f);
}

inline std::string svg_path(const CliOptions& o) {
    if (!o.out) throw InvalidScenario("--svg", "needs --out to name the plot file");
    const auto& p = *o.out;
    const auto dot = p.find_last_of('.');
    const auto slash = p.find_last_of('/');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? p.substr(0, dot) : p) + ".svg";
}

inline void write_svg(const CliOptions& o, std::span<const double> x, std::span<const double> y, const std::string& xl,
                      const std::string& yl) {
    if (!o.svg) return;
    const auto path = svg_path(o);
    std::ofstream f(path);
    if (!f) throw InvalidScenario("--svg", "cannot open '" + path + "' for writing");
    f << svg_plot(x, y, xl, yl);
}

inline int report_failures(const Spectrum& sp, std::ostream& err, const char* what) {
    if (sp.failures.empty()) return kExitOk;
    for (const auto& f : sp.failures)
        err << "solver degeneracy at " << what << "=" << format_number(f.abscissa) << ": " << f.message << '\n';
    return kExitSolver;
}

inline int cmd_run(const CliOptions& o, std::ostream& out, std::ostream& err) {
    Scenario s = load_for(o);
    const Engine engine = engine_for(o, s);
    apply_overrides(o, s.scan);
    const auto hash = scenario_hash(s);
    const auto sp = compute_scan(s, s.scan, engine);
    const bool angle = s.scan.axis == ScanAxis::angle;
    std::vector<std::string> meta = {
        std::string("command=run engine=") + to_string(engine) + " axis=" + to_string(s.scan.axis) +
        (angle ? " abscissa=angle_mrad probe_detuning=" + format_number(s.scan.probe_detuning)
               : std::string(" abscissa=detuning cavity_detuning_coupled=") +
                     (sp.cavity_detuning_coupled ? "true" : "false"))};
    emit(o, out, [&](std::ostream& os) { write_spectrum_csv(os, hash, sp, meta); });
    write_svg(o, sp.abscissa, sp.intensity, angle ? "angle (mrad)" : "detuning (gamma)", "|R|^2");
    return report_failures(sp, err, angle ? "phi_mrad" : "Delta");
}

inline int cmd_rocking(const CliOptions& o, std::ostream& out, std::ostream& err) {
    Scenario s = load_for(o);
    const Engine engine = engine_for(o, s);
    ScanSpec spec;
    if (s.rocking)
        spec = *s.rocking;
    else if (s.scan.axis == ScanAxis::angle)
        spec = s.scan;
    else
        throw InvalidScenario("rocking", "rocking needs a 'rocking' block or an angle scan");
    apply_overrides(o, spec);
    spec.axis = ScanAxis::angle;
    const auto hash = scenario_hash(s);
    const auto sp = compute_scan(s, spec, engine);
    const int rc = report_failures(sp, err, "phi_mrad");
    std::vector<std::string> meta = {std::string("command=rocking engine=") + to_string(engine) +
                                     " abscissa=angle_mrad probe_detuning=" + format_number(spec.probe_detuning)};
    if (sp.failures.size() < sp.abscissa.size()) {
        const auto m = rocking_minimum(s, spec, sp, engine);
        meta.push_back("minimum_angle_mrad=" + format_number(m.angle_mrad) +
                       " minimum_abs2_R=" + format_number(m.intensity));
    }
    emit(o, out, [&](std::ostream& os) { write_spectrum_csv(os, hash, sp, meta); });
    write_svg(o, sp.abscissa, sp.intensity, "angle (mrad)", "|R|^2");
    return rc;
}

inline int cmd_levelscheme(const CliOptions& o, std::ostream& out, std::ostream&) {
    const Scenario s = load_for(o);
    if (engine_for(o, s) != Engine::linear)
        throw InvalidScenario("engine", "levelscheme needs the linear engine");
    const auto sys = system_builder(s)(s.cavity_detuning);
    const auto doc = levelscheme_to_json(sys, transition_table(s.hyperfine), scenario_hash(s));
    emit(o, out, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
    return kExitOk;
}

inline int cmd_g2(const CliOptions& o, std::ostream& out, std::ostream&) {
    const Scenario s = load_for(o);
    const auto& q = require_quantum(s);
    if (engine_for(o, s) != Engine::quantum)
        throw InvalidScenario("engine", "g2 needs the quantum engine (\"engine\": \"quantum\" or --engine quantum)");
    if (q.tau.empty()) throw InvalidScenario("quantum.tau", "g2 needs a tau grid");
    const auto cfg = quantum_config(s);
    validate(cfg);
    const auto l = build_liouvillian(cfg);
    const auto rho = steady_state(l);
    const auto values = g2(l, rho, q.tau, cfg);
    std::string indicator = "n/a";
    if (hilbert_dimension(cfg.nuclei, cfg.photon_cutoff + 1) <= cfg.dimension_cap)
        indicator = format_number(g2_truncation_indicator(cfg));
    const std::vector<std::string> meta = {
        "command=g2 nuclei=" + std::to_string(cfg.nuclei) + " photon_cutoff=" + std::to_string(cfg.photon_cutoff) +
            " probe_detuning=" + format_number(cfg.probe_detuning),
        "truncation_indicator=" + indicator};
    emit(o, out, [&](std::ostream& os) { write_g2_csv(os, scenario_hash(s), q.tau, values, meta); });
    write_svg(o, q.tau, values, "tau (1/gamma)", "g2");
    return kExitOk;
}

inline int cmd_validate(const CliOptions& o, std::ostream& out, std::ostream&) {
    Scenario s;
    try {
        s = load_for(o);
    } catch (const InvalidScenario& e) {
        for (const auto& i : e.issues()) out << "FAIL schema: " << i.path << ": " << i.message << '\n';
        return kExitInput;
    }
    out << "ok schema (scenario=" << scenario_hash(s) << ")\n";
    bool ok = true;
    auto check = [&](const char* name, const std::function<void()>& fn) {
        try {
            fn();
            out << "ok " << name << '\n';
        } catch (const std::exception& e) {
            ok = false;
            out << "FAIL " << name << ": " << error_kind(e) << ": " << e.what() << '\n';
        }
    };
    check("cavity", [&] { validate(s.cavity); });
    check("geometry", [&] { validate_geometry(s.geometry); });
    check("hyperfine", [&] {
        validate(s.hyperfine);
        branching_check(transition_table(s.hyperfine));
    });
    check("ensemble", [&] { validate(s.coupling); });
    check("scan", [&] { scan_grid(s.scan); });
    if (s.rocking) check("rocking", [&] { scan_grid(*s.rocking); });
    if (s.quantum) check("quantum", [&] { validate(quantum_config(s)); });
    return ok ? kExitOk : kExitInput;
}

}  // namespace detail

inline int run_command(const CliOptions& o, std::ostream& out, std::ostream& err) {
    try {
        if (o.verb == "run") return detail::cmd_run(o, out, err);
        if (o.verb == "rocking") return detail::cmd_rocking(o, out, err);
        if (o.verb == "levelscheme") return detail::cmd_levelscheme(o, out, err);
        if (o.verb == "g2") return detail::cmd_g2(o, out, err);
        if (o.verb == "validate") return detail::cmd_validate(o, out, err);
        err << "unknown command '" << o.verb << "'\n";
        return kExitInput;
    } catch (const DegenerateSpectrum& e) {
        err << error_kind(e) << " at Delta=" << format_number(e.detuning()) << ": " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        err << error_kind(e) << ": " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace nuqo
