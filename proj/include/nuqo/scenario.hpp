#pragma once

// Scenario documents (JSON). Loading validates the schema and collects every
// problem with its field path; presets and named geometries are expanded so
// that the canonical form, and therefore the hash, is fully explicit.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuqo/cavity.hpp"
#include "nuqo/errors.hpp"
#include "nuqo/geometry.hpp"
#include "nuqo/linear_response.hpp"
#include "nuqo/master_equation.hpp"
#include "nuqo/nuclear_ensemble.hpp"

namespace nuqo {

using json = nlohmann::json;

struct SchemaIssue {
    std::string path;
    std::string message;
};

class InvalidScenario : public InvalidParameters {
public:
    explicit InvalidScenario(std::vector<SchemaIssue> issues)
        : InvalidParameters(summarize(issues)), issues_(std::move(issues)) {}
    InvalidScenario(const std::string& path, const std::string& message)
        : InvalidScenario(std::vector<SchemaIssue>{{path, message}}) {}

    const std::vector<SchemaIssue>& issues() const noexcept { return issues_; }

private:
    static std::string summarize(const std::vector<SchemaIssue>& issues) {
        std::string s = "invalid scenario:";
        for (const auto& i : issues) s += "\n  " + i.path + ": " + i.message;
        return s;
    }
    std::vector<SchemaIssue> issues_;
};

enum class ScanAxis { detuning, angle };
enum class Engine { linear, quantum };

inline const char* to_string(ScanAxis a) { return a == ScanAxis::detuning ? "detuning" : "angle"; }
inline const char* to_string(Engine e) { return e == Engine::linear ? "linear" : "quantum"; }

struct ScanSpec {
    ScanAxis axis = ScanAxis::detuning;
    double from = -200.0;  // gamma, or mrad for angle scans
    double to = 200.0;
    std::size_t points = 2001;
    bool couple_cavity_detuning = false;
    double probe_detuning = 0.0;  // angle scans only
};

struct QuantumOptions {
    int nuclei = 1;
    int photon_cutoff = 2;
    cplx drive = 0.0;
    double probe_detuning = 0.0;  // where g2 is evaluated
    std::optional<cplx> g;  // single-nucleus coupling; default keeps N|g|^2
    std::vector<double> tau;
    std::vector<Vec3> positions;
    Vec3 wavevector = Vec3::Zero();
    double dimension_cap = 1e4;
};

struct Scenario {
    std::string name;
    CavityParams cavity;
    double cavity_detuning = 0.0;  // Delta_C at the configured angle
    std::optional<double> angle;   // rad; when set, Delta_C = slope (angle - phi0)
    CouplingParams coupling;
    HyperfineConfig hyperfine;
    ExperimentGeometry geometry;
    std::optional<Vec3> quantization_axis;
    ScanSpec scan;
    std::optional<ScanSpec> rocking;
    Engine engine = Engine::linear;
    std::optional<QuantumOptions> quantum;
};

// ---------------------------------------------------------------------------
// Field readers

namespace schema {

using Issues = std::vector<SchemaIssue>;

inline std::string join(const std::string& path, const std::string& key) {
    return path == "$" ? key : path + "." + key;
}

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed,
                       Issues& issues) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || it.key() == k;
        if (!ok) issues.push_back({join(path, it.key()), "unknown field"});
    }
}

inline const json* member(const json& obj, const std::string& key, const std::string& path, Issues& issues,
                          bool required) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        if (required) issues.push_back({join(path, key), "required field is missing"});
        return nullptr;
    }
    return &*it;
}

inline std::optional<double> number(const json& v, const std::string& path, Issues& issues) {
    if (!v.is_number()) {
        issues.push_back({path, "expected a number"});
        return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        issues.push_back({path, "must be finite"});
        return std::nullopt;
    }
    return x;
}

inline std::optional<double> number(const json& obj, const std::string& key, const std::string& path, Issues& issues,
                                    bool required) {
    const json* v = member(obj, key, path, issues, required);
    return v ? number(*v, join(path, key), issues) : std::nullopt;
}

// A complex number is a plain number or a [re, im] pair.
inline std::optional<cplx> complex_number(const json& v, const std::string& path, Issues& issues) {
    if (v.is_number()) {
        const auto x = number(v, path, issues);
        return x ? std::optional<cplx>(cplx(*x, 0.0)) : std::nullopt;
    }
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        const cplx z(v[0].get<double>(), v[1].get<double>());
        if (std::isfinite(z.real()) && std::isfinite(z.imag())) return z;
    }
    issues.push_back({path, "expected a number or a [re, im] pair"});
    return std::nullopt;
}

inline std::optional<Vec3> vec3(const json& v, const std::string& path, Issues& issues) {
    if (v.is_array() && v.size() == 3 && v[0].is_number() && v[1].is_number() && v[2].is_number()) {
        Vec3 out(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
        if (out.allFinite()) return out;
    }
    issues.push_back({path, "expected an array of three numbers"});
    return std::nullopt;
}

inline std::optional<Vec3C> cvec3(const json& v, const std::string& path, Issues& issues) {
    if (!v.is_array() || v.size() != 3) {
        issues.push_back({path, "expected an array of three (complex) components"});
        return std::nullopt;
    }
    Vec3C out;
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
        const auto z = complex_number(v[i], path + "[" + std::to_string(i) + "]", issues);
        if (z)
            out[i] = *z;
        else
            ok = false;
    }
    return ok ? std::optional<Vec3C>(out) : std::nullopt;
}

inline std::optional<int> integer(const json& obj, const std::string& key, const std::string& path, Issues& issues,
                                  bool required) {
    const json* v = member(obj, key, path, issues, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
        issues.push_back({join(path, key), "expected an integer"});
        return std::nullopt;
    }
    return v->get<int>();
}

inline std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path,
                                         Issues& issues, bool required) {
    const json* v = member(obj, key, path, issues, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
        issues.push_back({join(path, key), "expected a string"});
        return std::nullopt;
    }
    return v->get<std::string>();
}

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }
inline json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
inline json to_json(const Vec3C& v) { return json::array({to_json(v[0]), to_json(v[1]), to_json(v[2])}); }

}  // namespace schema

// ---------------------------------------------------------------------------
// Section parsers

namespace detail {

using schema::Issues;

inline void parse_cavity(const json& j, Scenario& s, Issues& is) {
    const std::string p = "cavity";
    if (!j.is_object()) {
        is.push_back({p, "expected an object"});
        return;
    }
    schema::check_keys(j, p, {"kappa", "kappa_r", "kappa_t", "detuning_slope", "resonance_angle_mrad", "detuning",
                              "angle_mrad", "xi", "omega0_kev", "gamma_nev"},
                       is);
    auto& c = s.cavity;
    if (auto v = schema::number(j, "kappa", p, is, true)) c.kappa = *v;
    if (auto v = schema::number(j, "kappa_r", p, is, true)) c.kappa_r = *v;
    if (auto v = schema::number(j, "kappa_t", p, is, false)) c.kappa_t = *v;
    // slope is given per microradian in documents
    if (auto v = schema::number(j, "detuning_slope", p, is, false)) c.detuning_slope = *v / kMicroradian;
    if (auto v = schema::number(j, "resonance_angle_mrad", p, is, false)) c.resonance_angle = *v * kMilliradian;
    if (auto v = schema::number(j, "xi", p, is, false)) c.xi = *v;
    if (auto v = schema::number(j, "omega0_kev", p, is, false)) c.omega0_kev = *v;
    if (auto v = schema::number(j, "gamma_nev", p, is, false)) c.gamma_nev = *v;
    const auto det = schema::number(j, "detuning", p, is, false);
    const auto ang = schema::number(j, "angle_mrad", p, is, false);
    if (det && ang) is.push_back({p, "give either detuning or angle_mrad, not both"});
    if (det) s.cavity_detuning = *det;
    if (ang) {
        s.angle = *ang * kMilliradian;
        s.cavity_detuning = cavity_detuning_linear(*s.angle - c.resonance_angle, c.detuning_slope);
    }
}

inline void parse_coupling(const json& j, Scenario& s, Issues& is) {
    const std::string p = "coupling";
    if (!j.is_object()) {
        is.push_back({p, "expected an object"});
        return;
    }
    schema::check_keys(j, p, {"n_g2", "n", "g"}, is);
    const double n = schema::number(j, "n", p, is, false).value_or(1.0);
    if (!(n >= 1.0)) is.push_back({schema::join(p, "n"), "nucleus count must be at least 1"});
    s.coupling.n = n;
    const json* ng2 = schema::member(j, "n_g2", p, is, false);
    const json* g = schema::member(j, "g", p, is, false);
    if ((ng2 == nullptr) == (g == nullptr)) {
        is.push_back({p, "give exactly one of n_g2 (collective N|g|^2) or g (single-nucleus coupling)"});
        return;
    }
    if (ng2) {
        if (auto v = schema::number(*ng2, schema::join(p, "n_g2"), is)) {
            if (*v < 0.0) is.push_back({schema::join(p, "n_g2"), "must be non-negative"});
            s.coupling.g = n > 0.0 ? std::sqrt(std::max(*v, 0.0) / n) : 0.0;
        }
    } else if (auto v = schema::complex_number(*g, schema::join(p, "g"), is)) {
        s.coupling.g = *v;
    }
}

inline void parse_populations(const json* j, Scenario& s, Issues& is) {
    PopulationMode mode = ThermalRoom{};
    if (j) {
        if (j->is_string() && j->get<std::string>() == "thermal") {
        } else if (j->is_object()) {
            schema::check_keys(*j, "populations", {"n1", "n2"}, is);
            const auto n1 = schema::number(*j, "n1", "populations", is, true);
            const auto n2 = schema::number(*j, "n2", "populations", is, true);
            if (!n1 || !n2) return;
            mode = ExplicitPopulations{*n1, *n2};
        } else {
            is.push_back({"populations", "expected \"thermal\" or {\"n1\": ..., \"n2\": ...}"});
            return;
        }
    }
    if (!(s.coupling.n >= 1.0)) return;
    try {
        const auto p = ground_populations(s.coupling.n, mode);
        s.coupling.n1 = p[0];
        s.coupling.n2 = p[1];
    } catch (const InvalidEnsemble& e) {
        is.push_back({"populations", e.what()});
    }
}

inline void parse_geometry(const json& j, Scenario& s, Issues& is) {
    const std::string p = "geometry";
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        for (const auto& g : canonical_geometries())
            if (g.name == name) {
                s.geometry = g.geometry;
                return;
            }
        is.push_back({p, "unknown named geometry '" + name + "' (expected a, b, c or d)"});
        return;
    }
    if (!j.is_object()) {
        is.push_back({p, "expected a, b, c, d or an object"});
        return;
    }
    schema::check_keys(j, p, {"normal", "propagation", "a_in", "a_out", "magnetization"}, is);
    std::optional<Vec3> normal, prop;
    if (const json* v = schema::member(j, "normal", p, is, true)) normal = schema::vec3(*v, p + ".normal", is);
    if (const json* v = schema::member(j, "propagation", p, is, true)) prop = schema::vec3(*v, p + ".propagation", is);
    if (normal && prop) {
        try {
            s.geometry.frame = build_frame(*normal, *prop);
        } catch (const InvalidGeometry& e) {
            is.push_back({p, e.what()});
        }
    }
    if (const json* v = schema::member(j, "a_in", p, is, true))
        if (auto z = schema::cvec3(*v, p + ".a_in", is)) s.geometry.a_in = *z;
    if (const json* v = schema::member(j, "a_out", p, is, true))
        if (auto z = schema::cvec3(*v, p + ".a_out", is)) s.geometry.a_out = *z;
    if (const json* v = schema::member(j, "magnetization", p, is, false))
        if (auto b = schema::vec3(*v, p + ".magnetization", is)) {
            if (b->norm() > 0.0)
                s.geometry.magnetization = b->normalized();
            else
                is.push_back({p + ".magnetization", "must be nonzero"});
        }
}

inline void parse_hyperfine(const json* j, Scenario& s, Issues& is) {
    const std::string p = "hyperfine";
    if (!j || (j->is_string() && j->get<std::string>() == "off")) {
        s.hyperfine = {};
        return;
    }
    if (j->is_string() && j->get<std::string>() == "Fe57@33T") {
        if (!s.geometry.magnetization) {
            is.push_back({p, "Fe57@33T needs geometry.magnetization (or use the object form with an axis)"});
            return;
        }
        s.hyperfine = fe57_33_tesla(*s.geometry.magnetization);
        return;
    }
    if (!j->is_object()) {
        is.push_back({p, "expected \"off\", \"Fe57@33T\" or an object"});
        return;
    }
    schema::check_keys(*j, p, {"delta_g", "delta_e", "axis"}, is);
    HyperfineConfig h;
    h.delta_g = schema::number(*j, "delta_g", p, is, true).value_or(0.0);
    h.delta_e = schema::number(*j, "delta_e", p, is, true).value_or(0.0);
    if (const json* v = schema::member(*j, "axis", p, is, false)) {
        if (auto b = schema::vec3(*v, p + ".axis", is)) {
            if (b->norm() > 0.0)
                h.axis = b->normalized();
            else
                is.push_back({p + ".axis", "must be nonzero"});
        }
    } else if (s.geometry.magnetization) {
        h.axis = s.geometry.magnetization;
    }
    if ((h.delta_g != 0.0 || h.delta_e != 0.0) && !h.axis)
        is.push_back({p, "nonzero splitting needs an axis (hyperfine.axis or geometry.magnetization)"});
    if (h.delta_g < 0.0 || h.delta_e < 0.0) is.push_back({p, "splittings must be non-negative"});
    s.hyperfine = h;
}

inline std::optional<ScanSpec> parse_scan(const json& j, const std::string& p, bool angle_only, Issues& is) {
    if (!j.is_object()) {
        is.push_back({p, "expected an object"});
        return std::nullopt;
    }
    schema::check_keys(j, p, {"axis", "from", "to", "points", "couple_cavity_detuning", "probe_detuning"}, is);
    ScanSpec sc;
    if (angle_only) {
        sc.axis = ScanAxis::angle;
        if (j.contains("axis") && j["axis"] != "angle") is.push_back({p + ".axis", "rocking scans are angle scans"});
    } else if (auto a = schema::string(j, "axis", p, is, false)) {
        if (*a == "detuning")
            sc.axis = ScanAxis::detuning;
        else if (*a == "angle")
            sc.axis = ScanAxis::angle;
        else
            is.push_back({p + ".axis", "expected \"detuning\" or \"angle\""});
    }
    const auto from = schema::number(j, "from", p, is, true);
    const auto to = schema::number(j, "to", p, is, true);
    const auto points = schema::integer(j, "points", p, is, true);
    if (from) sc.from = *from;
    if (to) sc.to = *to;
    if (points) {
        if (*points < 1)
            is.push_back({p + ".points", "must be at least 1"});
        else
            sc.points = static_cast<std::size_t>(*points);
    }
    if (from && to && points && *points > 1 && !(*to > *from)) is.push_back({p, "'to' must exceed 'from'"});
    if (const json* v = schema::member(j, "couple_cavity_detuning", p, is, false)) {
        if (!v->is_boolean())
            is.push_back({p + ".couple_cavity_detuning", "expected true or false"});
        else
            sc.couple_cavity_detuning = v->get<bool>();
    }
    if (auto v = schema::number(j, "probe_detuning", p, is, false)) sc.probe_detuning = *v;
    return sc;
}

inline void parse_quantum(const json& j, Scenario& s, Issues& is) {
    const std::string p = "quantum";
    if (!j.is_object()) {
        is.push_back({p, "expected an object"});
        return;
    }
    schema::check_keys(j, p, {"nuclei", "photon_cutoff", "drive", "probe_detuning", "g", "tau", "positions", "wavevector",
                              "dimension_cap"},
                       is);
    QuantumOptions q;
    if (auto v = schema::integer(j, "nuclei", p, is, false)) q.nuclei = *v;
    if (auto v = schema::integer(j, "photon_cutoff", p, is, false)) q.photon_cutoff = *v;
    if (q.nuclei < 0) is.push_back({p + ".nuclei", "must be non-negative"});
    if (q.photon_cutoff < 1) is.push_back({p + ".photon_cutoff", "must be at least 1"});
    if (const json* v = schema::member(j, "drive", p, is, true))
        if (auto z = schema::complex_number(*v, p + ".drive", is)) q.drive = *z;
    if (const json* v = schema::member(j, "g", p, is, false)) q.g = schema::complex_number(*v, p + ".g", is);
    if (auto v = schema::number(j, "dimension_cap", p, is, false)) q.dimension_cap = *v;
    if (auto v = schema::number(j, "probe_detuning", p, is, false)) q.probe_detuning = *v;
    if (const json* v = schema::member(j, "tau", p, is, false)) {
        if (v->is_array()) {
            for (std::size_t i = 0; i < v->size(); ++i)
                if (auto t = schema::number((*v)[i], p + ".tau[" + std::to_string(i) + "]", is)) q.tau.push_back(*t);
        } else if (v->is_object()) {
            schema::check_keys(*v, p + ".tau", {"from", "to", "points"}, is);
            const auto from = schema::number(*v, "from", p + ".tau", is, true);
            const auto to = schema::number(*v, "to", p + ".tau", is, true);
            const auto n = schema::integer(*v, "points", p + ".tau", is, true);
            if (from && to && n) {
                if (*n < 1)
                    is.push_back({p + ".tau.points", "must be at least 1"});
                else
                    q.tau = linspace(*from, *to, static_cast<std::size_t>(*n));
            }
        } else {
            is.push_back({p + ".tau", "expected a list of times or {from, to, points}"});
        }
        for (std::size_t i = 0; i < q.tau.size(); ++i) {
            if (q.tau[i] < 0.0) is.push_back({p + ".tau", "times must be non-negative"});
            if (i > 0 && q.tau[i] < q.tau[i - 1]) is.push_back({p + ".tau", "times must be non-decreasing"});
        }
    }
    if (const json* v = schema::member(j, "positions", p, is, false)) {
        if (!v->is_array())
            is.push_back({p + ".positions", "expected a list of 3-vectors"});
        else
            for (std::size_t i = 0; i < v->size(); ++i)
                if (auto r = schema::vec3((*v)[i], p + ".positions[" + std::to_string(i) + "]", is))
                    q.positions.push_back(*r);
    }
    if (const json* v = schema::member(j, "wavevector", p, is, false))
        if (auto k = schema::vec3(*v, p + ".wavevector", is)) q.wavevector = *k;
    s.quantum = q;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() {
    return {"paper-figure3", "paper-figure4a", "paper-figure4b", "paper-figure4c", "paper-figure4d"};
}

/// Preset documents in their short (file) form; presets/*.json ship the same text.
inline json preset_document(const std::string& name) {
    const json cavity = {{"kappa", 810000.0},   {"kappa_r", 450000.0},          {"kappa_t", 0.0},
                         {"detuning_slope", -9000.0}, {"resonance_angle_mrad", 2.96}, {"detuning", 0.0},
                         {"xi", 18000.0}};
    const json coupling = {{"n_g2", 25200000.0}};
    if (name == "paper-figure3") {
        return {
            {"name", name},
            {"cavity", cavity},
            {"coupling", coupling},
            {"hyperfine", "off"},
            {"geometry",
             {{"normal", {0, 0, 1}}, {"propagation", {1, 0, 0}}, {"a_in", {0, 0, 1}}, {"a_out", {0, 0, 1}}}},
            {"scan", {{"axis", "detuning"}, {"from", -200.0}, {"to", 200.0}, {"points", 2001}}},
            {"rocking", {{"from", 2.9}, {"to", 3.02}, {"points", 1201}, {"probe_detuning", 1000.0}}},
            {"engine", "linear"},
        };
    }
    for (const char* letter : {"a", "b", "c", "d"}) {
        if (name == std::string("paper-figure4") + letter) {
            return {
                {"name", name},
                {"cavity", cavity},
                {"coupling", coupling},
                {"hyperfine", "Fe57@33T"},
                {"geometry", letter},
                {"scan", {{"axis", "detuning"}, {"from", -150.0}, {"to", 150.0}, {"points", 3001}}},
                {"engine", "linear"},
            };
        }
    }
    throw InvalidScenario("preset", "unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Loading

inline Scenario load_scenario(const json& doc) {
    schema::Issues is;
    if (!doc.is_object() || doc.empty()) throw InvalidScenario("$", "scenario must be a non-empty JSON object");
    json j = doc;
    if (auto it = j.find("preset"); it != j.end()) {
        if (!it->is_string()) throw InvalidScenario("preset", "expected a preset name");
        json base = preset_document(it->get<std::string>());
        j.erase("preset");
        base.update(j);  // top-level fields of the document override the preset
        j = base;
    }
    schema::check_keys(j, "$",
                       {"name", "cavity", "coupling", "populations", "hyperfine", "geometry", "quantization_axis",
                        "scan", "rocking", "engine", "quantum"},
                       is);

    Scenario s;
    if (auto v = schema::string(j, "name", "$", is, false)) s.name = *v;
    if (const json* v = schema::member(j, "cavity", "$", is, true)) detail::parse_cavity(*v, s, is);
    if (const json* v = schema::member(j, "coupling", "$", is, true)) detail::parse_coupling(*v, s, is);
    detail::parse_populations(schema::member(j, "populations", "$", is, false), s, is);
    if (const json* v = schema::member(j, "geometry", "$", is, true)) detail::parse_geometry(*v, s, is);
    detail::parse_hyperfine(schema::member(j, "hyperfine", "$", is, false), s, is);
    if (const json* v = schema::member(j, "quantization_axis", "$", is, false)) {
        if (auto b = schema::vec3(*v, "quantization_axis", is)) {
            if (b->norm() > 0.0)
                s.quantization_axis = b->normalized();
            else
                is.push_back({"quantization_axis", "must be nonzero"});
        }
    }
    if (const json* v = schema::member(j, "scan", "$", is, true))
        if (auto sc = detail::parse_scan(*v, "scan", false, is)) s.scan = *sc;
    if (const json* v = schema::member(j, "rocking", "$", is, false)) s.rocking = detail::parse_scan(*v, "rocking", true, is);
    if (auto e = schema::string(j, "engine", "$", is, false)) {
        if (*e == "linear")
            s.engine = Engine::linear;
        else if (*e == "quantum")
            s.engine = Engine::quantum;
        else
            is.push_back({"engine", "expected \"linear\" or \"quantum\""});
    }
    if (const json* v = schema::member(j, "quantum", "$", is, false)) detail::parse_quantum(*v, s, is);
    if (!is.empty()) throw InvalidScenario(std::move(is));
    return s;
}

inline Scenario load_scenario_text(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw InvalidScenario("$", "scenario file is empty");
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidScenario("$", std::string("not valid JSON: ") + e.what());
    }
    return load_scenario(doc);
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidScenario("$", "cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario_text(ss.str());
}

inline Scenario builtin_preset(const std::string& name) { return load_scenario(preset_document(name)); }

/// Fully explicit form: every default written out, named geometries and
/// presets expanded. Re-loading it yields the same scenario.
inline json canonical_json(const Scenario& s) {
    using schema::to_json;
    const auto& c = s.cavity;
    json cav = {{"kappa", c.kappa},
                {"kappa_r", c.kappa_r},
                {"kappa_t", c.kappa_t},
                {"detuning_slope", c.detuning_slope * kMicroradian},
                {"resonance_angle_mrad", c.resonance_angle / kMilliradian},
                {"xi", c.xi},
                {"omega0_kev", c.omega0_kev},
                {"gamma_nev", c.gamma_nev}};
    if (s.angle)
        cav["angle_mrad"] = *s.angle / kMilliradian;
    else
        cav["detuning"] = s.cavity_detuning;
    json geom = {{"normal", to_json(s.geometry.frame.a1.real().eval())},
                 {"propagation", to_json(s.geometry.frame.k.real().eval())},
                 {"a_in", to_json(s.geometry.a_in)},
                 {"a_out", to_json(s.geometry.a_out)}};
    if (s.geometry.magnetization) geom["magnetization"] = to_json(*s.geometry.magnetization);
    // without an axis the object form would pick up geometry.magnetization
    json hyper = "off";
    if (s.hyperfine.axis)
        hyper = {{"delta_g", s.hyperfine.delta_g}, {"delta_e", s.hyperfine.delta_e}, {"axis", to_json(*s.hyperfine.axis)}};
    auto scan_json = [](const ScanSpec& sc) {
        return json{{"axis", to_string(sc.axis)},
                    {"from", sc.from},
                    {"to", sc.to},
                    {"points", sc.points},
                    {"couple_cavity_detuning", sc.couple_cavity_detuning},
                    {"probe_detuning", sc.probe_detuning}};
    };
    json out = {{"cavity", cav},
                {"coupling", {{"n", s.coupling.n}, {"g", to_json(s.coupling.g)}}},
                {"populations", {{"n1", s.coupling.n1}, {"n2", s.coupling.n2}}},
                {"hyperfine", hyper},
                {"geometry", geom},
                {"scan", scan_json(s.scan)},
                {"engine", to_string(s.engine)}};
    if (s.quantization_axis) out["quantization_axis"] = to_json(*s.quantization_axis);
    if (s.rocking) out["rocking"] = scan_json(*s.rocking);
    if (s.quantum) {
        const auto& q = *s.quantum;
        json qj = {{"nuclei", q.nuclei},
                   {"photon_cutoff", q.photon_cutoff},
                   {"drive", to_json(q.drive)},
                   {"probe_detuning", q.probe_detuning},
                   {"tau", q.tau},
                   {"wavevector", to_json(q.wavevector)},
                   {"dimension_cap", q.dimension_cap}};
        if (q.g) qj["g"] = to_json(*q.g);
        json pos = json::array();
        for (const auto& r : q.positions) pos.push_back(to_json(r));
        qj["positions"] = pos;
        out["quantum"] = qj;
    }
    return out;
}

inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string scenario_hash(const Scenario& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json(s).dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// Scenario -> solver inputs

inline SystemOptions system_options(const Scenario& s) {
    SystemOptions o;
    o.quantization_axis = s.quantization_axis;
    return o;
}

inline SystemBuilder system_builder(const Scenario& s) {
    return [s](double cavity_detuning) {
        return build_effective_system(s.geometry, s.cavity, s.hyperfine, s.coupling, cavity_detuning,
                                      system_options(s));
    };
}

inline CavityDetuningModel detuning_model(const Scenario& s, bool coupled) {
    CavityDetuningModel m;
    m.fixed = s.cavity_detuning;
    m.coupled = coupled;
    m.omega0 = s.cavity.omega0_in_gamma();
    m.angle = s.angle.value_or(s.cavity.resonance_angle);
    m.resonance_angle = s.cavity.resonance_angle;
    return m;
}

inline const QuantumOptions& require_quantum(const Scenario& s) {
    if (!s.quantum) throw InvalidScenario("quantum", "quantum options are required for this command");
    return *s.quantum;
}

/// Full-model configuration. Unless quantum.g is given the single-nucleus
/// coupling keeps the scenario's N|g|^2 with N = quantum.nuclei.
inline QuantumConfig quantum_config(const Scenario& s) {
    const auto& q = require_quantum(s);
    QuantumConfig c;
    c.nuclei = q.nuclei;
    c.photon_cutoff = q.photon_cutoff;
    c.cavity = s.cavity;
    c.geometry = s.geometry;
    c.hyperfine = s.hyperfine;
    if (q.g)
        c.coupling = *q.g;
    else
        c.coupling = q.nuclei > 0 ? std::sqrt(s.coupling.collective_strength() / q.nuclei) : 0.0;
    c.drive = q.drive;
    c.probe_detuning = q.probe_detuning;
    c.cavity_detuning = s.cavity_detuning;
    c.positions = q.positions;
    c.cavity_wavevector = q.wavevector;
    c.quantization_axis = s.quantization_axis;
    c.dimension_cap = q.dimension_cap;
    return c;
}

}  // namespace nuqo
