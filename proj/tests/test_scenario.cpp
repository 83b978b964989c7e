#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "nuqo/output.hpp"
#include "nuqo/scenario.hpp"
#include "nuqo/spectra_cli.hpp"

using namespace nuqo;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// paths of all issues reported for a document; empty when it loads
std::vector<std::string> issue_paths(const json& doc) {
    try {
        load_scenario(doc);
    } catch (const InvalidScenario& e) {
        std::vector<std::string> out;
        for (const auto& i : e.issues()) out.push_back(i.path);
        return out;
    }
    return {};
}

bool has_path(const std::vector<std::string>& paths, const std::string& p) {
    return std::find(paths.begin(), paths.end(), p) != paths.end();
}

json minimal() {
    return {{"cavity", {{"kappa", 45.0}, {"kappa_r", 25.0}}},
            {"coupling", {{"n_g2", 100.0}}},
            {"geometry", "a"},
            {"hyperfine", "off"},
            {"scan", {{"from", -10.0}, {"to", 10.0}, {"points", 5}}}};
}

}  // namespace

TEST_CASE("empty and malformed documents are rejected at the root") {
    CHECK_THROWS_AS(load_scenario_text(""), InvalidScenario);
    CHECK_THROWS_AS(load_scenario_text("  \n"), InvalidScenario);
    CHECK_THROWS_AS(load_scenario_text("{}"), InvalidScenario);
    try {
        load_scenario_text("{\"cavity\": ");
        FAIL("parsed");
    } catch (const InvalidScenario& e) {
        REQUIRE(e.issues().size() == 1);
        CHECK(e.issues()[0].path == "$");
        CHECK_THAT(e.issues()[0].message, ContainsSubstring("JSON"));
    }
    CHECK(has_path(issue_paths(json::array({1, 2})), "$"));
}

TEST_CASE("schema issues carry field paths") {
    CHECK(issue_paths(minimal()).empty());

    auto j = minimal();
    j["cavity"].erase("kappa");
    CHECK(has_path(issue_paths(j), "cavity.kappa"));

    j = minimal();
    j["cavity"]["kappa_r"] = "many";
    CHECK(has_path(issue_paths(j), "cavity.kappa_r"));

    j = minimal();
    j["cavity"]["kapa"] = 1.0;
    CHECK(has_path(issue_paths(j), "cavity.kapa"));

    j = minimal();
    j["colour"] = "blue";
    CHECK(has_path(issue_paths(j), "colour"));

    j = minimal();
    j["scan"]["points"] = 0;
    CHECK(has_path(issue_paths(j), "scan.points"));

    j = minimal();
    j["scan"]["to"] = -20.0;
    CHECK(has_path(issue_paths(j), "scan"));

    j = minimal();
    j["geometry"] = "e";
    CHECK(has_path(issue_paths(j), "geometry"));

    j = minimal();
    j["geometry"] = {{"normal", {0, 0, 1}}, {"propagation", {1, 0}}, {"a_in", {0, 0, 1}}, {"a_out", {0, 0, 1}}};
    CHECK(has_path(issue_paths(j), "geometry.propagation"));

    j = minimal();
    j["engine"] = "exact";
    CHECK(has_path(issue_paths(j), "engine"));

    j = minimal();
    j["quantum"] = {{"photon_cutoff", 2}};
    CHECK(has_path(issue_paths(j), "quantum.drive"));

    j = minimal();
    j["quantum"] = {{"drive", 0.1}, {"tau", {0.0, 2.0, 1.0}}};
    CHECK(has_path(issue_paths(j), "quantum.tau"));
}

TEST_CASE("all issues are reported together") {
    auto j = minimal();
    j["cavity"].erase("kappa");
    j["scan"]["points"] = -1;
    j["engine"] = 3;
    const auto paths = issue_paths(j);
    CHECK(paths.size() >= 3);
    CHECK(has_path(paths, "cavity.kappa"));
    CHECK(has_path(paths, "scan.points"));
    CHECK(has_path(paths, "engine"));
}

TEST_CASE("conflicting ways of giving the same quantity") {
    auto j = minimal();
    j["cavity"]["detuning"] = 1.0;
    j["cavity"]["angle_mrad"] = 2.9;
    CHECK(has_path(issue_paths(j), "cavity"));

    j = minimal();
    j["coupling"] = {{"n_g2", 100.0}, {"g", 1.0}};
    CHECK(has_path(issue_paths(j), "coupling"));

    j = minimal();
    j["coupling"] = json::object();
    CHECK(has_path(issue_paths(j), "coupling"));
}

TEST_CASE("hyperfine forms") {
    auto j = minimal();
    j["hyperfine"] = "Fe57@33T";
    const auto s = load_scenario(j);  // geometry a carries a magnetization
    CHECK(s.hyperfine.delta_g == 39.7);
    CHECK(s.hyperfine.delta_e == 22.4);

    j["geometry"] = {{"normal", {0, 0, 1}}, {"propagation", {1, 0, 0}}, {"a_in", {0, 0, 1}}, {"a_out", {0, 0, 1}}};
    CHECK(has_path(issue_paths(j), "hyperfine"));

    j["hyperfine"] = {{"delta_g", 1.0}, {"delta_e", 2.0}, {"axis", {0, 0, 2}}};
    const auto t = load_scenario(j);
    CHECK(t.hyperfine.axis->isApprox(Vec3::UnitZ()));

    j["hyperfine"] = {{"delta_g", -1.0}, {"delta_e", 2.0}, {"axis", {0, 0, 1}}};
    CHECK(has_path(issue_paths(j), "hyperfine"));
}

TEST_CASE("angle sets the cavity detuning through the linear dispersion") {
    auto j = minimal();
    j["cavity"]["detuning_slope"] = -9000.0;
    j["cavity"]["resonance_angle_mrad"] = 2.96;
    j["cavity"]["angle_mrad"] = 2.961;
    const auto s = load_scenario(j);
    CHECK_THAT(s.cavity_detuning, WithinRel(-9000.0, 1e-9));
}

TEST_CASE("n_g2 and (n, g) give the same collective strength") {
    auto a = minimal();
    auto b = minimal();
    b["coupling"] = {{"n", 4.0}, {"g", 5.0}};
    const auto sa = load_scenario(a);
    const auto sb = load_scenario(b);
    CHECK_THAT(sa.coupling.collective_strength(), WithinRel(100.0, 1e-14));
    CHECK_THAT(sb.coupling.collective_strength(), WithinRel(100.0, 1e-14));
}

TEST_CASE("populations") {
    auto j = minimal();
    j["coupling"] = {{"n", 10.0}, {"g", 1.0}};
    j["populations"] = {{"n1", 3.0}, {"n2", 7.0}};
    const auto s = load_scenario(j);
    CHECK(s.coupling.n1 == 3.0);
    CHECK(s.coupling.n2 == 7.0);
    j["populations"] = {{"n1", 3.0}, {"n2", 8.0}};
    CHECK(has_path(issue_paths(j), "populations"));
}

TEST_CASE("quantum block") {
    auto j = minimal();
    j["engine"] = "quantum";
    j["quantum"] = {{"nuclei", 2},
                    {"photon_cutoff", 3},
                    {"drive", {0.1, 0.2}},
                    {"g", 1.5},
                    {"tau", {{"from", 0.0}, {"to", 4.0}, {"points", 5}}},
                    {"dimension_cap", 5e4}};
    const auto s = load_scenario(j);
    REQUIRE(s.quantum);
    CHECK(s.engine == Engine::quantum);
    CHECK(s.quantum->nuclei == 2);
    CHECK(s.quantum->photon_cutoff == 3);
    CHECK(s.quantum->drive == cplx(0.1, 0.2));
    CHECK(s.quantum->tau == std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0});
    const auto c = quantum_config(s);
    CHECK(c.coupling == cplx(1.5));
    CHECK(c.dimension_cap == 5e4);

    // without g the single-nucleus coupling keeps N|g|^2
    j["quantum"].erase("g");
    const auto c2 = quantum_config(load_scenario(j));
    CHECK_THAT(std::norm(c2.coupling) * 2, WithinRel(100.0, 1e-14));

    CHECK_THROWS_AS(quantum_config(load_scenario(minimal())), InvalidScenario);
}

TEST_CASE("presets expand and match the shipped files") {
    for (const auto& name : preset_names()) {
        INFO(name);
        const auto s = builtin_preset(name);
        CHECK(s.name == name);
        std::ifstream in(std::string(NUQO_PRESET_DIR) + "/" + name + ".json");
        REQUIRE(in);
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(json::parse(ss.str()) == preset_document(name));
        CHECK(scenario_hash(load_scenario_file(std::string(NUQO_PRESET_DIR) + "/" + name + ".json")) ==
              scenario_hash(s));
        // referencing a preset by name from a document gives the same scenario
        CHECK(scenario_hash(load_scenario(json{{"preset", name}})) == scenario_hash(s));
    }
    CHECK_THROWS_AS(builtin_preset("paper-figure5"), InvalidScenario);

    const auto f3 = builtin_preset("paper-figure3");
    CHECK(f3.cavity.kappa == 810000.0);
    CHECK(f3.cavity.kappa_r == 450000.0);
    CHECK_THAT(f3.coupling.collective_strength(), WithinRel(25200000.0, 1e-14));
    CHECK(f3.rocking);
    CHECK_THAT(f3.cavity.resonance_angle, WithinRel(2.96e-3, 1e-14));
}

TEST_CASE("document fields override the preset they name") {
    const auto base = builtin_preset("paper-figure3");
    json doc = {{"preset", "paper-figure3"}, {"scan", {{"from", -5.0}, {"to", 5.0}, {"points", 11}}}};
    const auto s = load_scenario(doc);
    CHECK(s.scan.points == 11);
    CHECK(s.cavity.kappa == base.cavity.kappa);
    CHECK(scenario_hash(s) != scenario_hash(base));
}

TEST_CASE("canonical form reloads to the same scenario") {
    for (const auto& name : preset_names()) {
        INFO(name);
        const auto s = builtin_preset(name);
        const auto c = canonical_json(s);
        const auto r = load_scenario(c);
        CHECK(canonical_json(r) == c);
        CHECK(scenario_hash(r) == scenario_hash(s));
    }
    auto j = minimal();
    j["engine"] = "quantum";
    j["quantum"] = {{"drive", 0.1}, {"tau", {0.0, 1.0}}, {"positions", {{0, 0, 0}}}, {"g", 0.5}};
    const auto s = load_scenario(j);
    CHECK(scenario_hash(load_scenario(canonical_json(s))) == scenario_hash(s));
}

TEST_CASE("hash is stable and sensitive") {
    const auto a = builtin_preset("paper-figure3");
    CHECK(scenario_hash(a) == scenario_hash(builtin_preset("paper-figure3")));
    CHECK(scenario_hash(a).size() == 16);
    auto j = preset_document("paper-figure3");
    j["cavity"]["kappa_r"] = 450000.0000001;
    CHECK(scenario_hash(load_scenario(j)) != scenario_hash(a));
    // key order and whitespace in the source do not matter
    const auto text = preset_document("paper-figure3").dump();
    const auto pretty = preset_document("paper-figure3").dump(4);
    CHECK(scenario_hash(load_scenario_text(text)) == scenario_hash(load_scenario_text(pretty)));
    CHECK(fnv1a64("") == 14695981039346656037ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("spectrum CSV layout") {
    Spectrum sp;
    sp.abscissa = {-1.0, 0.1, 2.0 / 3.0};
    sp.amplitude = {cplx(0.25, -0.5), cplx(1.0 / 3.0, 0.0), cplx(-1e-300, 1e300)};
    for (const auto& a : sp.amplitude) sp.intensity.push_back(std::norm(a));
    std::ostringstream os;
    write_spectrum_csv(os, "0123456789abcdef", sp, {"command=test"});
    const auto text = os.str();
    std::istringstream lines(text);
    std::string l;
    std::getline(lines, l);
    CHECK(l == "# scenario=0123456789abcdef units=gamma");
    std::getline(lines, l);
    CHECK(l == "# command=test");
    std::getline(lines, l);
    CHECK(l == "abscissa,re_R,im_R,abs2_R");
    std::getline(lines, l);
    CHECK(l == "-1,0.25,-0.5,0.3125");
    std::getline(lines, l);
    CHECK(l == "0.10000000000000001,0.33333333333333331,0," + format_number(sp.intensity[1]));

    std::istringstream in(text);
    const auto t = read_csv(in);
    CHECK(t.columns == std::vector<std::string>{"abscissa", "re_R", "im_R", "abs2_R"});
    REQUIRE(t.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(t.rows[i][0] == sp.abscissa[i]);
        CHECK(t.rows[i][1] == sp.amplitude[i].real());
        CHECK(t.rows[i][2] == sp.amplitude[i].imag());
    }
    CHECK(t.comments.front() == "scenario=0123456789abcdef units=gamma");
}

TEST_CASE("g2 CSV layout") {
    const std::vector<double> tau = {0.0, 0.5}, g = {1.0, 0.75};
    std::ostringstream os;
    write_g2_csv(os, "ffff", tau, g);
    CHECK(os.str() == "# scenario=ffff units=gamma\ntau,g2\n0,1\n0.5,0.75\n");
}

TEST_CASE("level-scheme export reproduces the spectrum on re-import") {
    for (const auto& name : preset_names()) {
        INFO(name);
        const auto s = builtin_preset(name);
        const auto sys = system_builder(s)(s.cavity_detuning);
        const auto doc = levelscheme_to_json(sys, transition_table(s.hyperfine), scenario_hash(s));
        CHECK(doc["units"] == "gamma");
        CHECK(doc["scenario"] == scenario_hash(s));
        const auto back = levelscheme_from_json(json::parse(doc.dump(2)));
        for (double d = -150.0; d <= 150.0; d += 0.75) {
            const cplx a = reflectance(sys, d), b = reflectance(back, d);
            CHECK(std::abs(a - b) <= 1e-12);
        }
    }
    json broken = levelscheme_to_json(system_builder(builtin_preset("paper-figure4a"))(0.0), transition_table({}), "x");
    broken["energies"].erase(0);
    CHECK_THROWS_AS(levelscheme_from_json(broken), InvalidScenario);
}

TEST_CASE("SVG plot is a single polyline") {
    const std::vector<double> x = {0.0, 1.0, 2.0}, y = {1.0, 0.0, std::nan("")};
    const auto svg = svg_plot(x, y, "x", "y");
    CHECK_THAT(svg, ContainsSubstring("<svg"));
    CHECK_THAT(svg, ContainsSubstring("</svg>"));
    std::size_t count = 0;
    for (std::size_t p = 0; (p = svg.find("<polyline", p)) != std::string::npos; ++p) ++count;
    CHECK(count == 1);
    CHECK_THAT(svg, !ContainsSubstring("nan"));
}
