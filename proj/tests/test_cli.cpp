#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nuqo/spectra_cli.hpp"

using namespace nuqo;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("nuqo_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
    const auto p = scratch() / name;
    std::ofstream(p) << text;
    return p.string();
}

std::string write_json(const std::string& name, const json& j) { return write_file(name, j.dump(2)); }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// exit status of the real executable
int run_binary(const std::string& args) {
    const std::string cmd = std::string(NUQO_CLI) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

struct Result {
    int code;
    std::string out, err;
};

Result run(CliOptions o) {
    std::ostringstream out, err;
    const int code = run_command(o, out, err);
    return {code, out.str(), err.str()};
}

CliOptions verb(const std::string& v, const std::string& file) {
    CliOptions o;
    o.verb = v;
    o.scenario_path = file;
    return o;
}

CliOptions preset_verb(const std::string& v, const std::string& preset) {
    CliOptions o;
    o.verb = v;
    o.preset = preset;
    return o;
}

CsvTable parse(const std::string& text) {
    std::istringstream in(text);
    return read_csv(in);
}

std::optional<std::string> comment_value(const CsvTable& t, const std::string& key) {
    for (const auto& c : t.comments) {
        std::istringstream ss(c);
        std::string tok;
        while (ss >> tok)
            if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
    }
    return std::nullopt;
}

json small_quantum(int nuclei, int cutoff, double drive) {
    return {{"cavity", {{"kappa", 45.0}, {"kappa_r", 25.0}}},
            {"coupling", {{"n_g2", 0.0}}},
            {"hyperfine", "off"},
            {"geometry",
             {{"normal", {0, 0, 1}}, {"propagation", {1, 0, 0}}, {"a_in", {0, 0, 1}}, {"a_out", {0, 0, 1}}}},
            {"scan", {{"from", -1.0}, {"to", 1.0}, {"points", 3}}},
            {"engine", "quantum"},
            {"quantum", {{"nuclei", nuclei}, {"photon_cutoff", cutoff}, {"drive", drive}, {"tau", {0.0, 1.0}}}}};
}

}  // namespace

TEST_CASE("empty scenario file is an input error") {
    const auto f = write_file("empty.json", "");
    const auto r = run(verb("run", f));
    CHECK(r.code == kExitInput);
    CHECK_THAT(r.err, ContainsSubstring("$"));
    CHECK(run_binary("run " + f) == 2);
    CHECK(run_binary("validate " + f) == 2);
}

TEST_CASE("schema violations name the field") {
    auto j = preset_document("paper-figure3");
    j["cavity"]["kappa"] = "wide";
    const auto f = write_json("bad_kappa.json", j);
    const auto r = run(verb("run", f));
    CHECK(r.code == kExitInput);
    CHECK_THAT(r.err, ContainsSubstring("cavity.kappa"));
}

TEST_CASE("usage errors") {
    CHECK(run_binary("") == 2);
    CHECK(run_binary("frobnicate") == 2);
    CHECK(run_binary("run --preset paper-figure9") == 2);
    CHECK(run_binary("run --engine exact --preset paper-figure3") == 2);
    CHECK(run(CliOptions{.verb = "run"}).code == kExitInput);
    auto o = preset_verb("run", "paper-figure3");
    o.scenario_path = write_json("f3.json", preset_document("paper-figure3"));
    CHECK(run(o).code == kExitInput);
    CHECK(run_binary("--help") == 0);
}

TEST_CASE("validate") {
    SECTION("preset is ok") {
        const auto r = run(preset_verb("validate", "paper-figure3"));
        CHECK(r.code == kExitOk);
        CHECK_THAT(r.out, ContainsSubstring("ok cavity"));
        CHECK_THAT(r.out, !ContainsSubstring("FAIL"));
        CHECK(run_binary("validate --preset paper-figure4d") == 0);
    }
    SECTION("kappa_r + kappa_t > kappa") {
        auto j = preset_document("paper-figure3");
        j["cavity"]["kappa_t"] = 400000.0;
        const auto f = write_json("lossy.json", j);
        const auto r = run(verb("validate", f));
        CHECK(r.code == kExitInput);
        CHECK_THAT(r.out, ContainsSubstring("FAIL cavity: EnergyConservationViolation"));
        CHECK_THAT(r.out, ContainsSubstring("ok geometry"));
        CHECK(run_binary("validate " + f) == 2);
    }
    SECTION("non-unit polarization") {
        auto j = preset_document("paper-figure3");
        j["geometry"]["a_in"] = {0, 0, 2};
        const auto r = run(verb("validate", write_json("long_pol.json", j)));
        CHECK(r.code == kExitInput);
        CHECK_THAT(r.out, ContainsSubstring("FAIL geometry"));
        CHECK_THAT(r.out, ContainsSubstring("divide it by its norm"));
    }
    SECTION("every failure is listed") {
        auto j = preset_document("paper-figure3");
        j["cavity"]["kappa_t"] = 400000.0;
        j["geometry"]["a_out"] = {0, 1, 1};
        const auto r = run(verb("validate", write_json("two_bad.json", j)));
        CHECK(r.code == kExitInput);
        CHECK_THAT(r.out, ContainsSubstring("FAIL cavity"));
        CHECK_THAT(r.out, ContainsSubstring("FAIL geometry"));
    }
    SECTION("schema failures") {
        const auto r = run(verb("validate", write_file("broken.json", "{\"cavity\": 1}")));
        CHECK(r.code == kExitInput);
        CHECK_THAT(r.out, ContainsSubstring("FAIL schema: cavity"));
    }
}

TEST_CASE("run writes the fixed CSV layout") {
    auto o = preset_verb("run", "paper-figure3");
    o.points = 41;
    o.from = -100.0;
    o.to = 100.0;
    const auto r = run(o);
    REQUIRE(r.code == kExitOk);
    const auto hash = scenario_hash([&] {
        auto s = builtin_preset("paper-figure3");
        s.scan.points = 41;
        s.scan.from = -100.0;
        s.scan.to = 100.0;
        return s;
    }());
    CHECK(r.out.rfind("# scenario=" + hash + " units=gamma\n", 0) == 0);
    const auto t = parse(r.out);
    CHECK(t.columns == std::vector<std::string>{"abscissa", "re_R", "im_R", "abs2_R"});
    REQUIRE(t.rows.size() == 41);
    CHECK(t.rows.front()[0] == -100.0);
    CHECK(t.rows.back()[0] == 100.0);
    for (const auto& row : t.rows) CHECK_THAT(row[3], WithinAbs(row[1] * row[1] + row[2] * row[2], 1e-15));
    // resonant cavity, no Lamb shift: the superradiant line is centred at zero
    std::size_t best = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.rows[i][3] > t.rows[best][3]) best = i;
    CHECK(t.rows[best][0] == 0.0);
    CHECK(t.rows[best][3] > 10.0 * t.rows.front()[3]);
}

TEST_CASE("geometry a shows its dip at zero detuning") {
    auto o = preset_verb("run", "paper-figure4a");
    o.from = -60.0;
    o.to = 60.0;
    o.points = 241;
    const auto r = run(o);
    REQUIRE(r.code == kExitOk);
    const auto t = parse(r.out);
    std::size_t best = 0;
    double peak = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        peak = std::max(peak, t.rows[i][3]);
        if (std::abs(t.rows[i][0]) < 20.0 && (std::abs(t.rows[best][0]) >= 20.0 || t.rows[i][3] < t.rows[best][3]))
            best = i;
    }
    CHECK_THAT(t.rows[best][0], WithinAbs(0.0, 0.5));
    CHECK(t.rows[best][3] < 0.05 * peak);
}

TEST_CASE("determinism and SVG output") {
    const auto a = (scratch() / "a.csv").string();
    const auto b = (scratch() / "b.csv").string();
    REQUIRE(run_binary("run --preset paper-figure4b --points 501 --out " + a) == 0);
    REQUIRE(run_binary("run --preset paper-figure4b --points 501 --out " + b + " --svg") == 0);
    const auto ta = slurp(a);
    CHECK(!ta.empty());
    CHECK(ta == slurp(b));
    const auto svg = (scratch() / "b.svg").string();
    REQUIRE(fs::exists(svg));
    CHECK_THAT(slurp(svg), ContainsSubstring("<polyline"));

    auto o = preset_verb("run", "paper-figure4b");
    o.points = 501;
    CHECK(run(o).out == ta);

    // a file holding the preset document hashes like the preset itself
    const auto f = write_json("f4b.json", preset_document("paper-figure4b"));
    o = verb("run", f);
    o.points = 501;
    CHECK(run(o).out == ta);

    CHECK(run_binary("run --preset paper-figure3 --points 5 --svg") == 2);  // no --out to name the plot
}

TEST_CASE("coupled cavity detuning is recorded") {
    auto o = preset_verb("run", "paper-figure3");
    o.points = 5;
    const auto fixed = run(o);
    o.couple_cavity_detuning = true;
    const auto coupled = run(o);
    REQUIRE(fixed.code == kExitOk);
    REQUIRE(coupled.code == kExitOk);
    CHECK(comment_value(parse(fixed.out), "cavity_detuning_coupled") == "false");
    CHECK(comment_value(parse(coupled.out), "cavity_detuning_coupled") == "true");
}

TEST_CASE("rocking marks the minimum") {
    auto o = preset_verb("rocking", "paper-figure3");
    o.points = 241;
    const auto r = run(o);
    REQUIRE(r.code == kExitOk);
    const auto t = parse(r.out);
    const auto angle = comment_value(t, "minimum_angle_mrad");
    const auto value = comment_value(t, "minimum_abs2_R");
    REQUIRE(angle);
    REQUIRE(value);
    // near the guided-mode angle, and no deeper than any grid point
    CHECK_THAT(std::stod(*angle), WithinAbs(2.96, 0.005));
    for (const auto& row : t.rows) CHECK(std::stod(*value) <= row[3]);
    CHECK_THAT(std::stod(*value), WithinAbs(1.0 / 81.0, 1e-4));

    SECTION("critical coupling reaches zero") {
        auto j = preset_document("paper-figure3");
        j["cavity"]["kappa"] = 900000.0;
        const auto rc = run(verb("rocking", write_json("critical.json", j)));
        REQUIRE(rc.code == kExitOk);
        CHECK_THAT(std::stod(*comment_value(parse(rc.out), "minimum_abs2_R")), WithinAbs(0.0, 1e-6));
    }
    SECTION("a detuning-only scenario has nothing to rock") {
        auto j = preset_document("paper-figure4a");
        CHECK(run(verb("rocking", write_json("no_rock.json", j))).code == kExitInput);
    }
}

TEST_CASE("levelscheme export") {
    auto load = [](const Result& r) { return json::parse(r.out); };
    SECTION("geometry a: two driven states, one coupling") {
        const auto r = run(preset_verb("levelscheme", "paper-figure4a"));
        REQUIRE(r.code == kExitOk);
        const auto j = load(r);
        CHECK(j["summary"]["driven"] == json::array({2, 5}));
        CHECK(j["summary"]["couplings"] == json::array({json::array({2, 5})}));
        CHECK(j["units"] == "gamma");
        CHECK(j["scenario"] == scenario_hash(builtin_preset("paper-figure4a")));
    }
    SECTION("B along k: exact zero pi-sigma blocks") {
        auto j = preset_document("paper-figure4a");
        j["geometry"] = {{"normal", {0, 0, 1}},
                         {"propagation", {1, 0, 0}},
                         {"a_in", {0, 1, 0}},
                         {"a_out", {0, 1, 0}},
                         {"magnetization", {1, 0, 0}}};
        const auto r = run(verb("levelscheme", write_json("bk.json", j)));
        REQUIRE(r.code == kExitOk);
        const auto doc = load(r);
        std::vector<bool> pi(6);
        for (const auto& t : doc["transitions"]) pi[t["index"].get<int>() - 1] = t["polarization"] == "pi0";
        int checked = 0;
        for (int mu = 0; mu < 6; ++mu)
            for (int nu = 0; nu < 6; ++nu)
                if (pi[mu] != pi[nu]) {
                    CHECK(doc["coupling"][mu][nu] == json::array({0.0, 0.0}));
                    ++checked;
                }
        CHECK(checked == 16);
    }
    SECTION("unmagnetized: no splittings") {
        const auto r = run(preset_verb("levelscheme", "paper-figure3"));
        REQUIRE(r.code == kExitOk);
        for (const auto& e : load(r)["energies"]) CHECK(e.get<double>() == 0.0);
    }
    SECTION("quantum engine is refused") {
        auto o = preset_verb("levelscheme", "paper-figure3");
        o.engine = "quantum";
        CHECK(run(o).code == kExitInput);
    }
}

TEST_CASE("g2") {
    SECTION("empty cavity is coherent") {
        auto j = small_quantum(0, 6, 0.2);
        j["quantum"]["tau"] = {{"from", 0.0}, {"to", 1.0}, {"points", 11}};
        const auto r = run(verb("g2", write_json("empty_g2.json", j)));
        REQUIRE(r.code == kExitOk);
        const auto t = parse(r.out);
        CHECK(t.columns == std::vector<std::string>{"tau", "g2"});
        REQUIRE(t.rows.size() == 11);
        for (const auto& row : t.rows) CHECK_THAT(row[1], WithinAbs(1.0, 1e-6));
        CHECK(comment_value(t, "truncation_indicator"));
    }
    SECTION("single tau gives a single value") {
        auto j = small_quantum(0, 6, 0.2);
        j["quantum"]["tau"] = {0.0};
        const auto r = run(verb("g2", write_json("one_tau.json", j)));
        REQUIRE(r.code == kExitOk);
        CHECK(parse(r.out).rows.size() == 1);
    }
    SECTION("missing quantum options") {
        CHECK(run(preset_verb("g2", "paper-figure3")).code == kExitInput);
        CHECK(run_binary("g2 --preset paper-figure3") == 2);
        auto j = small_quantum(0, 6, 0.2);
        j["quantum"].erase("tau");
        CHECK(run(verb("g2", write_json("no_tau.json", j))).code == kExitInput);
    }
    SECTION("dimension cap") {
        const auto f = write_json("too_big.json", small_quantum(3, 6, 0.1));
        const auto r = run(verb("g2", f));
        CHECK(r.code == kExitResourceCap);
        CHECK_THAT(r.err, ContainsSubstring("ResourceCapExceeded"));
        CHECK(run_binary("g2 " + f) == 4);
    }
}

TEST_CASE("quantum run with an undriven nucleus reports the degeneracy") {
    auto j = small_quantum(1, 1, 0.0);
    j["coupling"] = {{"n", 1.0}, {"g", 1.0}};
    const auto f = write_json("undriven.json", j);
    const auto r = run(verb("run", f));
    CHECK(r.code == kExitSolver);
    CHECK_THAT(r.err, ContainsSubstring("Delta=-1"));
    CHECK(run_binary("run " + f) == 3);
}

TEST_CASE("quantum engine agrees with the linear engine in the weak-drive limit") {
    auto j = small_quantum(1, 1, 1e-4);
    j["coupling"] = {{"n", 1.0}, {"g", 0.3}};
    j["cavity"] = {{"kappa", 100.0}, {"kappa_r", 40.0}};
    j["scan"] = {{"from", -2.0}, {"to", 2.0}, {"points", 5}};
    const auto f = write_json("weak.json", j);
    auto o = verb("run", f);
    const auto q = parse(run(o).out);
    o.engine = "linear";
    const auto l = parse(run(o).out);
    REQUIRE(q.rows.size() == 5);
    REQUIRE(l.rows.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        INFO("Delta=" << q.rows[i][0]);
        CHECK_THAT(q.rows[i][1], WithinAbs(l.rows[i][1], 1e-3));
        CHECK_THAT(q.rows[i][2], WithinAbs(l.rows[i][2], 1e-3));
    }
}
