#pragma once

// Plot-ready emitters. CSV numbers use 17 significant digits so a rerun of
// the same scenario is byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nuqo/linear_response.hpp"
#include "nuqo/scenario.hpp"

namespace nuqo {

inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_header(std::ostream& os, const std::string& hash, const std::vector<std::string>& metadata) {
    os << "# scenario=" << hash << " units=gamma\n";
    for (const auto& m : metadata) os << "# " << m << '\n';
}

inline void write_spectrum_csv(std::ostream& os, const std::string& hash, const Spectrum& s,
                               const std::vector<std::string>& metadata = {}) {
    write_header(os, hash, metadata);
    os << "abscissa,re_R,im_R,abs2_R\n";
    for (std::size_t i = 0; i < s.abscissa.size(); ++i)
        os << format_number(s.abscissa[i]) << ',' << format_number(s.amplitude[i].real()) << ','
           << format_number(s.amplitude[i].imag()) << ',' << format_number(s.intensity[i]) << '\n';
}

inline void write_g2_csv(std::ostream& os, const std::string& hash, std::span<const double> tau,
                         std::span<const double> g2, const std::vector<std::string>& metadata = {}) {
    write_header(os, hash, metadata);
    os << "tau,g2\n";
    for (std::size_t i = 0; i < tau.size(); ++i) os << format_number(tau[i]) << ',' << format_number(g2[i]) << '\n';
}

struct CsvTable {
    std::vector<std::string> comments;  // without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    while (std::getline(is, line)) {
        if (line.rfind("# ", 0) == 0) {
            t.comments.push_back(line.substr(2));
        } else if (t.columns.empty()) {
            t.columns = split(line);
        } else if (!line.empty()) {
            std::vector<double> row;
            for (const auto& c : split(line)) row.push_back(std::strtod(c.c_str(), nullptr));
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

/// Single polyline with a framed axis box and min/max labels.
inline std::string svg_plot(std::span<const double> x, std::span<const double> y, const std::string& xlabel,
                            const std::string& ylabel) {
    constexpr double w = 640, h = 400, m = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        if (first) {
            x0 = x1 = x[i];
            y0 = y1 = y[i];
            first = false;
        }
        x0 = std::min(x0, x[i]);
        x1 = std::max(x1, x[i]);
        y0 = std::min(y0, y[i]);
        y1 = std::max(y1, y[i]);
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect x=\"" << m << "\" y=\"" << m / 2 << "\" width=\"" << w - 1.5 * m << "\" height=\"" << h - 1.5 * m
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        const double px = m + (x[i] - x0) / (x1 - x0) * (w - 1.5 * m);
        const double py = h - m + (y0 - y[i]) / (y1 - y0) * (h - 1.5 * m);
        os << px << ',' << py << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os << "<text x=\"12\" y=\"" << h / 2 << "\" transform=\"rotate(-90 12 " << h / 2
       << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    os << "<text x=\"" << m << "\" y=\"" << h - m + 15 << "\">" << format_number(x0) << "</text>\n";
    os << "<text x=\"" << w - m / 2 << "\" y=\"" << h - m + 15 << "\" text-anchor=\"end\">" << format_number(x1)
       << "</text>\n";
    os << "<text x=\"" << m - 4 << "\" y=\"" << h - m << "\" text-anchor=\"end\">" << format_number(y0) << "</text>\n";
    os << "<text x=\"" << m - 4 << "\" y=\"" << m / 2 + 10 << "\" text-anchor=\"end\">" << format_number(y1)
       << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Level-scheme export

inline json levelscheme_to_json(const EffectiveLevelSystem& sys, const TransitionTable& table,
                                const std::string& hash) {
    using schema::to_json;
    json out;
    out["scenario"] = hash;
    out["units"] = "gamma";
    json e = json::array(), b = json::array(), d = json::array(), w = json::array(), tr = json::array();
    for (int mu = 0; mu < kTransitionCount; ++mu) {
        e.push_back(sys.energies[mu]);
        b.push_back(to_json(sys.drive[mu]));
        d.push_back(to_json(sys.detection[mu]));
        json row = json::array();
        for (int nu = 0; nu < kTransitionCount; ++nu) row.push_back(to_json(sys.coupling(mu, nu)));
        w.push_back(row);
        const auto& t = table[mu];
        tr.push_back({{"index", t.index},
                      {"ground", t.ground},
                      {"excited", t.excited},
                      {"cg", t.cg},
                      {"polarization", to_string(t.polarization)}});
    }
    out["energies"] = e;
    out["drive"] = b;
    out["coupling"] = w;
    out["detection"] = d;
    out["lamb_shift"] = sys.lamb_shift;
    out["decay"] = sys.decay;
    out["linewidth"] = sys.linewidth;
    out["electronic"] = to_json(sys.electronic);
    out["output_factor"] = to_json(sys.output_factor);
    out["transitions"] = tr;

    const auto summary = summarize_level_scheme(sys);
    json pairs = json::array();
    for (const auto& [mu, nu] : summary.couplings) pairs.push_back({mu, nu});
    out["summary"] = {{"driven", summary.driven}, {"active", summary.active}, {"couplings", pairs}};
    return out;
}

inline EffectiveLevelSystem levelscheme_from_json(const json& j) {
    schema::Issues is;
    EffectiveLevelSystem sys;
    auto cnum = [&](const json& v, const std::string& path) { return schema::complex_number(v, path, is).value_or(0.0); };
    auto list = [&](const char* key) -> const json* {
        const json* v = schema::member(j, key, "$", is, true);
        if (v && (!v->is_array() || v->size() != kTransitionCount)) {
            is.push_back({key, "expected six entries"});
            return nullptr;
        }
        return v;
    };
    if (const json* v = list("energies"))
        for (int mu = 0; mu < kTransitionCount; ++mu)
            sys.energies[mu] = schema::number((*v)[mu], "energies", is).value_or(0.0);
    if (const json* v = list("drive"))
        for (int mu = 0; mu < kTransitionCount; ++mu) sys.drive[mu] = cnum((*v)[mu], "drive");
    if (const json* v = list("detection"))
        for (int mu = 0; mu < kTransitionCount; ++mu) sys.detection[mu] = cnum((*v)[mu], "detection");
    if (const json* v = list("coupling"))
        for (int mu = 0; mu < kTransitionCount; ++mu) {
            if (!(*v)[mu].is_array() || (*v)[mu].size() != kTransitionCount) {
                is.push_back({"coupling", "expected a 6x6 matrix"});
                break;
            }
            for (int nu = 0; nu < kTransitionCount; ++nu) sys.coupling(mu, nu) = cnum((*v)[mu][nu], "coupling");
        }
    sys.lamb_shift = schema::number(j, "lamb_shift", "$", is, true).value_or(0.0);
    sys.decay = schema::number(j, "decay", "$", is, true).value_or(0.0);
    sys.linewidth = schema::number(j, "linewidth", "$", is, true).value_or(1.0);
    if (const json* v = schema::member(j, "electronic", "$", is, true)) sys.electronic = cnum(*v, "electronic");
    if (const json* v = schema::member(j, "output_factor", "$", is, true)) sys.output_factor = cnum(*v, "output_factor");
    if (!is.empty()) throw InvalidScenario(std::move(is));
    return sys;
}

}  // namespace nuqo
