// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qipm.hpp"
#include "sbd.hpp"

namespace rpems::io {

namespace fs = std::filesystem;

// Shortest round-trip-exact representation is not needed; %.17g is exact.
inline std::string num(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// m, n (1-based), re, im, magnitude, phase_rad
inline void write_current_csv(const fs::path& path, const SurfaceCurrent& j)
{
    std::ostringstream o;
    o << "# iota " << num(j.iota.x()) << ' ' << num(j.iota.y()) << ' ' << num(j.iota.z()) << '\n';
    o << "m,n,re,im,magnitude,phase_rad\n";
    for (int i = 0; i < j.m; ++i)
        for (int k = 0; k < j.n; ++k) {
            const cplx c = j.coeffs[static_cast<std::size_t>(i) * j.n + k];
            o << i + 1 << ',' << k + 1 << ',' << num(c.real()) << ',' << num(c.imag()) << ',' << num(std::abs(c)) << ','
              << num(std::arg(c)) << '\n';
        }
    write_text(path, o.str());
}

inline SurfaceCurrent read_current_csv(const fs::path& path)
{
    std::istringstream in(read_text(path));
    std::string line;
    Vec3 iota = Vec3::UnitY();
    struct Entry {
        int m, n;
        cplx c;
    };
    std::vector<Entry> entries;
    int mm = 0, nn = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# iota", 0) == 0) {
            std::istringstream ls(line.substr(6));
            ls >> iota.x() >> iota.y() >> iota.z();
            continue;
        }
        if (line[0] == '#' || line.rfind("m,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ls, tok, ',')) f.push_back(tok);
        if (f.size() < 4) throw ValidationError("malformed current row in '" + path.string() + "'");
        try {
            entries.push_back({std::stoi(f[0]), std::stoi(f[1]), {std::stod(f[2]), std::stod(f[3])}});
        } catch (const std::exception&) {
            throw ValidationError("malformed current row in '" + path.string() + "'");
        }
        mm = std::max(mm, entries.back().m);
        nn = std::max(nn, entries.back().n);
    }
    require(mm >= 1 && nn >= 1 && entries.size() == static_cast<std::size_t>(mm) * nn,
            "current file '" + path.string() + "' does not cover a full grid");
    SurfaceCurrent j(mm, nn, iota);
    for (const auto& e : entries) {
        require(e.m >= 1 && e.n >= 1, "current indices must be >= 1");
        j.coeffs[static_cast<std::size_t>(e.m - 1) * nn + (e.n - 1)] = e.c;
    }
    return j;
}

// One row per cell row, characters 0/1.
inline void write_states(const fs::path& path, const StateMatrix& st)
{
    std::string s;
    for (int i = 0; i < st.m; ++i) {
        for (int k = 0; k < st.n; ++k) s += st(i, k) ? '1' : '0';
        s += '\n';
    }
    write_text(path, s);
}

inline StateMatrix read_states(const fs::path& path)
{
    std::istringstream in(read_text(path));
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) rows.push_back(line);
    }
    require(!rows.empty(), "state file '" + path.string() + "' is empty");
    StateMatrix st(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < st.m; ++i) {
        require(rows[i].size() == static_cast<std::size_t>(st.n), "state file rows have unequal length");
        for (int k = 0; k < st.n; ++k) {
            const char ch = rows[i][k];
            require(ch == '0' || ch == '1', "state file may only contain 0 and 1");
            st(i, k) = ch == '1';
        }
    }
    return st;
}

// x, y, F_linear, F_dB
inline void write_footprint_csv(const fs::path& path, const ObservationGrid& grid, std::span<const double> power)
{
    std::ostringstream o;
    o << "x,y,f_linear,f_db\n";
    for (std::size_t s = 0; s < power.size(); ++s) {
        const Point2 p = grid.sample(s);
        o << num(p.x) << ',' << num(p.y) << ',' << num(power[s]) << ',' << num(db10(power[s])) << '\n';
    }
    write_text(path, o.str());
}

inline std::vector<double> read_footprint_csv(const fs::path& path)
{
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<double> p;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        for (int k = 0; k < 3; ++k) std::getline(ls, tok, ',');
        p.push_back(std::stod(tok));
    }
    return p;
}

// 8-bit grayscale map; row 0 is the top of the image (largest row index).
inline void write_pgm(const fs::path& path, int width, int height, std::span<const double> values, double lo, double hi)
{
    require(values.size() == static_cast<std::size_t>(width) * height, "heatmap size mismatch");
    std::string s = "P5\n" + std::to_string(width) + ' ' + std::to_string(height) + "\n255\n";
    const double span = hi > lo ? hi - lo : 1.0;
    for (int r = height - 1; r >= 0; --r)
        for (int c = 0; c < width; ++c) {
            double v = values[static_cast<std::size_t>(r) * width + c];
            if (!std::isfinite(v)) v = lo;
            const double t = std::clamp((v - lo) / span, 0.0, 1.0);
            s += static_cast<char>(static_cast<unsigned char>(std::lround(t * 255)));
        }
    write_text(path, s);
}

// Footprint in dB, clipped to a 60 dB window below the peak.
inline void write_footprint_pgm(const fs::path& path, const ObservationGrid& grid, std::span<const double> power)
{
    std::vector<double> db(power.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < power.size(); ++s) {
        db[s] = power[s] > 0 ? db10(power[s]) : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, db[s]);
    }
    if (!std::isfinite(peak)) peak = 0;
    write_pgm(path, grid.nx, grid.ny, db, peak - 60, peak);
}

// Cell phase map, transposed so image x follows the aperture n index.
inline void write_phase_pgm(const fs::path& path, const SurfaceCurrent& j)
{
    std::vector<double> ph(j.size());
    for (std::size_t c = 0; c < j.size(); ++c) ph[c] = std::arg(j.coeffs[c]);
    write_pgm(path, j.n, j.m, ph, -pi, pi);
}

inline void write_trace_csv(const fs::path& path, const IterationTrace& t)
{
    std::ostringstream o;
    o << "p,phi,xi\n";
    for (const auto& r : t.records) o << r.p << ',' << num(r.phi) << ',' << num(r.xi) << '\n';
    o << "# stop " << to_string(t.stop) << '\n';
    write_text(path, o.str());
}

inline void write_fitness_csv(const fs::path& path, const FitnessRecord& f)
{
    std::ostringstream o;
    o << "iteration,best_psi,mean_psi\n";
    for (std::size_t i = 0; i < f.best_psi.size(); ++i)
        o << i << ',' << num(f.best_psi[i]) << ',' << num(f.mean_psi[i]) << '\n';
    write_text(path, o.str());
}

// m, n, sigma_rad, valid
inline void write_sigma_csv(const fs::path& path, const PhaseErrorMap& e)
{
    std::ostringstream o;
    o << "m,n,sigma_rad,valid\n";
    for (int i = 0; i < e.m; ++i)
        for (int k = 0; k < e.n; ++k) {
            const std::size_t c = static_cast<std::size_t>(i) * e.n + k;
            o << i + 1 << ',' << k + 1 << ',' << num(e.sigma[c]) << ',' << int(e.valid[c]) << '\n';
        }
    write_text(path, o.str());
}

} // namespace rpems::io
