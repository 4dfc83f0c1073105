// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "geometry.hpp"

namespace rpems {

// Plane wave illuminating the skin, with derived quantities at the working frequency.
struct IncidentWave {
    double theta_inc = 0; // rad
    double phi_inc = 0;   // rad
    cplx e_perp{1.0, 0.0};
    cplx e_par{1.0, 0.0};
    double frequency = 3.5e9;

    double k0 = 0;
    double omega = 0;
    Vec3 k_inc = Vec3::Zero();
    Vec3 k_ref = Vec3::Zero();
    Vec3 perp_hat = Vec3::Zero();
    Vec3 par_hat = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();

    static IncidentWave make(double theta, double phi, cplx e_perp, cplx e_par, double f0)
    {
        require(f0 > 0, "frequency_f0 must be > 0");
        require(std::isfinite(theta) && std::isfinite(phi), "incident angles must be finite");
        require(theta >= 0 && theta < pi / 2, "incident.theta_inc must lie in [0, 90) deg");
        IncidentWave w;
        w.theta_inc = theta;
        w.phi_inc = phi;
        w.e_perp = e_perp;
        w.e_par = e_par;
        w.frequency = f0;
        w.omega = 2 * pi * f0;
        w.k0 = w.omega / c0;
        const Vec3 khat(-std::sin(theta) * std::cos(phi), -std::sin(theta) * std::sin(phi), -std::cos(theta));
        w.k_inc = w.k0 * khat;
        w.k_ref = Vec3(w.k_inc.x(), w.k_inc.y(), -w.k_inc.z());
        w.perp_hat = Vec3(-std::sin(phi), std::cos(phi), 0.0);
        w.par_hat = khat.cross(w.perp_hat);
        return w;
    }

    // Complex incident field vector at the origin.
    Vec3c amplitude() const { return e_perp * perp_hat.cast<cplx>() + e_par * par_hat.cast<cplx>(); }

    IncidentWave scaled(double c) const { return make(theta_inc, phi_inc, c * e_perp, c * e_par, frequency); }
};

// Midpoint-sampled rectangle on the ground plane z = 0.
struct ObservationGrid {
    double x_lo = 0, x_hi = 75;
    double y_lo = 0, y_hi = 60;
    int nx = 75, ny = 60;

    void validate() const
    {
        require(nx >= 2 && ny >= 2, "obs.nx and obs.ny must be >= 2");
        require(std::isfinite(x_lo) && std::isfinite(x_hi) && x_hi > x_lo, "obs.x_range must be non-degenerate");
        require(std::isfinite(y_lo) && std::isfinite(y_hi) && y_hi > y_lo, "obs.y_range must be non-degenerate");
        require(x_lo >= 0, "obs.x_range must lie in the half-space x >= 0");
    }

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    double dx() const { return (x_hi - x_lo) / nx; }
    double dy() const { return (y_hi - y_lo) / ny; }
    double area_element() const { return dx() * dy(); }
    // Sample s = j*nx + i.
    Point2 sample(std::size_t s) const
    {
        const auto i = static_cast<double>(s % nx), j = static_cast<double>(s / nx);
        return {x_lo + (i + 0.5) * dx(), y_lo + (j + 0.5) * dy()};
    }

    bool operator==(const ObservationGrid&) const = default;
};

struct DesiredFootprint {
    std::vector<Polygon> coverage_regions;
    double level_in_db = -10;
    double level_out_db = -50;
    ObservationGrid grid;
    std::vector<double> mask_db;
    std::vector<std::uint8_t> inside;

    std::size_t inside_count() const
    {
        return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), std::uint8_t{1}));
    }

    // Linear target power for a given 0 dB reference.
    std::vector<double> desired_power(double p_ref) const
    {
        std::vector<double> out(mask_db.size());
        for (std::size_t s = 0; s < out.size(); ++s)
            out[s] = std::isinf(mask_db[s]) && mask_db[s] < 0 ? 0.0 : p_ref * std::pow(10.0, mask_db[s] / 10.0);
        return out;
    }
};

inline DesiredFootprint build_desired_footprint(std::vector<Polygon> regions, double level_in_db,
                                                double level_out_db, const ObservationGrid& grid)
{
    grid.validate();
    require(!std::isnan(level_in_db) && !std::isnan(level_out_db), "footprint levels must not be NaN");
    require(level_in_db > level_out_db, "level_in_db must be greater than level_out_db");
    for (std::size_t k = 0; k < regions.size(); ++k)
        validate_polygon(regions[k], "coverage_regions[" + std::to_string(k) + "]");
    DesiredFootprint fp;
    fp.coverage_regions = std::move(regions);
    fp.level_in_db = level_in_db;
    fp.level_out_db = level_out_db;
    fp.grid = grid;
    fp.mask_db.assign(grid.size(), level_out_db);
    fp.inside.assign(grid.size(), 0);
    for (std::size_t s = 0; s < grid.size(); ++s) {
        const Point2 p = grid.sample(s);
        for (const auto& poly : fp.coverage_regions) {
            if (contains(poly, p)) {
                fp.inside[s] = 1;
                fp.mask_db[s] = level_in_db;
                break;
            }
        }
    }
    return fp;
}

struct Spherical {
    double r = 0;
    double theta = 0;
    double phi = 0;
};

// Ground-plane point to skin-centred spherical coordinates. The local polar
// axis is the global x axis; azimuth is measured from global y towards z.
inline Spherical global_to_local(const Vec3& p, double d)
{
    const double y = p.y(), z = p.z() - d;
    if (!(p.x() > 0)) {
        if (p.x() == 0 && y == 0 && z == 0) throw ValidationError("point coincides with the skin centre");
        throw ValidationError("point lies outside the observation half-space x > 0");
    }
    Spherical s;
    s.r = std::sqrt(p.x() * p.x() + y * y + z * z);
    s.theta = std::atan2(std::sqrt(y * y + z * z), p.x());
    s.phi = std::atan2(z, y);
    return s;
}

inline Vec3 local_to_global(const Spherical& s, double d)
{
    return {s.r * std::cos(s.theta), s.r * std::sin(s.theta) * std::cos(s.phi),
            d + s.r * std::sin(s.theta) * std::sin(s.phi)};
}

struct ScenarioSpec {
    std::string name = "scenario";
    int m_cells = 10;
    int n_cells = 10;
    double cell_dx = 0.0428;
    double cell_dy = 0.0428;
    double height_d = 5.0;
    double frequency_f0 = 3.5e9;
    IncidentWave incident = IncidentWave::make(0, 0, 1, 1, 3.5e9);
    ObservationGrid obs;
    std::vector<DesiredFootprint> footprints;
    std::uint64_t rng_seed = 0;

    QipmConfig qipm;
    GaConfig ga;
    AtomConfig atom;
    SurrogateConfig surrogate;
    OperatorConfig op;
    std::optional<std::vector<double>> atom_descriptor; // fixed g, skips design

    std::size_t cells() const { return static_cast<std::size_t>(m_cells) * static_cast<std::size_t>(n_cells); }
    int time_steps() const { return static_cast<int>(footprints.size()); }

    void validate() const
    {
        require(m_cells >= 1, "m_cells must be >= 1");
        require(n_cells >= 1, "n_cells must be >= 1");
        require(cell_dx > 0, "cell_dx must be > 0");
        require(cell_dy > 0, "cell_dy must be > 0");
        require(height_d > 0, "height_d must be > 0");
        require(frequency_f0 > 0, "frequency_f0 must be > 0");
        require(incident.frequency == frequency_f0, "incident wave frequency must equal frequency_f0");
        obs.validate();
        require(!footprints.empty(), "footprints must be non-empty");
        for (const auto& f : footprints) require(f.grid == obs, "footprint grid must match obs");
        qipm.validate();
        ga.validate();
        atom.validate();
        surrogate.validate();
        op.validate();
        if (atom_descriptor) require(atom_descriptor->size() == 16, "atom_descriptor must have 16 entries");
    }
};

// x = (m - (M+1)/2) dx, 1-based indices.
inline Point2 cell_center(int m, int n, const ScenarioSpec& spec)
{
    if (m < 1 || m > spec.m_cells || n < 1 || n > spec.n_cells)
        throw ValidationError("cell index (" + std::to_string(m) + ", " + std::to_string(n) + ") out of range");
    return {(m - (spec.m_cells + 1) / 2.0) * spec.cell_dx, (n - (spec.n_cells + 1) / 2.0) * spec.cell_dy};
}

// ---------------------------------------------------------------------------
// JSON scenario files

inline constexpr int scenario_schema_version = 1;

namespace detail {

using nlohmann::json;

inline double level_from_json(const json& v, const std::string& field)
{
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && v.get<std::string>() == "-inf") return -std::numeric_limits<double>::infinity();
    throw ValidationError(field + ": expected a number or \"-inf\"");
}

inline cplx complex_from_json(const json& v, const std::string& field)
{
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    throw ValidationError(field + ": expected a number or [re, im]");
}

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& path)
{
    const std::string field = path.empty() ? key : path + "." + key;
    if (!obj.contains(key)) throw ValidationError("missing field '" + field + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("field '" + field + "' has the wrong type");
    }
}

template <class T>
void get_optional(const json& obj, const std::string& key, const std::string& path, T& out)
{
    if (obj.contains(key)) out = get_field<T>(obj, key, path);
}

inline std::pair<double, double> range_from_json(const json& obj, const std::string& key, const std::string& path)
{
    const auto v = get_field<std::vector<double>>(obj, key, path);
    if (v.size() != 2) throw ValidationError("field '" + path + "." + key + "' must be [lo, hi]");
    return {v[0], v[1]};
}

} // namespace detail

inline ScenarioSpec scenario_from_json(const nlohmann::json& j)
{
    using detail::get_field;
    using detail::get_optional;
    if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
    const int version = get_field<int>(j, "schema_version", "");
    if (version != scenario_schema_version)
        throw ValidationError("unsupported schema_version " + std::to_string(version));

    ScenarioSpec s;
    get_optional(j, "name", "", s.name);
    s.m_cells = get_field<int>(j, "m_cells", "");
    s.n_cells = get_field<int>(j, "n_cells", "");
    require(s.m_cells >= 1, "m_cells must be >= 1");
    require(s.n_cells >= 1, "n_cells must be >= 1");
    s.cell_dx = get_field<double>(j, "cell_dx", "");
    s.cell_dy = get_field<double>(j, "cell_dy", "");
    s.height_d = get_field<double>(j, "height_d", "");
    s.frequency_f0 = get_field<double>(j, "frequency_f0", "");
    require(s.frequency_f0 > 0, "frequency_f0 must be > 0");

    double th = 0, ph = 0;
    cplx ep{1, 0}, el{1, 0};
    if (j.contains("incident")) {
        const auto& inc = j["incident"];
        get_optional(inc, "theta_inc", "incident", th);
        get_optional(inc, "phi_inc", "incident", ph);
        if (inc.contains("e_perp")) ep = detail::complex_from_json(inc["e_perp"], "incident.e_perp");
        if (inc.contains("e_par")) el = detail::complex_from_json(inc["e_par"], "incident.e_par");
    }
    s.incident = IncidentWave::make(deg2rad(th), deg2rad(ph), ep, el, s.frequency_f0);

    const auto& o = j.contains("obs") ? j["obs"] : throw ValidationError("missing field 'obs'");
    std::tie(s.obs.x_lo, s.obs.x_hi) = detail::range_from_json(o, "x_range", "obs");
    std::tie(s.obs.y_lo, s.obs.y_hi) = detail::range_from_json(o, "y_range", "obs");
    s.obs.nx = get_field<int>(o, "nx", "obs");
    s.obs.ny = get_field<int>(o, "ny", "obs");
    s.obs.validate();

    const auto fps = get_field<nlohmann::json>(j, "footprints", "");
    if (!fps.is_array() || fps.empty()) throw ValidationError("footprints must be a non-empty array");
    for (std::size_t t = 0; t < fps.size(); ++t) {
        const std::string path = "footprints[" + std::to_string(t) + "]";
        const auto& f = fps[t];
        std::vector<Polygon> regions;
        if (f.contains("coverage_regions")) {
            const auto& rs = f["coverage_regions"];
            if (!rs.is_array()) throw ValidationError(path + ".coverage_regions must be an array");
            for (const auto& r : rs) {
                Polygon poly;
                if (!r.is_array()) throw ValidationError(path + ".coverage_regions entries must be vertex lists");
                for (const auto& v : r) {
                    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                        throw ValidationError(path + ".coverage_regions vertices must be [x, y]");
                    poly.push_back({v[0].get<double>(), v[1].get<double>()});
                }
                regions.push_back(std::move(poly));
            }
        }
        const double lin = f.contains("level_in_db") ? detail::level_from_json(f["level_in_db"], path + ".level_in_db") : -10.0;
        const double lout = f.contains("level_out_db") ? detail::level_from_json(f["level_out_db"], path + ".level_out_db") : -50.0;
        try {
            s.footprints.push_back(build_desired_footprint(std::move(regions), lin, lout, s.obs));
        } catch (const ValidationError& e) {
            throw ValidationError(path + ": " + e.what());
        }
    }
    if (j.contains("rng_seed")) s.rng_seed = get_field<std::uint64_t>(j, "rng_seed", "");

    // Every solver seed defaults to the scenario seed.
    s.qipm.seed = s.ga.seed = s.atom.seed = s.surrogate.seed = s.rng_seed;
    if (j.contains("qipm")) {
        const auto& q = j["qipm"];
        get_optional(q, "max_iters", "qipm", s.qipm.max_iters);
        get_optional(q, "conv_threshold", "qipm", s.qipm.conv_threshold);
        get_optional(q, "svd_rel_threshold", "qipm", s.qipm.svd_rel_threshold);
        get_optional(q, "seed", "qipm", s.qipm.seed);
        if (q.contains("quantizer")) {
            const auto m = get_field<std::string>(q, "quantizer", "qipm");
            if (m == "paired") s.qipm.quantizer = QuantizerMode::paired;
            else if (m == "product") s.qipm.quantizer = QuantizerMode::product;
            else throw ValidationError("qipm.quantizer must be \"paired\" or \"product\"");
        }
    }
    if (j.contains("ga")) {
        const auto& g = j["ga"];
        get_optional(g, "population", "ga", s.ga.population);
        get_optional(g, "max_iters", "ga", s.ga.max_iters);
        get_optional(g, "fitness_threshold", "ga", s.ga.fitness_threshold);
        get_optional(g, "crossover_rate", "ga", s.ga.crossover_rate);
        get_optional(g, "mutation_rate", "ga", s.ga.mutation_rate);
        get_optional(g, "elitism", "ga", s.ga.elitism);
        get_optional(g, "seed", "ga", s.ga.seed);
        get_optional(g, "warm_start", "ga", s.ga.warm_start);
    }
    if (j.contains("atom")) {
        const auto& a = j["atom"];
        get_optional(a, "budget", "atom", s.atom.budget);
        get_optional(a, "population", "atom", s.atom.population);
        get_optional(a, "seed", "atom", s.atom.seed);
        if (a.contains("descriptor")) s.atom_descriptor = get_field<std::vector<double>>(a, "descriptor", "atom");
    }
    if (j.contains("surrogate")) {
        const auto& g = j["surrogate"];
        if (g.contains("twin")) {
            const auto t = get_field<std::string>(g, "twin", "surrogate");
            if (t == "oracle") s.surrogate.twin = TwinKind::oracle;
            else if (t == "kriging") s.surrogate.twin = TwinKind::kriging;
            else throw ValidationError("surrogate.twin must be \"oracle\" or \"kriging\"");
        }
        get_optional(g, "samples", "surrogate", s.surrogate.samples);
        get_optional(g, "box_rel", "surrogate", s.surrogate.box_rel);
        get_optional(g, "selection_subset", "surrogate", s.surrogate.selection_subset);
        get_optional(g, "seed", "surrogate", s.surrogate.seed);
    }
    if (j.contains("operator")) get_optional(j["operator"], "memory_budget_mb", "operator", s.op.memory_budget_mb);

    s.validate();
    return s;
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open scenario file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ValidationError(path.string() + ":" + std::to_string(line) + ": JSON parse error: " + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s)
{
    using nlohmann::json;
    auto lvl = [](double v) -> json { return std::isinf(v) ? json("-inf") : json(v); };
    json j;
    j["schema_version"] = scenario_schema_version;
    j["name"] = s.name;
    j["m_cells"] = s.m_cells;
    j["n_cells"] = s.n_cells;
    j["cell_dx"] = s.cell_dx;
    j["cell_dy"] = s.cell_dy;
    j["height_d"] = s.height_d;
    j["frequency_f0"] = s.frequency_f0;
    j["incident"] = {{"theta_inc", rad2deg(s.incident.theta_inc)},
                     {"phi_inc", rad2deg(s.incident.phi_inc)},
                     {"e_perp", {s.incident.e_perp.real(), s.incident.e_perp.imag()}},
                     {"e_par", {s.incident.e_par.real(), s.incident.e_par.imag()}}};
    j["obs"] = {{"x_range", {s.obs.x_lo, s.obs.x_hi}}, {"y_range", {s.obs.y_lo, s.obs.y_hi}},
                {"nx", s.obs.nx}, {"ny", s.obs.ny}};
    j["footprints"] = json::array();
    for (const auto& f : s.footprints) {
        json regions = json::array();
        for (const auto& poly : f.coverage_regions) {
            json vs = json::array();
            for (const auto& p : poly) vs.push_back({p.x, p.y});
            regions.push_back(vs);
        }
        j["footprints"].push_back(
            {{"coverage_regions", regions}, {"level_in_db", lvl(f.level_in_db)}, {"level_out_db", lvl(f.level_out_db)}});
    }
    j["rng_seed"] = s.rng_seed;
    j["qipm"] = {{"max_iters", s.qipm.max_iters},
                 {"conv_threshold", s.qipm.conv_threshold},
                 {"svd_rel_threshold", s.qipm.svd_rel_threshold},
                 {"seed", s.qipm.seed},
                 {"quantizer", s.qipm.quantizer == QuantizerMode::paired ? "paired" : "product"}};
    j["ga"] = {{"population", s.ga.population},       {"max_iters", s.ga.max_iters},
               {"fitness_threshold", s.ga.fitness_threshold}, {"crossover_rate", s.ga.crossover_rate},
               {"mutation_rate", s.ga.mutation_rate}, {"elitism", s.ga.elitism},
               {"seed", s.ga.seed},                   {"warm_start", s.ga.warm_start}};
    j["atom"] = {{"budget", s.atom.budget}, {"population", s.atom.population}, {"seed", s.atom.seed}};
    if (s.atom_descriptor) j["atom"]["descriptor"] = *s.atom_descriptor;
    j["surrogate"] = {{"twin", s.surrogate.twin == TwinKind::oracle ? "oracle" : "kriging"},
                      {"samples", s.surrogate.samples},
                      {"box_rel", s.surrogate.box_rel},
                      {"selection_subset", s.surrogate.selection_subset},
                      {"seed", s.surrogate.seed}};
    j["operator"] = {{"memory_budget_mb", s.op.memory_budget_mb}};
    return j;
}

// The square-footprint layout used throughout the examples and tests.
inline ScenarioSpec square_scenario(int cells, std::uint64_t seed = 0)
{
    ScenarioSpec s;
    s.name = "square-" + std::to_string(cells);
    s.m_cells = s.n_cells = cells;
    s.cell_dx = s.cell_dy = c0 / 3.5e9 / 2.0;
    s.height_d = 5.0;
    s.frequency_f0 = 3.5e9;
    s.incident = IncidentWave::make(0, 0, 1, 1, s.frequency_f0);
    s.obs = ObservationGrid{0, 75, 0, 60, 75, 60};
    s.footprints.push_back(build_desired_footprint({{{20, 25}, {30, 25}, {30, 35}, {20, 35}}}, -10, -50, s.obs));
    s.rng_seed = seed;
    s.qipm.seed = s.ga.seed = s.atom.seed = s.surrogate.seed = seed;
    return s;
}

} // namespace rpems
