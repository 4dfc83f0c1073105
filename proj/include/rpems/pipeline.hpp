// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <ctime>
#include <iomanip>
#include <map>
#include <set>
#include <memory>

#include <json.hpp>

#include "io.hpp"
#include "surrogate.hpp"

namespace rpems {

enum class Method { qipm, ipm };

inline const char* to_string(Method m) { return m == Method::qipm ? "qipm" : "ipm"; }

inline Method parse_method(const std::string& s)
{
    if (s == "qipm") return Method::qipm;
    if (s == "ipm") return Method::ipm;
    throw ValidationError("unknown method '" + s + "' (expected qipm or ipm)");
}

struct PipelineOptions {
    std::vector<Method> methods{Method::qipm, Method::ipm};
    std::filesystem::path out_dir = "runs";
    std::string run_name; // empty: <timestamp>-<seed>
    std::optional<std::filesystem::path> atom_file;  // JSON with "g"
    std::optional<std::filesystem::path> model_file; // trained kriging model
    bool heatmaps = true;
};

// Everything the online stages share for one scenario.
struct Workbench {
    ScenarioSpec spec;
    AtomBounds bounds = AtomBounds::standard();
    AtomDesign atom;
    std::unique_ptr<AtomTwin> twin;
    std::unique_ptr<OracleTwin> oracle;
    Alphabet alphabet;
    std::unique_ptr<CellCurrentModel> twin_cells;
    std::unique_ptr<CellCurrentModel> oracle_cells;
    std::unique_ptr<RadiationOperator> op;
    std::vector<cplx> rotation;
    double p_ref = 0;
};

namespace pipeline_detail {

using clock = std::chrono::steady_clock;

inline double since(clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); }

template <class F>
auto stage(const char* name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("stage '") + name + "': " + e.what());
    } catch (const std::exception& e) {
        throw Error(std::string("stage '") + name + "': " + e.what());
    }
}

inline nlohmann::json cjson(cplx c) { return nlohmann::json::array({c.real(), c.imag()}); }

inline std::string default_run_name(std::uint64_t seed)
{
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream o;
    o << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << '-' << seed;
    return o.str();
}

} // namespace pipeline_detail

inline AtomDescriptor read_atom_file(const std::filesystem::path& path)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    const auto g = j.contains("g") ? j["g"] : throw ValidationError(path.string() + ": missing field 'g'");
    require(g.is_array() && g.size() == 16, path.string() + ": 'g' must hold 16 numbers");
    AtomDescriptor d;
    for (std::size_t u = 0; u < 16; ++u) d.g[u] = g[u].get<double>();
    return d;
}

inline nlohmann::json atom_summary(const AtomDescriptor& g, double f0, const AtomBounds& bounds)
{
    const auto off = oracle_reflection(g, 0, f0, bounds), on = oracle_reflection(g, 1, f0, bounds);
    const auto gaps = phase_gaps(off, on);
    const double loss = std::max({-20 * std::log10(std::abs(off.gamma_pp)), -20 * std::log10(std::abs(on.gamma_pp)),
                                  -20 * std::log10(std::abs(off.gamma_ll)), -20 * std::log10(std::abs(on.gamma_ll))});
    const double cross = std::max(20 * std::log10(std::abs(off.gamma_pl)), 20 * std::log10(std::abs(on.gamma_pl)));
    return {{"g", g.g},
            {"phi", design_cost(g, f0, bounds)},
            {"gap_perp_deg", rad2deg(gaps[0])},
            {"gap_par_deg", rad2deg(gaps[1])},
            {"max_loss_db", loss},
            {"max_cross_pol_db", cross}};
}

// Design (or load) the cell, build the twin, alphabet and radiation operator.
inline Workbench prepare(const ScenarioSpec& spec, const PipelineOptions& opt, nlohmann::json& timings)
{
    using namespace pipeline_detail;
    spec.validate();
    Workbench wb;
    wb.spec = spec;

    auto t0 = clock::now();
    stage("atom", [&] {
        if (spec.atom_descriptor) {
            std::copy(spec.atom_descriptor->begin(), spec.atom_descriptor->end(), wb.atom.g.g.begin());
            wb.atom.phi = design_cost(wb.atom.g, spec.frequency_f0, wb.bounds);
        } else if (opt.atom_file) {
            wb.atom.g = read_atom_file(*opt.atom_file);
            wb.atom.phi = design_cost(wb.atom.g, spec.frequency_f0, wb.bounds);
        } else {
            wb.atom = optimize_atom(wb.bounds, spec.atom.budget, spec.atom.seed, spec.frequency_f0, spec.atom.population);
        }
        require(wb.atom.g.tied(), "atom descriptor must honour the parameter ties");
        return 0;
    });
    timings["atom"] = since(t0);

    t0 = clock::now();
    stage("twin", [&] {
        wb.oracle = std::make_unique<OracleTwin>(spec.incident, wb.bounds);
        if (spec.surrogate.twin == TwinKind::oracle) {
            wb.twin = std::make_unique<OracleTwin>(spec.incident, wb.bounds);
        } else if (opt.model_file) {
            wb.twin = std::make_unique<KrigingTwin>(std::make_shared<KrigingModel>(KrigingModel::load(*opt.model_file)));
        } else {
            const auto ts = sample_training_set(*wb.oracle, wb.atom.g, spec.surrogate.box_rel, spec.surrogate.samples,
                                                spec.surrogate.seed, wb.bounds);
            HyperPolicy hp;
            hp.selection_subset = spec.surrogate.selection_subset;
            wb.twin = std::make_unique<KrigingTwin>(std::make_shared<KrigingModel>(KrigingModel::train(ts, hp)));
        }
        return 0;
    });
    timings["twin"] = since(t0);

    t0 = clock::now();
    stage("alphabet", [&] {
        wb.alphabet = derive_alphabet({wb.twin->response(wb.atom.g, 0), wb.twin->response(wb.atom.g, 1)}, spec.incident,
                                      spec.cell_dx, spec.cell_dy);
        wb.twin_cells = std::make_unique<CellCurrentModel>(*wb.twin, wb.atom.g, spec, wb.alphabet.iota);
        wb.oracle_cells = std::make_unique<CellCurrentModel>(*wb.oracle, wb.atom.g, spec, wb.alphabet.iota);
        wb.rotation = illumination_phase(spec);
        return 0;
    });
    timings["alphabet"] = since(t0);

    t0 = clock::now();
    stage("operator", [&] {
        wb.op = std::make_unique<RadiationOperator>(assemble_operator(spec));
        wb.p_ref = reference_power(*wb.twin_cells, *wb.op);
        return 0;
    });
    timings["operator"] = since(t0);
    return wb;
}

struct StepOutcome {
    ReferenceCurrent reference;
    ConfigureResult config;
    SurfaceCurrent realized;
    std::vector<double> power;
    Coverage coverage;
    PhaseErrorMap sigma;
    double psi_oracle = 0;
    double phi_realized = 0;
    double seconds_reference = 0;
    double seconds_configure = 0;
};

// Reference current, configuration and realized footprint for one target.
inline StepOutcome solve_step(const Workbench& wb, Method method, int t, const std::optional<StateMatrix>& warm)
{
    using namespace pipeline_detail;
    const auto& spec = wb.spec;
    const auto& fp = spec.footprints[static_cast<std::size_t>(t)];
    const auto desired = fp.desired_power(wb.p_ref);
    const double da = spec.obs.area_element();
    StepOutcome out;
    QipmConfig qc = spec.qipm;
    qc.seed = spec.qipm.seed + static_cast<std::uint64_t>(t);
    auto t0 = clock::now();
    out.reference = stage(to_string(method), [&] {
        return method == Method::qipm ? run_qipm(*wb.op, desired, da, wb.alphabet, qc, wb.rotation)
                                      : run_ipm(*wb.op, desired, da, wb.alphabet, qc, wb.rotation);
    });
    out.seconds_reference = since(t0);
    if (method == Method::qipm && !is_feasible(out.reference.current, wb.alphabet, wb.rotation))
        throw Error("stage 'qipm': reference current left the feasible set");

    GaConfig gc = spec.ga;
    gc.seed = spec.ga.seed + static_cast<std::uint64_t>(t);
    t0 = clock::now();
    out.config = stage("configure", [&] {
        return configure(out.reference.current, *wb.twin_cells, gc, gc.warm_start ? warm : std::nullopt);
    });
    out.seconds_configure = since(t0);

    out.realized = wb.oracle_cells->current(out.config.states);
    out.psi_oracle = exact_psi(out.config.states, out.reference.current, *wb.oracle_cells);
    const Eigen::VectorXcd y = wb.op->apply(out.realized);
    out.power.resize(static_cast<std::size_t>(y.size()));
    for (std::size_t s = 0; s < out.power.size(); ++s) out.power[s] = std::norm(y[static_cast<Eigen::Index>(s)]);
    out.coverage = coverage_index(out.power, fp);
    out.phi_realized = macro_cost(out.power, desired, da);
    out.sigma = local_phase_error(out.reference.current, out.realized);
    return out;
}

struct PipelineReport {
    std::filesystem::path dir;
    nlohmann::json json;
};

inline PipelineReport run_pipeline(const ScenarioSpec& spec, const PipelineOptions& opt)
{
    using namespace pipeline_detail;
    namespace fs = std::filesystem;
    require(!opt.methods.empty(), "at least one method is required");
    const auto t_all = clock::now();
    PipelineReport rep;
    rep.dir = opt.out_dir / (opt.run_name.empty() ? default_run_name(spec.rng_seed) : opt.run_name);
    fs::create_directories(rep.dir);

    nlohmann::json& j = rep.json;
    nlohmann::json timings = nlohmann::json::object();
    const Workbench wb = prepare(spec, opt, timings);
    auto& artifacts = j["artifacts"];
    auto emit = [&](const std::string& name) {
        artifacts.push_back(name);
        return rep.dir / name;
    };

    io::write_text(emit("scenario.json"), scenario_to_json(spec).dump(2) + "\n");
    auto atom = atom_summary(wb.atom.g, spec.frequency_f0, wb.bounds);
    atom["design_evaluations"] = wb.atom.evaluations;
    io::write_text(emit("atom.json"), atom.dump(2) + "\n");
    const nlohmann::json alpha = {{"mags", wb.alphabet.mags},
                                  {"phases_rad", wb.alphabet.phases},
                                  {"iota", {wb.alphabet.iota.x(), wb.alphabet.iota.y(), wb.alphabet.iota.z()}},
                                  {"reference_power", wb.p_ref}};
    io::write_text(emit("alphabet.json"), alpha.dump(2) + "\n");

    j["seed"] = spec.rng_seed;
    j["scenario"] = spec.name;
    j["m_cells"] = spec.m_cells;
    j["n_cells"] = spec.n_cells;
    j["time_steps"] = spec.time_steps();
    j["twin"] = spec.surrogate.twin == TwinKind::oracle ? "oracle" : "kriging";
    j["config"] = scenario_to_json(spec);
    j["atom"] = atom;
    j["alphabet"] = alpha;
    j["operator"] = {{"side", wb.op->side() == RadiationOperator::Side::cells ? "cells" : "samples"},
                     {"sigma_1", wb.op->singular_values()[0]},
                     {"retained_rank", wb.op->rank(spec.qipm.svd_rel_threshold)}};

    std::map<std::string, std::vector<double>> gammas, wcov;
    for (const Method m : opt.methods) {
        std::optional<StateMatrix> warm;
        for (int t = 0; t < spec.time_steps(); ++t) {
            const auto o = solve_step(wb, m, t, warm);
            warm = o.config.states;
            const std::string tag = std::string(to_string(m)) + "_t" + std::to_string(t + 1);
            io::write_current_csv(emit(tag + "_reference.csv"), o.reference.current);
            io::write_trace_csv(emit(tag + "_trace.csv"), o.reference.trace);
            io::write_states(emit(tag + "_states.txt"), o.config.states);
            io::write_fitness_csv(emit(tag + "_fitness.csv"), o.config.record);
            io::write_sigma_csv(emit(tag + "_sigma.csv"), o.sigma);
            io::write_current_csv(emit(tag + "_realized.csv"), o.realized);
            io::write_footprint_csv(emit(tag + "_footprint.csv"), spec.obs, o.power);
            if (opt.heatmaps) {
                io::write_footprint_pgm(emit(tag + "_footprint.pgm"), spec.obs, o.power);
                io::write_phase_pgm(emit(tag + "_phase.pgm"), o.reference.current);
            }
            const auto& tr = o.reference.trace;
            nlohmann::json step = {
                {"method", to_string(m)},
                {"t", t + 1},
                {"iterations", tr.records.size()},
                {"stop", to_string(tr.stop)},
                {"phi_final", tr.records.back().phi},
                {"xi_final", tr.records.back().xi},
                {"phi_best", o.reference.phi_best},
                {"best_iteration", o.reference.best_iteration},
                {"psi_twin", o.config.psi},
                {"psi_oracle", o.psi_oracle},
                {"ga_iterations", o.config.record.best_psi.size()},
                {"ga_evaluations", o.config.record.evaluations},
                {"phi_realized", o.phi_realized},
                {"gamma", o.coverage.unbounded ? nlohmann::json("inf") : nlohmann::json(o.coverage.gamma)},
                {"w_cov", o.coverage.w_cov},
                {"w_ext", o.coverage.w_ext},
                {"sigma_min_deg", o.sigma.min_deg},
                {"sigma_max_deg", o.sigma.max_deg},
                {"sigma_max_abs_deg", o.sigma.max_abs_deg},
                {"seconds_reference", o.seconds_reference},
                {"seconds_configure", o.seconds_configure}};
            j["steps"].push_back(step);
            gammas[to_string(m)].push_back(o.coverage.gamma);
            wcov[to_string(m)].push_back(o.coverage.w_cov);
        }
    }
    if (gammas.count("qipm") && gammas.count("ipm")) {
        for (int t = 0; t < spec.time_steps(); ++t) {
            const double gq = gammas["qipm"][t], gi = gammas["ipm"][t];
            j["delta_gamma"].push_back(gi > 0 && std::isfinite(gi) ? nlohmann::json((gq - gi) / gi) : nlohmann::json(nullptr));
        }
    }
    for (const auto& [m, w] : wcov) {
        for (std::size_t t = 0; t < w.size(); ++t)
            j["w_cov_ratio"][m].push_back(w[0] > 0 ? nlohmann::json(w[t] / w[0]) : nlohmann::json(nullptr));
    }
    timings["total"] = since(t_all);
    j["timings_s"] = timings;
    artifacts.push_back("report.json");
    io::write_text(rep.dir / "report.json", j.dump(2) + "\n");
    return rep;
}

// ---------------------------------------------------------------------------

struct ComparisonTable {
    nlohmann::json json;
    std::string csv;
};

namespace pipeline_detail {

// Scenario content that must agree for two reports to be comparable.
inline nlohmann::json comparable_part(const nlohmann::json& cfg)
{
    nlohmann::json c;
    for (const char* k : {"frequency_f0", "height_d", "incident", "obs", "footprints", "cell_dx", "cell_dy"})
        if (cfg.contains(k)) c[k] = cfg[k];
    return c;
}

} // namespace pipeline_detail

inline ComparisonTable compare_reports(const std::vector<nlohmann::json>& reports)
{
    using nlohmann::json;
    if (reports.size() < 2) throw ValidationError("compare needs at least 2 reports");
    ComparisonTable out;
    const auto key_of = [](const json& r) { return pipeline_detail::comparable_part(r.at("config")).dump(); };
    const std::string ref = key_of(reports.front());

    // Metrics per (aperture, scenario fingerprint, t, method) pooled over all reports.
    using Key = std::tuple<int, int, std::string, int>;
    std::map<Key, std::map<std::string, json>> pool;
    for (const auto& r : reports)
        for (const auto& s : r.at("steps"))
            pool[{r.at("m_cells").get<int>(), r.at("n_cells").get<int>(), key_of(r), s.at("t").get<int>()}]
                [s.at("method").get<std::string>()] = s;

    const auto val = [](const json& v) {
        if (v.is_number()) return io::num(v.get<double>());
        return v.is_string() ? v.get<std::string>() : std::string();
    };
    const auto pick = [](const std::map<std::string, json>& g, const char* m, const char* f) {
        return g.count(m) ? g.at(m).at(f) : json(nullptr);
    };
    std::ostringstream csv;
    csv << "report,scenario,m_cells,n_cells,t,gamma_qipm,gamma_ipm,delta_gamma,phi_final_qipm,phi_final_ipm,runtime_s,"
           "compatible\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        const bool compatible = key_of(r) == ref;
        const double runtime = r.at("timings_s").at("total").get<double>();
        std::set<int> steps;
        for (const auto& s : r.at("steps")) steps.insert(s.at("t").get<int>());
        for (const int t : steps) {
            const auto& g = pool[{r.at("m_cells").get<int>(), r.at("n_cells").get<int>(), key_of(r), t}];
            const json gq = pick(g, "qipm", "gamma"), gi = pick(g, "ipm", "gamma");
            json dg = nullptr;
            if (gq.is_number() && gi.is_number() && gi.get<double>() > 0)
                dg = (gq.get<double>() - gi.get<double>()) / gi.get<double>();
            const json row = {{"report", k},
                              {"scenario", r.at("scenario")},
                              {"m_cells", r.at("m_cells")},
                              {"n_cells", r.at("n_cells")},
                              {"t", t},
                              {"gamma_qipm", gq},
                              {"gamma_ipm", gi},
                              {"delta_gamma", dg},
                              {"phi_final_qipm", pick(g, "qipm", "phi_final")},
                              {"phi_final_ipm", pick(g, "ipm", "phi_final")},
                              {"runtime_s", runtime},
                              {"compatible", compatible}};
            out.json["rows"].push_back(row);
            csv << k << ',' << r.at("scenario").get<std::string>() << ',' << row["m_cells"].get<int>() << ','
                << row["n_cells"].get<int>() << ',' << t << ',' << val(gq) << ',' << val(gi) << ',' << val(dg) << ','
                << val(row["phi_final_qipm"]) << ',' << val(row["phi_final_ipm"]) << ',' << io::num(runtime) << ','
                << (compatible ? "true" : "false") << '\n';
        }
        if (!compatible) out.json["incompatible"].push_back(k);
    }
    if (!out.json.contains("incompatible")) out.json["incompatible"] = json::array();
    out.csv = csv.str();
    return out;
}

} // namespace rpems
