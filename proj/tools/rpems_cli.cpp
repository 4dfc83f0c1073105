// SPDX-License-Identifier: Apache-2.0
#include <rpems/rpems.hpp>

#include <CLI11.hpp>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rpems;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    fs::path out_dir = ".";
    int threads = 0;
};

ScenarioSpec load_with_overrides(const fs::path& path, const Globals& g)
{
    auto spec = load_scenario(path);
    if (g.seed) {
        spec.rng_seed = *g.seed;
        spec.qipm.seed = spec.ga.seed = spec.atom.seed = spec.surrogate.seed = *g.seed;
    }
    return spec;
}

AtomBounds read_bounds(const fs::path& path)
{
    const auto j = json::parse(io::read_text(path));
    AtomBounds b;
    require(j.contains("lower") && j.contains("upper"), path.string() + ": bounds need 'lower' and 'upper'");
    require(j["lower"].size() == 16 && j["upper"].size() == 16, path.string() + ": bounds need 16 entries each");
    for (std::size_t u = 0; u < 16; ++u) {
        b.lower[u] = j["lower"][u].get<double>();
        b.upper[u] = j["upper"][u].get<double>();
        require(b.lower[u] > 0 && b.lower[u] <= b.upper[u], path.string() + ": invalid bound pair " + std::to_string(u));
    }
    b.free_box();
    return b;
}

std::string sweep_csv(const AtomDescriptor& g, const AtomBounds& bounds, double f_lo, double f_hi, int points)
{
    std::ostringstream o;
    o << "f_hz,state,mag_perp,phase_perp_deg,mag_par,phase_par_deg,cross_db\n";
    for (int k = 0; k < points; ++k) {
        const double f = points == 1 ? f_lo : f_lo + (f_hi - f_lo) * k / (points - 1);
        for (int s = 0; s < 2; ++s) {
            const auto r = oracle_reflection(g, s, f, bounds);
            o << io::num(f) << ',' << s << ',' << io::num(std::abs(r.gamma_pp)) << ','
              << io::num(rad2deg(phase_of(r.gamma_pp))) << ',' << io::num(std::abs(r.gamma_ll)) << ','
              << io::num(rad2deg(phase_of(r.gamma_ll))) << ',' << io::num(20 * std::log10(std::abs(r.gamma_pl)))
              << '\n';
        }
    }
    return o.str();
}

int step_index(const ScenarioSpec& spec, int t)
{
    if (t < 1 || t > spec.time_steps())
        throw ValidationError("time step " + std::to_string(t) + " out of range 1.." + std::to_string(spec.time_steps()));
    return t - 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Single-bit reconfigurable EM skin synthesis and control"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Override every seed of the scenario");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0: hardware)")->check(CLI::NonNegativeNumber);

    // atom design
    auto* atom = app.add_subcommand("atom", "Unit-cell design");
    atom->require_subcommand(1);
    auto* design = atom->add_subcommand("design", "Optimize the cell layout");
    std::optional<fs::path> bounds_file;
    int budget = 5000, population = 24, sweep_points = 201;
    double f0 = 3.5e9, f_lo = 3.0e9, f_hi = 4.0e9;
    design->add_option("--bounds", bounds_file, "JSON file with 16 'lower' and 16 'upper' values [m]");
    design->add_option("--budget", budget, "Oracle evaluations")->check(CLI::PositiveNumber);
    design->add_option("--population", population)->check(CLI::Range(4, 100000));
    design->add_option("--f0", f0, "Design frequency [Hz]")->check(CLI::PositiveNumber);
    design->add_option("--sweep-lo", f_lo)->check(CLI::PositiveNumber);
    design->add_option("--sweep-hi", f_hi)->check(CLI::PositiveNumber);
    design->add_option("--sweep-points", sweep_points)->check(CLI::PositiveNumber);

    // surrogate train|eval
    auto* sur = app.add_subcommand("surrogate", "Kriging twin of the cell");
    sur->require_subcommand(1);
    auto* train = sur->add_subcommand("train", "Train and save a model");
    auto* eval = sur->add_subcommand("eval", "Held-out error of a saved model against the oracle");
    std::optional<fs::path> atom_file;
    fs::path model_file = "twin.krg";
    int samples = 2000, test_samples = 500, subset = 256, cv_folds = 0;
    double box_rel = 0.02;
    for (auto* c : {train, eval}) {
        c->add_option("--atom", atom_file, "atom.json with field 'g' (default: calibrated layout)");
        c->add_option("--model", model_file, "Model file")->capture_default_str();
        c->add_option("--box", box_rel, "Relative half-width of the sampling box")->check(CLI::Range(1e-6, 1.0));
    }
    train->add_option("--samples", samples, "Training layouts")->check(CLI::PositiveNumber);
    train->add_option("--selection-subset", subset)->check(CLI::PositiveNumber);
    train->add_option("--cv-folds", cv_folds, "Also report k-fold cross-validation")->check(CLI::NonNegativeNumber);
    eval->add_option("--samples", test_samples, "Held-out layouts")->check(CLI::PositiveNumber);

    // current / configure / evaluate / pipeline share scenario options
    fs::path scenario;
    std::optional<fs::path> model_in, states_in, reference_in;
    std::string method = "qipm", methods = "both", run_name;
    int iters = -1, t_step = 1, ga_pop = -1, ga_iters = -1;
    double crossover = -1, mutation = -2;
    bool warm_start = false, oracle_twin = false, no_heatmaps = false;
    std::optional<fs::path> warm_file;
    auto scenario_opts = [&](CLI::App* c) {
        c->add_option("--scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
        c->add_option("--atom", atom_file, "atom.json with field 'g' (skips cell design)");
        c->add_option("--model", model_in, "Trained Kriging model (skips training)");
        c->add_flag("--oracle-twin", oracle_twin, "Use the analytic oracle as the twin");
    };
    auto* cur = app.add_subcommand("current", "Reference current synthesis");
    scenario_opts(cur);
    cur->add_option("--method", method)->check(CLI::IsMember({"qipm", "ipm"}));
    cur->add_option("--iters", iters, "Projection iterations")->check(CLI::PositiveNumber);
    cur->add_option("--t", t_step, "Time step (1-based)");

    auto* conf = app.add_subcommand("configure", "Cell states realizing a reference current");
    scenario_opts(conf);
    conf->add_option("--reference", reference_in, "Reference current CSV")->required()->check(CLI::ExistingFile);
    conf->add_option("--population", ga_pop)->check(CLI::Range(2, 1000000));
    conf->add_option("--iters", ga_iters)->check(CLI::PositiveNumber);
    conf->add_option("--crossover", crossover)->check(CLI::Range(0.0, 1.0));
    conf->add_option("--mutation", mutation, "Per-bit rate (default 1/cells)")->check(CLI::Range(0.0, 1.0));
    conf->add_option("--warm-start", warm_file, "Initial state grid")->check(CLI::ExistingFile);

    auto* ev = app.add_subcommand("evaluate", "Footprint and coverage of a state grid");
    scenario_opts(ev);
    ev->add_option("--states", states_in, "State grid (ASCII 0/1)")->required()->check(CLI::ExistingFile);
    ev->add_option("--t", t_step, "Time step whose target defines the coverage region");

    auto* pipe = app.add_subcommand("pipeline", "End-to-end run");
    scenario_opts(pipe);
    pipe->add_option("--method", methods)->check(CLI::IsMember({"qipm", "ipm", "both"}));
    pipe->add_option("--run-name", run_name, "Run directory name (default <timestamp>-<seed>)");
    pipe->add_flag("--warm-start", warm_start, "Seed each time step with the previous states");
    pipe->add_flag("--no-heatmaps", no_heatmaps);

    auto* cmp = app.add_subcommand("compare", "Tabulate several pipeline reports");
    std::vector<fs::path> reports;
    std::string cmp_name = "comparison";
    cmp->add_option("reports", reports, "report.json files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--name", cmp_name, "Output base name")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (g.threads > 0) set_threads(g.threads);
        fs::create_directories(g.out_dir);

        auto make_options = [&] {
            PipelineOptions o;
            o.out_dir = g.out_dir;
            o.atom_file = atom_file;
            o.model_file = model_in;
            return o;
        };
        auto scenario_spec = [&] {
            auto spec = load_with_overrides(scenario, g);
            if (oracle_twin) spec.surrogate.twin = TwinKind::oracle;
            return spec;
        };

        if (design->parsed()) {
            const AtomBounds b = bounds_file ? read_bounds(*bounds_file) : AtomBounds::standard();
            const auto d = optimize_atom(b, budget, g.seed.value_or(0), f0, population);
            auto j = atom_summary(d.g, f0, b);
            j["evaluations"] = d.evaluations;
            j["f0"] = f0;
            io::write_text(g.out_dir / "atom.json", j.dump(2) + "\n");
            io::write_text(g.out_dir / "atom_sweep.csv", sweep_csv(d.g, b, f_lo, f_hi, sweep_points));
            std::cout << j.dump(2) << '\n';
        } else if (train->parsed() || eval->parsed()) {
            const IncidentWave w = IncidentWave::make(0, 0, 0, 1, f0);
            const OracleTwin oracle(w);
            const AtomDescriptor centre = atom_file ? read_atom_file(*atom_file) : calibrated_descriptor(f0);
            const fs::path mpath = model_file.is_absolute() ? model_file : g.out_dir / model_file;
            if (train->parsed()) {
                const auto ts = sample_training_set(oracle, centre, box_rel, samples, g.seed.value_or(0));
                HyperPolicy hp;
                hp.selection_subset = subset;
                const auto model = KrigingModel::train(ts, hp);
                model.save(mpath);
                json j = {{"model", mpath.string()}, {"samples", samples}, {"box", box_rel}};
                if (cv_folds > 0) j["cv_rmse"] = cross_validate(ts, cv_folds, g.seed.value_or(0), hp);
                std::cout << j.dump(2) << '\n';
            } else {
                const KrigingTwin twin(std::make_shared<KrigingModel>(KrigingModel::load(mpath)));
                const auto test = sample_training_set(oracle, centre, box_rel, test_samples, g.seed.value_or(0) + 1);
                const auto e = heldout_nrmse(twin, test);
                const json j = {{"outputs", output_names()},
                                {"nrmse", e},
                                {"max_nrmse", *std::max_element(e.begin(), e.end())}};
                io::write_text(g.out_dir / "surrogate_eval.json", j.dump(2) + "\n");
                std::cout << j.dump(2) << '\n';
            }
        } else if (cur->parsed()) {
            auto spec = scenario_spec();
            if (iters > 0) spec.qipm.max_iters = iters;
            json timings;
            const auto wb = prepare(spec, make_options(), timings);
            const int t = step_index(spec, t_step);
            const auto desired = spec.footprints[t].desired_power(wb.p_ref);
            const auto r = parse_method(method) == Method::qipm
                               ? run_qipm(*wb.op, desired, spec.obs.area_element(), wb.alphabet, spec.qipm, wb.rotation)
                               : run_ipm(*wb.op, desired, spec.obs.area_element(), wb.alphabet, spec.qipm, wb.rotation);
            const std::string tag = method + "_t" + std::to_string(t_step);
            io::write_current_csv(g.out_dir / (tag + "_reference.csv"), r.current);
            io::write_trace_csv(g.out_dir / (tag + "_trace.csv"), r.trace);
            io::write_phase_pgm(g.out_dir / (tag + "_phase.pgm"), r.current);
            std::cout << json{{"iterations", r.trace.records.size()},
                              {"stop", to_string(r.trace.stop)},
                              {"phi_final", r.trace.records.back().phi},
                              {"phi_best", r.phi_best}}
                             .dump(2)
                      << '\n';
        } else if (conf->parsed()) {
            auto spec = scenario_spec();
            if (ga_pop > 0) spec.ga.population = ga_pop;
            if (ga_iters > 0) spec.ga.max_iters = ga_iters;
            if (crossover >= 0) spec.ga.crossover_rate = crossover;
            if (mutation >= 0) spec.ga.mutation_rate = mutation;
            json timings;
            const auto wb = prepare(spec, make_options(), timings);
            const auto ref = io::read_current_csv(*reference_in);
            check_dims(ref, spec);
            std::optional<StateMatrix> warm;
            if (warm_file) warm = io::read_states(*warm_file);
            const auto res = configure(ref, *wb.twin_cells, spec.ga, warm);
            const auto real = wb.twin_cells->current(res.states);
            io::write_states(g.out_dir / "states.txt", res.states);
            io::write_fitness_csv(g.out_dir / "fitness.csv", res.record);
            io::write_sigma_csv(g.out_dir / "sigma.csv", local_phase_error(ref, real));
            std::cout << json{{"psi", res.psi},
                              {"psi_oracle", exact_psi(res.states, ref, *wb.oracle_cells)},
                              {"iterations", res.record.best_psi.size()}}
                             .dump(2)
                      << '\n';
        } else if (ev->parsed()) {
            const auto spec = scenario_spec();
            json timings;
            const auto wb = prepare(spec, make_options(), timings);
            const auto st = io::read_states(*states_in);
            const int t = step_index(spec, t_step);
            const Eigen::VectorXcd y = wb.op->apply(wb.oracle_cells->current(st));
            std::vector<double> p(static_cast<std::size_t>(y.size()));
            for (std::size_t s = 0; s < p.size(); ++s) p[s] = std::norm(y[static_cast<Eigen::Index>(s)]);
            io::write_footprint_csv(g.out_dir / "footprint.csv", spec.obs, p);
            io::write_footprint_pgm(g.out_dir / "footprint.pgm", spec.obs, p);
            const auto c = coverage_index(p, spec.footprints[t]);
            std::cout << json{{"gamma", c.unbounded ? json("inf") : json(c.gamma)}, {"w_cov", c.w_cov}, {"w_ext", c.w_ext}}
                             .dump(2)
                      << '\n';
        } else if (pipe->parsed()) {
            auto spec = scenario_spec();
            if (warm_start) spec.ga.warm_start = true;
            auto o = make_options();
            o.run_name = run_name;
            o.heatmaps = !no_heatmaps;
            if (methods != "both") o.methods = {parse_method(methods)};
            const auto rep = run_pipeline(spec, o);
            std::cout << (rep.dir / "report.json").string() << '\n';
        } else if (cmp->parsed()) {
            std::vector<json> js;
            for (const auto& r : reports) {
                try {
                    js.push_back(json::parse(io::read_text(r)));
                } catch (const json::exception& e) {
                    throw ValidationError(r.string() + ": " + e.what());
                }
            }
            const auto table = compare_reports(js);
            io::write_text(g.out_dir / (cmp_name + ".csv"), table.csv);
            io::write_text(g.out_dir / (cmp_name + ".json"), table.json.dump(2) + "\n");
            std::cout << table.csv;
            if (!table.json["incompatible"].empty())
                std::cerr << "warning: reports " << table.json["incompatible"].dump()
                          << " use a different scenario than report 0\n";
        }
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
