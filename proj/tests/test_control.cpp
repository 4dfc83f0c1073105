// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"

#include <cstdlib>
#include <fstream>

using namespace rpems;
namespace fs = std::filesystem;

namespace {

ScenarioSpec tiny_spec(int m, int n)
{
    auto s = square_scenario(m, 3);
    s.n_cells = n;
    s.obs = ObservationGrid{0, 40, 0, 40, 20, 20};
    s.footprints = {build_desired_footprint({{{14, 14}, {26, 14}, {26, 26}, {14, 26}}}, -10, -50, s.obs)};
    return s;
}

SurfaceCurrent random_reference(int m, int n, Rng& rng)
{
    SurfaceCurrent j(m, n, Vec3::UnitY());
    for (auto& c : j.coeffs) c = std::polar(0.5 + uniform01(rng), 2 * pi * uniform01(rng));
    return j;
}

// Minimum over every state grid, evaluated through the full current path.
double exhaustive_min_psi(const SurfaceCurrent& ref, const CellCurrentModel& model)
{
    const std::size_t n = ref.size();
    StateMatrix st(ref.m, ref.n);
    double best = 1e300;
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << n); ++k) {
        for (std::size_t c = 0; c < n; ++c) st.s[c] = (k >> c) & 1u;
        best = std::min(best, micro_cost(st, ref, model));
    }
    return best;
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("rpems_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

// ---------------------------------------------------------------- genome

TEST(Genome, StatesRoundTripAcrossWordBoundary)
{
    Rng rng(1);
    for (int m : {1, 7, 9, 13}) {
        StateMatrix st(m, 11);
        for (auto& s : st.s) s = rng() & 1u;
        const auto g = BitGenome::from_states(st);
        EXPECT_EQ(g.to_states(m, 11).s, st.s);
        EXPECT_EQ(g.word(g.word_count() - 1) & ~g.tail_mask(), 0u);
    }
}

TEST(Genome, MutationRateIsUnbiased)
{
    Rng rng(9);
    BitGenome g(1000);
    std::size_t flips = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        BitGenome h = g;
        ga_detail::mutate(h, 0.01, rng);
        for (std::size_t c = 0; c < h.size(); ++c) flips += h.get(c);
    }
    const double rate = static_cast<double>(flips) / (1000.0 * trials);
    EXPECT_NEAR(rate, 0.01, 0.001);
}

TEST(Genome, ElitePreservesBest)
{
    GaConfig cfg;
    cfg.population = 6;
    Rng rng(2);
    Population pop;
    for (int k = 0; k < 6; ++k) {
        BitGenome g(70);
        g.word(0) = rng();
        pop.push_back(g);
    }
    const std::vector<double> fit{5, 3, 9, 1, 7, 2};
    const auto next = ga_step(pop, fit, cfg, rng);
    EXPECT_EQ(next.size(), pop.size());
    EXPECT_EQ(next[0], pop[3]);
}

// ---------------------------------------------------------------- configure

TEST(Configure, MatchesExhaustiveSearchOnSmallApertures)
{
    const auto spec = tiny_spec(3, 4);
    const OracleTwin twin(spec.incident);
    const auto g = calibrated_descriptor(3.5e9);
    const auto a = derive_alphabet(g, spec.incident);
    const CellCurrentModel model(twin, g, spec, a.iota);
    Rng rng(31);
    for (int k = 0; k < 10; ++k) {
        const auto ref = random_reference(3, 4, rng);
        GaConfig cfg;
        cfg.seed = k;
        cfg.max_iters = 400;
        const auto res = configure(ref, model, cfg);
        const double best = exhaustive_min_psi(ref, model);
        EXPECT_NEAR(res.psi, best, 1e-12);
        EXPECT_NEAR(exact_psi(brute_force_configure(ref, model), ref, model), best, 1e-12);
        EXPECT_NEAR(micro_cost(res.states, ref, model), res.psi, 1e-12);
    }
}

TEST(Configure, RealizesFeasibleReferenceExactly)
{
    const auto spec = tiny_spec(12, 10);
    const OracleTwin twin(spec.incident);
    const auto g = calibrated_descriptor(3.5e9);
    const CellCurrentModel model(twin, g, spec, derive_alphabet(g, spec.incident).iota);
    Rng rng(4);
    StateMatrix truth(12, 10);
    for (auto& s : truth.s) s = rng() & 1u;
    const auto ref = model.current(truth);
    const auto res = configure(ref, model, GaConfig{});
    EXPECT_EQ(res.states.s, truth.s);
    EXPECT_EQ(res.psi, 0.0);
    const auto sigma = local_phase_error(ref, model.current(res.states));
    EXPECT_EQ(sigma.max_abs_deg, 0.0);
}

TEST(Configure, FitnessIsMonotoneAndDeterministic)
{
    const auto spec = tiny_spec(8, 8);
    const OracleTwin twin(spec.incident);
    const auto g = calibrated_descriptor(3.5e9);
    const CellCurrentModel model(twin, g, spec, Vec3::UnitY());
    Rng rng(6);
    const auto ref = random_reference(8, 8, rng);
    GaConfig cfg;
    cfg.max_iters = 300;
    const auto a = configure(ref, model, cfg), b = configure(ref, model, cfg);
    EXPECT_EQ(a.states.s, b.states.s);
    EXPECT_EQ(a.record.best_psi, b.record.best_psi);
    for (std::size_t k = 1; k < a.record.best_psi.size(); ++k) EXPECT_LE(a.record.best_psi[k], a.record.best_psi[k - 1]);
    EXPECT_EQ(a.record.best_psi.size(), 300u);
}

TEST(Configure, WarmStartNeverWorseThanSeed)
{
    const auto spec = tiny_spec(8, 8);
    const OracleTwin twin(spec.incident);
    const auto g = calibrated_descriptor(3.5e9);
    const CellCurrentModel model(twin, g, spec, Vec3::UnitY());
    Rng rng(7);
    const auto ref = random_reference(8, 8, rng);
    StateMatrix seed(8, 8);
    GaConfig cfg;
    cfg.max_iters = 5;
    const auto res = configure(ref, model, cfg, seed);
    EXPECT_LE(res.psi, exact_psi(seed, ref, model));
    EXPECT_THROW(configure(ref, model, cfg, StateMatrix(4, 4)), ValidationError);
}

TEST(Configure, BruteForceRefusesLargeApertures)
{
    const auto spec = tiny_spec(5, 5);
    const OracleTwin twin(spec.incident);
    const CellCurrentModel model(twin, calibrated_descriptor(3.5e9), spec, Vec3::UnitY());
    Rng rng(1);
    EXPECT_THROW(brute_force_configure(random_reference(5, 5, rng), model), ValidationError);
}

TEST(Configure, PhaseErrorMapIsWrapped)
{
    SurfaceCurrent a(1, 2, Vec3::UnitY()), b(1, 2, Vec3::UnitY());
    a.coeffs = {std::polar(1.0, 3.1), std::polar(1.0, 0.2)};
    b.coeffs = {std::polar(2.0, -3.1), std::polar(1.0, 0.1)};
    const auto e = local_phase_error(a, b);
    // reference minus realized: 6.2 wraps to 6.2 - 2 pi, the second cell leads by 0.1
    EXPECT_NEAR(e.min_deg, rad2deg(6.2 - 2 * pi), 1e-9);
    EXPECT_NEAR(e.max_deg, rad2deg(0.1), 1e-9);
    EXPECT_NEAR(e.max_abs_deg, rad2deg(0.1), 1e-9);
}

// ---------------------------------------------------------------- io

TEST(Io, CurrentAndStatesRoundTrip)
{
    const auto dir = scratch("io");
    Rng rng(3);
    auto j = random_reference(3, 5, rng);
    j.iota = Vec3(0.6, 0.8, 0);
    io::write_current_csv(dir / "j.csv", j);
    const auto back = io::read_current_csv(dir / "j.csv");
    EXPECT_EQ(back.coeffs, j.coeffs);
    EXPECT_EQ(back.iota, j.iota);
    StateMatrix st(3, 5);
    for (auto& s : st.s) s = rng() & 1u;
    io::write_states(dir / "s.txt", st);
    EXPECT_EQ(io::read_states(dir / "s.txt").s, st.s);
    std::ofstream(dir / "bad.txt") << "0102\n";
    EXPECT_THROW(io::read_states(dir / "bad.txt"), ValidationError);
}

// ---------------------------------------------------------------- pipeline

namespace {

ScenarioSpec pipeline_spec()
{
    auto s = square_scenario(6, 5);
    s.obs = ObservationGrid{0, 50, 0, 50, 20, 20};
    s.footprints = {build_desired_footprint({{{15, 15}, {30, 15}, {30, 30}, {15, 30}}}, -10, -50, s.obs),
                    build_desired_footprint({{{5, 30}, {20, 30}, {20, 45}, {5, 45}}}, -10, -50, s.obs)};
    s.surrogate.twin = TwinKind::oracle;
    s.atom.budget = 800;
    s.qipm.max_iters = 30;
    s.ga.max_iters = 500;
    s.ga.warm_start = true;
    return s;
}

} // namespace

TEST(Pipeline, EmitsArtifactsForEveryStep)
{
    const auto dir = scratch("pipe");
    PipelineOptions opt;
    opt.out_dir = dir;
    opt.run_name = "a";
    const auto rep = run_pipeline(pipeline_spec(), opt);
    const auto& j = rep.json;
    for (const auto& f : j["artifacts"]) EXPECT_TRUE(fs::exists(rep.dir / f.get<std::string>())) << f;
    for (const char* m : {"qipm", "ipm"})
        for (int t = 1; t <= 2; ++t)
            for (const char* kind : {"_states.txt", "_footprint.csv", "_reference.csv", "_trace.csv"})
                EXPECT_TRUE(fs::exists(rep.dir / (std::string(m) + "_t" + std::to_string(t) + kind)));
    EXPECT_EQ(j["steps"].size(), 4u);
    EXPECT_EQ(j["delta_gamma"].size(), 2u);
    for (const auto& [k, v] : j["timings_s"].items()) EXPECT_GE(v.get<double>(), 0.0) << k;

    // report numbers are recomputable from the artifacts
    const auto spec = pipeline_spec();
    const auto p = io::read_footprint_csv(rep.dir / "qipm_t1_footprint.csv");
    const auto c = coverage_index(p, spec.footprints[0]);
    EXPECT_EQ(c.gamma, j["steps"][0]["gamma"].get<double>());
    const auto ref = io::read_current_csv(rep.dir / "qipm_t1_reference.csv");
    const auto alpha = nlohmann::json::parse(io::read_text(rep.dir / "alphabet.json"));
    Alphabet a;
    for (int s = 0; s < 2; ++s) {
        a.mags[s] = alpha["mags"][s];
        a.phases[s] = alpha["phases_rad"][s];
    }
    for (int i = 0; i < 3; ++i) a.iota[i] = alpha["iota"][i];
    EXPECT_TRUE(is_feasible(ref, a, illumination_phase(spec)));
}

TEST(Pipeline, RerunIsBitIdentical)
{
    const auto dir = scratch("det");
    PipelineOptions opt;
    opt.out_dir = dir;
    opt.heatmaps = true;
    opt.run_name = "a";
    const auto r1 = run_pipeline(pipeline_spec(), opt);
    opt.run_name = "b";
    const auto r2 = run_pipeline(pipeline_spec(), opt);
    for (const auto& f : r1.json["artifacts"]) {
        const auto name = f.get<std::string>();
        if (name == "report.json") continue;
        EXPECT_EQ(io::read_text(r1.dir / name), io::read_text(r2.dir / name)) << name;
    }
    auto a = r1.json, b = r2.json;
    a.erase("timings_s");
    b.erase("timings_s");
    for (auto* r : {&a, &b})
        for (auto& s : (*r)["steps"]) {
            s.erase("seconds_reference");
            s.erase("seconds_configure");
        }
    EXPECT_EQ(a, b);
}

TEST(Pipeline, StageFailureNamesStage)
{
    auto s = pipeline_spec();
    s.atom_descriptor = std::vector<double>(16, 1.0);
    PipelineOptions opt;
    opt.out_dir = scratch("fail");
    opt.run_name = "x";
    try {
        run_pipeline(s, opt);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("stage 'atom'"), std::string::npos) << e.what();
    }
}

TEST(Compare, DeltaGammaFromTwoReports)
{
    const auto dir = scratch("cmp");
    PipelineOptions opt;
    opt.out_dir = dir;
    opt.methods = {Method::qipm};
    opt.run_name = "q";
    const auto q = run_pipeline(pipeline_spec(), opt);
    opt.methods = {Method::ipm};
    opt.run_name = "i";
    const auto i = run_pipeline(pipeline_spec(), opt);
    const auto t = compare_reports({q.json, i.json});
    const double gq = q.json["steps"][0]["gamma"], gi = i.json["steps"][0]["gamma"];
    EXPECT_EQ(t.json["rows"][0]["delta_gamma"].get<double>(), (gq - gi) / gi);
    EXPECT_TRUE(t.json["incompatible"].empty());
    EXPECT_THROW(compare_reports({q.json}), ValidationError);

    auto other = i.json;
    other["config"]["height_d"] = 9.0;
    EXPECT_EQ(compare_reports({q.json, other}).json["incompatible"], nlohmann::json::array({1}));
}

// ---------------------------------------------------------------- command line

namespace {

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(RPEMS_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(Cli, ExitCodes)
{
    const auto dir = scratch("cli");
    EXPECT_EQ(run_cli("--out-dir " + dir.string() + " pipeline --scenario /nonexistent.json"), 2);
    EXPECT_EQ(run_cli("--bogus"), 2);
    std::ofstream(dir / "bad.json") << "{ \"schema_version\": 1 }";
    EXPECT_EQ(run_cli("--out-dir " + dir.string() + " pipeline --scenario " + (dir / "bad.json").string()), 2);
    EXPECT_EQ(run_cli("--out-dir " + dir.string() + " compare " + (dir / "bad.json").string()), 2);
}

TEST(Cli, SubcommandsChain)
{
    const auto dir = scratch("chain");
    auto spec = pipeline_spec();
    spec.footprints.resize(1);
    io::write_text(dir / "s.json", scenario_to_json(spec).dump());
    const std::string o = "--seed 4 --out-dir " + dir.string() + " ";
    ASSERT_EQ(run_cli(o + "atom design --budget 300 --sweep-points 11"), 0);
    EXPECT_TRUE(fs::exists(dir / "atom_sweep.csv"));
    const std::string sc = " --scenario " + (dir / "s.json").string() + " --atom " + (dir / "atom.json").string();
    ASSERT_EQ(run_cli(o + "current --method qipm --iters 10" + sc), 0);
    ASSERT_EQ(run_cli(o + "configure --iters 200 --reference " + (dir / "qipm_t1_reference.csv").string() + sc), 0);
    ASSERT_EQ(run_cli(o + "evaluate --states " + (dir / "states.txt").string() + sc), 0);
    EXPECT_TRUE(fs::exists(dir / "footprint.csv"));
    ASSERT_EQ(run_cli(o + "surrogate train --samples 60"), 0);
    ASSERT_EQ(run_cli(o + "surrogate eval --samples 20"), 0);
    ASSERT_EQ(run_cli(o + "pipeline --run-name r1 --method qipm" + sc), 0);
    ASSERT_EQ(run_cli(o + "pipeline --run-name r2 --method ipm" + sc), 0);
    ASSERT_EQ(run_cli(o + "compare " + (dir / "r1/report.json").string() + " " + (dir / "r2/report.json").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "comparison.csv"));
}
