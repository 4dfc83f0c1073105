// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace rpems;

namespace {

const IncidentWave& normal_wave()
{
    static const auto w = IncidentWave::make(0, 0, 1.0, 0.0, 3.5e9);
    return w;
}

double output_range(const TrainingSet& ts, std::size_t k)
{
    double lo = 1e300, hi = -1e300;
    for (const auto& s : ts.samples) {
        const double v = to_outputs(s.response)[k];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

} // namespace

TEST(Kriging, InterpolatesTrainingPointsWithoutNugget)
{
    const OracleTwin oracle(normal_wave());
    const auto ts = sample_training_set(oracle, calibrated_descriptor(3.5e9), 0.05, 120, 4);
    HyperPolicy hp;
    hp.nugget = 0;
    const auto model = KrigingModel::train(ts, hp);
    for (const auto& s : ts.samples) {
        const auto p = to_outputs(model.predict(s.g, s.s).mean);
        const auto y = to_outputs(s.response);
        for (std::size_t k = 0; k < response_outputs; ++k) {
            const double range = output_range(ts, k);
            EXPECT_LE(std::abs(p[k] - y[k]), 1e-8 * std::max(range, 1e-300) + (range == 0 ? 1e-15 : 0)) << k;
        }
        const auto v = model.predict(s.g, s.s).variance;
        for (double x : v) EXPECT_GE(x, 0.0);
    }
}

TEST(Kriging, VarianceGrowsAwayFromData)
{
    const OracleTwin oracle(normal_wave());
    const auto centre = calibrated_descriptor(3.5e9);
    const auto ts = sample_training_set(oracle, centre, 0.02, 200, 8);
    const auto model = KrigingModel::train(ts);
    auto far = centre.free_params();
    for (auto& x : far) x *= 1.15;
    const auto pf = model.predict(AtomDescriptor::from_free(far), 0);
    const auto pt = model.predict(ts.samples[0].g, ts.samples[0].s);
    EXPECT_TRUE(pf.extrapolated);
    EXPECT_FALSE(pt.extrapolated);
    EXPECT_GT(pf.variance[0], pt.variance[0]);
}

TEST(Kriging, HeldOutErrorSmallInTightBox)
{
    const OracleTwin oracle(normal_wave());
    const auto centre = calibrated_descriptor(3.5e9);
    const auto model = std::make_shared<KrigingModel>(KrigingModel::train(sample_training_set(oracle, centre, 0.02, 400, 1)));
    const auto e = heldout_nrmse(KrigingTwin(model), sample_training_set(oracle, centre, 0.02, 200, 2));
    for (double x : e) EXPECT_LT(x, 0.01);
}

TEST(Kriging, SaveLoadIsExact)
{
    const OracleTwin oracle(normal_wave());
    const auto ts = sample_training_set(oracle, calibrated_descriptor(3.5e9), 0.03, 80, 12);
    const auto model = KrigingModel::train(ts);
    const auto path = std::filesystem::temp_directory_path() / "rpems_test_model.krg";
    model.save(path);
    const auto back = KrigingModel::load(path);
    auto g = calibrated_descriptor(3.5e9).free_params();
    g[2] *= 1.01;
    for (int s = 0; s < 2; ++s) {
        EXPECT_EQ(to_outputs(model.predict(AtomDescriptor::from_free(g), s).mean),
                  to_outputs(back.predict(AtomDescriptor::from_free(g), s).mean));
    }
    {
        std::ofstream(path, std::ios::binary) << "not a model";
    }
    EXPECT_THROW(KrigingModel::load(path), ValidationError);
}

TEST(Kriging, DuplicateTrainingPointsRejected)
{
    const OracleTwin oracle(normal_wave());
    auto ts = sample_training_set(oracle, calibrated_descriptor(3.5e9), 0.03, 20, 1);
    ts.samples.push_back(ts.samples.front());
    EXPECT_THROW(KrigingModel::train(ts), ValidationError);
}

TEST(Kriging, TrainingIsDeterministic)
{
    const OracleTwin oracle(normal_wave());
    const auto ts = sample_training_set(oracle, calibrated_descriptor(3.5e9), 0.03, 100, 5);
    const auto a = KrigingModel::train(ts), b = KrigingModel::train(ts);
    const auto g = ts.samples[3].g;
    EXPECT_EQ(to_outputs(a.predict(g, 1).mean), to_outputs(b.predict(g, 1).mean));
}

TEST(Kriging, CrossValidationReportsFiniteErrors)
{
    const OracleTwin oracle(normal_wave());
    const auto ts = sample_training_set(oracle, calibrated_descriptor(3.5e9), 0.02, 120, 5);
    const auto cv = cross_validate(ts, 4, 9);
    for (double x : cv) {
        EXPECT_TRUE(std::isfinite(x));
        EXPECT_GE(x, 0.0);
    }
    EXPECT_THROW(cross_validate(ts, 1, 9), ValidationError);
}

TEST(Kriging, TrainingBoxStaysInsideBounds)
{
    const OracleTwin oracle(normal_wave());
    const auto b = AtomBounds::standard();
    // the nominal lies well inside; push the centre to the corner
    auto c = AtomDescriptor::nominal().free_params();
    const auto [lo, hi] = b.free_box();
    for (std::size_t d = 0; d < 8; ++d) c[d] = hi[d];
    const auto ts = sample_training_set(oracle, AtomDescriptor::from_free(c), 0.1, 60, 3);
    for (const auto& s : ts.samples) EXPECT_TRUE(b.contains(s.g));
}
