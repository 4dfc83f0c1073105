// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "twin.hpp"

namespace rpems {

inline constexpr std::size_t atom_feature_dims = 9;

// Eight tied geometric parameters plus the binary state.
inline std::vector<double> atom_features(const AtomDescriptor& g, int s)
{
    const auto v = g.free_params();
    std::vector<double> x(v.begin(), v.end());
    x.push_back(static_cast<double>(s));
    return x;
}

struct TrainingSample {
    AtomDescriptor g;
    int s = 0;
    AtomResponse response;
};

struct TrainingSet {
    std::vector<TrainingSample> samples;

    std::size_t size() const { return samples.size(); }
};

// Uniform layouts in a box of relative half-width box_rel around centre,
// clipped to the design bounds, each evaluated in both states.
inline TrainingSet sample_training_set(const AtomTwin& oracle, const AtomDescriptor& centre, double box_rel,
                                       int count, std::uint64_t seed,
                                       const AtomBounds& bounds = AtomBounds::standard())
{
    require(count >= 2, "training set needs at least 2 samples");
    require(box_rel > 0, "training box must have positive width");
    const auto [blo, bhi] = bounds.free_box();
    Rng rng(seed);
    TrainingSet ts;
    const auto c = centre.free_params();
    for (int k = 0; k < (count + 1) / 2; ++k) {
        std::array<double, 8> v{};
        for (std::size_t d = 0; d < 8; ++d) {
            const double lo = std::max(blo[d], c[d] * (1 - box_rel)), hi = std::min(bhi[d], c[d] * (1 + box_rel));
            v[d] = lo + (hi - lo) * uniform01(rng);
        }
        const auto g = AtomDescriptor::from_free(v);
        for (int s = 0; s < 2 && static_cast<int>(ts.samples.size()) < count; ++s)
            ts.samples.push_back({g, s, oracle.response(g, s)});
    }
    return ts;
}

struct HyperPolicy {
    double log10_lo = -1.5; // isotropic length-scale grid in the unit box
    double log10_hi = 1.0;
    int grid_points = 11;
    int refine_sweeps = 1;
    std::vector<double> refine_factors{0.25, 0.5, 2.0, 4.0};
    int selection_subset = 256;
    double nugget = 1e-10;
    double max_nugget = 1e-4;
};

struct Prediction {
    AtomResponse mean;
    std::array<double, response_outputs> variance{};
    bool extrapolated = false;
};

namespace kriging_detail {

inline double correlation(const double* a, const double* b, const std::vector<double>& scales)
{
    double s = 0;
    for (std::size_t d = 0; d < scales.size(); ++d) {
        const double t = (a[d] - b[d]) / scales[d];
        s += t * t;
    }
    return std::exp(-0.5 * s);
}

// Rows of x are points.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& x, const std::vector<double>& scales, double nugget)
{
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd xt = x.transpose();
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        r(j, j) = 1.0 + nugget;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = correlation(xt.col(i).data(), xt.col(j).data(), scales);
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    return r;
}

// Leave-one-out RMSE of ordinary kriging for fixed scales; NaN if singular.
inline double loo_rmse(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<double>& scales,
                       double nugget)
{
    const Eigen::MatrixXd r = correlation_matrix(x, scales, nugget);
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::MatrixXd c = llt.solve(Eigen::MatrixXd::Identity(r.rows(), r.cols()));
    const Eigen::VectorXd c1 = c.rowwise().sum();
    const double s = c1.sum();
    if (!(s > 0)) return std::numeric_limits<double>::quiet_NaN();
    const double mu = c1.dot(y) / s;
    const Eigen::VectorXd cy = c * (y.array() - mu).matrix();
    double acc = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double denom = c(i, i) - c1[i] * c1[i] / s;
        if (!(denom > 0)) return std::numeric_limits<double>::quiet_NaN();
        const double e = cy[i] / denom;
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

} // namespace kriging_detail

class KrigingModel {
public:
    struct Output {
        bool constant = false;
        double trend = 0;
        double sigma2 = 0;
        int group = -1;
        Eigen::VectorXd y;
        Eigen::VectorXd weights;
    };

    struct Group {
        std::vector<double> scales;
        double nugget = 0;
        Eigen::LLT<Eigen::MatrixXd> llt;
        Eigen::VectorXd c1; // R^-1 1
        double s = 0;       // 1' R^-1 1
    };

    std::size_t dims() const { return lo_.size(); }
    std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
    const std::vector<Output>& outputs() const { return outputs_; }
    const std::vector<Group>& groups() const { return groups_; }
    const Eigen::MatrixXd& inputs() const { return x_; }

    std::vector<double> normalize(std::span<const double> f) const
    {
        std::vector<double> u(f.size());
        for (std::size_t d = 0; d < f.size(); ++d) u[d] = (f[d] - lo_[d]) / span_[d];
        return u;
    }

    // Mean and variance per real output channel.
    void predict_features(std::span<const double> features, std::array<double, response_outputs>& mean,
                          std::array<double, response_outputs>& var, bool& extrapolated) const
    {
        require(features.size() == dims(), "feature dimension mismatch");
        const auto u = normalize(features);
        extrapolated = false;
        for (double v : u)
            if (v < -1e-12 || v > 1 + 1e-12) extrapolated = true;
        std::vector<Eigen::VectorXd> rs(groups_.size());
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const auto& g = groups_[gi];
            Eigen::VectorXd r(x_.rows());
            for (Eigen::Index i = 0; i < x_.rows(); ++i) r[i] = kriging_detail::correlation(xt_.col(i).data(), u.data(), g.scales);
            rs[gi] = std::move(r);
        }
        std::vector<double> quad(groups_.size(), -1.0), ones(groups_.size(), 0.0);
        for (std::size_t k = 0; k < response_outputs; ++k) {
            const auto& o = outputs_[k];
            if (o.constant) {
                mean[k] = o.trend;
                var[k] = 0;
                continue;
            }
            const auto& g = groups_[o.group];
            const auto& r = rs[o.group];
            mean[k] = o.trend + r.dot(o.weights);
            if (quad[o.group] < 0) {
                const Eigen::VectorXd cr = g.llt.solve(r);
                quad[o.group] = r.dot(cr);
                ones[o.group] = 1.0 - cr.sum();
            }
            const double v = o.sigma2 * (1.0 + g.nugget - quad[o.group] + ones[o.group] * ones[o.group] / g.s);
            var[k] = std::max(0.0, v);
        }
    }

    Prediction predict(const AtomDescriptor& g, int s) const
    {
        Prediction p;
        std::array<double, response_outputs> mean{};
        const auto f = atom_features(g, s);
        predict_features(f, mean, p.variance, p.extrapolated);
        p.mean = from_outputs(mean);
        return p;
    }

    static KrigingModel train(const TrainingSet& ts, const HyperPolicy& policy = {});

    void save(const std::filesystem::path& path) const;
    static KrigingModel load(const std::filesystem::path& path);

    const std::vector<double>& lower() const { return lo_; }
    const std::vector<double>& extent() const { return span_; }

private:
    std::vector<double> lo_, span_;
    Eigen::MatrixXd x_;  // normalised inputs, one row per sample
    Eigen::MatrixXd xt_; // transposed copy for contiguous rows
    std::vector<Output> outputs_;
    std::vector<Group> groups_;

    int factorize(const std::vector<double>& scales, double nugget, double max_nugget);
    void finish_output(Output& o) const;
};

namespace kriging_detail {

struct Row {
    std::vector<double> f;
    std::array<double, response_outputs> y;
};

inline std::vector<Row> canonical_rows(const TrainingSet& ts)
{
    require(ts.size() >= 2, "training set needs at least 2 samples");
    std::vector<Row> rows;
    rows.reserve(ts.size());
    for (const auto& smp : ts.samples) {
        require(smp.s == 0 || smp.s == 1, "training state must be 0 or 1");
        require(smp.g.tied(), "training layouts must honour the parameter ties");
        rows.push_back({atom_features(smp.g, smp.s), to_outputs(smp.response)});
        for (double v : rows.back().y) require(std::isfinite(v), "training outputs must be finite");
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.f != b.f) return a.f < b.f;
        return a.y < b.y;
    });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].f == rows[i - 1].f) throw ValidationError("duplicate training input in training set");
    return rows;
}

} // namespace kriging_detail

inline int KrigingModel::factorize(const std::vector<double>& scales, double nugget, double max_nugget)
{
    for (std::size_t gi = 0; gi < groups_.size(); ++gi)
        if (groups_[gi].scales == scales) return static_cast<int>(gi);
    double nug = nugget;
    for (;;) {
        Group g;
        g.scales = scales;
        g.nugget = nug;
        g.llt.compute(kriging_detail::correlation_matrix(x_, scales, nug));
        bool ok = g.llt.info() == Eigen::Success;
        if (ok) {
            g.c1 = g.llt.solve(Eigen::VectorXd::Ones(x_.rows()));
            g.s = g.c1.sum();
            ok = std::isfinite(g.s) && g.s > 0;
        }
        if (ok) {
            groups_.push_back(std::move(g));
            return static_cast<int>(groups_.size() - 1);
        }
        if (nug >= max_nugget) throw Error("kriging correlation matrix is singular even at the maximum nugget");
        nug = nug <= 0 ? 1e-10 : std::min(nug * 10, max_nugget);
    }
}

inline void KrigingModel::finish_output(Output& o) const
{
    const auto& g = groups_[o.group];
    o.trend = g.c1.dot(o.y) / g.s;
    const Eigen::VectorXd res = o.y.array() - o.trend;
    o.weights = g.llt.solve(res);
    o.sigma2 = std::max(0.0, res.dot(o.weights) / static_cast<double>(o.y.size()));
}

inline KrigingModel KrigingModel::train(const TrainingSet& ts, const HyperPolicy& policy)
{
    require(policy.grid_points >= 1, "hyper grid needs at least one point");
    require(policy.nugget >= 0 && policy.max_nugget >= policy.nugget, "nugget range is invalid");
    const auto rows = kriging_detail::canonical_rows(ts);
    const std::size_t n = rows.size(), dims = rows.front().f.size();

    KrigingModel m;
    m.lo_.assign(dims, std::numeric_limits<double>::infinity());
    m.span_.assign(dims, 0.0);
    std::vector<double> hi(dims, -std::numeric_limits<double>::infinity());
    for (const auto& r : rows)
        for (std::size_t d = 0; d < dims; ++d) {
            m.lo_[d] = std::min(m.lo_[d], r.f[d]);
            hi[d] = std::max(hi[d], r.f[d]);
        }
    for (std::size_t d = 0; d < dims; ++d) m.span_[d] = hi[d] > m.lo_[d] ? hi[d] - m.lo_[d] : 1.0;
    m.x_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dims; ++d)
            m.x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = (rows[i].f[d] - m.lo_[d]) / m.span_[d];
    m.xt_ = m.x_.transpose();

    // Selection subset: evenly spaced in canonical order.
    const std::size_t ns = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(8, policy.selection_subset)));
    std::vector<Eigen::Index> pick(ns);
    for (std::size_t k = 0; k < ns; ++k) pick[k] = static_cast<Eigen::Index>(k * n / ns);
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(dims));
    for (std::size_t k = 0; k < ns; ++k) xs.row(static_cast<Eigen::Index>(k)) = m.x_.row(pick[k]);

    m.outputs_.resize(response_outputs);
    std::vector<std::vector<double>> chosen(response_outputs);
    std::vector<int> same_as(response_outputs, -1);
    for (std::size_t k = 0; k < response_outputs; ++k) {
        auto& o = m.outputs_[k];
        o.y.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) o.y[static_cast<Eigen::Index>(i)] = rows[i].y[k];
        o.constant = (o.y.array() == o.y[0]).all();
        if (o.constant) {
            o.trend = o.y[0];
            continue;
        }
        for (std::size_t p = 0; p < k; ++p)
            if (!m.outputs_[p].constant && m.outputs_[p].y == o.y) {
                same_as[k] = static_cast<int>(p);
                break;
            }
    }

    // Length-scale selection by leave-one-out error, one task per distinct output.
    std::vector<std::size_t> tasks;
    for (std::size_t k = 0; k < response_outputs; ++k)
        if (!m.outputs_[k].constant && same_as[k] < 0) tasks.push_back(k);
    parallel_for(tasks.size(), [&](std::size_t t) {
        const std::size_t k = tasks[t];
        Eigen::VectorXd ys(static_cast<Eigen::Index>(ns));
        for (std::size_t i = 0; i < ns; ++i) ys[static_cast<Eigen::Index>(i)] = m.outputs_[k].y[pick[i]];
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> best_scales(dims, 1.0);
        auto try_scales = [&](const std::vector<double>& sc) {
            const double e = kriging_detail::loo_rmse(xs, ys, sc, std::max(policy.nugget, 1e-10));
            if (std::isfinite(e) && e < best) {
                best = e;
                best_scales = sc;
                return true;
            }
            return false;
        };
        for (int gidx = 0; gidx < policy.grid_points; ++gidx) {
            const double t01 = policy.grid_points == 1 ? 0.5 : static_cast<double>(gidx) / (policy.grid_points - 1);
            const double ell = std::pow(10.0, policy.log10_lo + t01 * (policy.log10_hi - policy.log10_lo));
            try_scales(std::vector<double>(dims, ell));
        }
        for (int sweep = 0; sweep < policy.refine_sweeps; ++sweep) {
            for (std::size_t d = 0; d < dims; ++d) {
                const auto base = best_scales;
                for (double fct : policy.refine_factors) {
                    auto sc = base;
                    sc[d] *= fct;
                    try_scales(sc);
                }
            }
        }
        chosen[k] = best_scales;
    });
    for (std::size_t k = 0; k < response_outputs; ++k)
        if (same_as[k] >= 0) chosen[k] = chosen[static_cast<std::size_t>(same_as[k])];

    for (std::size_t k = 0; k < response_outputs; ++k) {
        auto& o = m.outputs_[k];
        if (o.constant) continue;
        o.group = m.factorize(chosen[k], policy.nugget, policy.max_nugget);
        m.finish_output(o);
    }
    return m;
}

// Per-output RMSE of k-fold cross-validation.
inline std::array<double, response_outputs> cross_validate(const TrainingSet& ts, int folds, std::uint64_t seed,
                                                           const HyperPolicy& policy = {})
{
    require(folds >= 2, "cross-validation needs at least 2 folds");
    require(static_cast<std::size_t>(folds) <= ts.size(), "more folds than training samples");
    kriging_detail::canonical_rows(ts); // duplicate check
    std::vector<std::size_t> order(ts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    std::array<double, response_outputs> sse{};
    for (int f = 0; f < folds; ++f) {
        TrainingSet tr, te;
        for (std::size_t i = 0; i < order.size(); ++i)
            (static_cast<int>(i % folds) == f ? te : tr).samples.push_back(ts.samples[order[i]]);
        if (tr.size() < 2) throw ValidationError("fold leaves fewer than 2 training samples");
        const auto model = KrigingModel::train(tr, policy);
        for (const auto& smp : te.samples) {
            const auto pred = to_outputs(model.predict(smp.g, smp.s).mean);
            const auto truth = to_outputs(smp.response);
            for (std::size_t k = 0; k < response_outputs; ++k) sse[k] += (pred[k] - truth[k]) * (pred[k] - truth[k]);
        }
    }
    for (auto& v : sse) v = std::sqrt(v / static_cast<double>(ts.size()));
    return sse;
}

// ---------------------------------------------------------------------------
// Binary model file: magic, version, JSON header, raw little-endian doubles.

inline constexpr char kriging_magic[8] = {'R', 'P', 'E', 'M', 'S', 'K', 'R', 'G'};
inline constexpr std::uint32_t kriging_version = 1;

inline void KrigingModel::save(const std::filesystem::path& path) const
{
    nlohmann::json h;
    h["dims"] = dims();
    h["samples"] = size();
    h["outputs"] = response_outputs;
    h["lower"] = lo_;
    h["extent"] = span_;
    h["output_names"] = output_names();
    for (const auto& g : groups_) h["groups"].push_back({{"scales", g.scales}, {"nugget", g.nugget}});
    for (const auto& o : outputs_)
        h["channels"].push_back({{"constant", o.constant}, {"trend", o.trend}, {"sigma2", o.sigma2}, {"group", o.group}});
    const std::string header = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file '" + path.string() + "'");
    auto put = [&](const void* p, std::size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
    put(kriging_magic, sizeof kriging_magic);
    const std::uint32_t version = kriging_version, reserved = 0;
    const std::uint64_t hlen = header.size();
    put(&version, 4);
    put(&reserved, 4);
    put(&hlen, 8);
    put(header.data(), header.size());
    const Eigen::MatrixXd xr = x_; // column-major payload
    put(xr.data(), sizeof(double) * static_cast<std::size_t>(xr.size()));
    for (const auto& o : outputs_) put(o.y.data(), sizeof(double) * static_cast<std::size_t>(o.y.size()));
    if (!out) throw Error("failed writing model file '" + path.string() + "'");
}

inline KrigingModel KrigingModel::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file '" + path.string() + "'");
    auto get = [&](void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in) throw ValidationError("truncated model file '" + path.string() + "'");
    };
    char magic[8];
    get(magic, 8);
    if (std::memcmp(magic, kriging_magic, 8) != 0) throw ValidationError("not a kriging model file");
    std::uint32_t version = 0, reserved = 0;
    std::uint64_t hlen = 0;
    get(&version, 4);
    get(&reserved, 4);
    get(&hlen, 8);
    if (version != kriging_version) throw ValidationError("unsupported model file version " + std::to_string(version));
    if (hlen > (1u << 26)) throw ValidationError("corrupt model header length");
    std::string header(hlen, '\0');
    get(header.data(), hlen);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("corrupt model header: ") + e.what());
    }
    KrigingModel m;
    const auto dims = h.at("dims").get<std::size_t>();
    const auto n = h.at("samples").get<std::size_t>();
    require(h.at("outputs").get<std::size_t>() == response_outputs, "model output count mismatch");
    m.lo_ = h.at("lower").get<std::vector<double>>();
    m.span_ = h.at("extent").get<std::vector<double>>();
    require(m.lo_.size() == dims && m.span_.size() == dims, "model header dimension mismatch");
    m.x_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    get(m.x_.data(), sizeof(double) * n * dims);
    m.xt_ = m.x_.transpose();
    const auto& ch = h.at("channels");
    require(ch.size() == response_outputs, "model channel count mismatch");
    m.outputs_.resize(response_outputs);
    for (std::size_t k = 0; k < response_outputs; ++k) {
        auto& o = m.outputs_[k];
        o.constant = ch[k].at("constant").get<bool>();
        o.trend = ch[k].at("trend").get<double>();
        o.y.resize(static_cast<Eigen::Index>(n));
        get(o.y.data(), sizeof(double) * n);
    }
    if (h.contains("groups")) {
        for (const auto& gj : h["groups"]) {
            const auto sc = gj.at("scales").get<std::vector<double>>();
            const double nug = gj.at("nugget").get<double>();
            require(sc.size() == dims, "model group dimension mismatch");
            const int id = m.factorize(sc, nug, nug);
            require(m.groups_[static_cast<std::size_t>(id)].nugget == nug, "model refactorisation changed nugget");
        }
    }
    for (std::size_t k = 0; k < response_outputs; ++k) {
        auto& o = m.outputs_[k];
        if (o.constant) continue;
        o.group = ch[k].at("group").get<int>();
        require(o.group >= 0 && static_cast<std::size_t>(o.group) < m.groups_.size(), "model group index out of range");
        m.finish_output(o);
    }
    return m;
}

// Twin backed by a trained kriging model.
class KrigingTwin final : public AtomTwin {
public:
    explicit KrigingTwin(std::shared_ptr<const KrigingModel> model) : model_(std::move(model)) {}

    AtomResponse response(const AtomDescriptor& g, int s) const override
    {
        require(s == 0 || s == 1, "state must be 0 or 1");
        return model_->predict(g, s).mean;
    }

    const KrigingModel& model() const { return *model_; }

private:
    std::shared_ptr<const KrigingModel> model_;
};

// Held-out RMSE of a twin per output, divided by that output's range over the test set.
// Outputs that are constant on the test set report the plain RMSE.
inline std::array<double, response_outputs> heldout_nrmse(const AtomTwin& twin, const TrainingSet& test)
{
    require(test.size() > 0, "empty test set");
    std::array<double, response_outputs> se{}, lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& t : test.samples) {
        const auto y = to_outputs(t.response);
        const auto p = to_outputs(twin.response(t.g, t.s));
        for (std::size_t k = 0; k < response_outputs; ++k) {
            se[k] += (p[k] - y[k]) * (p[k] - y[k]);
            lo[k] = std::min(lo[k], y[k]);
            hi[k] = std::max(hi[k], y[k]);
        }
    }
    std::array<double, response_outputs> out{};
    for (std::size_t k = 0; k < response_outputs; ++k) {
        const double rmse = std::sqrt(se[k] / static_cast<double>(test.size()));
        out[k] = hi[k] > lo[k] ? rmse / (hi[k] - lo[k]) : rmse;
    }
    return out;
}

} // namespace rpems
