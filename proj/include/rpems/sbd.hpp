// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <numeric>
#include <optional>

#include "forward_em.hpp"

namespace rpems {

// Fixed-length bit string, one bit per cell in row-major order.
class BitGenome {
public:
    BitGenome() = default;
    explicit BitGenome(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

    static BitGenome from_states(const StateMatrix& st)
    {
        BitGenome g(st.size());
        for (std::size_t c = 0; c < st.size(); ++c)
            if (st.s[c]) g.set(c, true);
        return g;
    }

    StateMatrix to_states(int m, int n) const
    {
        StateMatrix st(m, n);
        for (std::size_t c = 0; c < bits_; ++c) st.s[c] = get(c) ? 1 : 0;
        return st;
    }

    std::size_t size() const { return bits_; }
    std::size_t word_count() const { return words_.size(); }
    std::uint64_t word(std::size_t k) const { return words_[k]; }
    std::uint64_t& word(std::size_t k) { return words_[k]; }
    bool get(std::size_t c) const { return (words_[c >> 6] >> (c & 63)) & 1u; }
    void set(std::size_t c, bool v)
    {
        const std::uint64_t bit = std::uint64_t{1} << (c & 63);
        words_[c >> 6] = v ? (words_[c >> 6] | bit) : (words_[c >> 6] & ~bit);
    }
    void flip(std::size_t c) { words_[c >> 6] ^= std::uint64_t{1} << (c & 63); }
    // Mask of valid bits in the last word.
    std::uint64_t tail_mask() const
    {
        const std::size_t r = bits_ & 63;
        return r == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << r) - 1;
    }

    bool operator==(const BitGenome&) const = default;

private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

using Population = std::vector<BitGenome>;

// Per-cell squared mismatch of each state against a reference current.
class MismatchTable {
public:
    MismatchTable(const SurfaceCurrent& ref, const CellCurrentModel& model)
    {
        require(ref.m == model.rows() && ref.n == model.cols(), "reference current does not match the aperture");
        const std::size_t n = ref.size();
        e_[0].resize(n);
        e_[1].resize(n);
        delta_.resize(n);
        for (std::size_t c = 0; c < n; ++c) {
            const double a = std::norm(ref.coeffs[c] - model.coefficient(c, 0));
            const double b = std::norm(ref.coeffs[c] - model.coefficient(c, 1));
            e_[0][c] = a;
            e_[1][c] = b;
            delta_[c] = b - a;
            ref2_ += std::norm(ref.coeffs[c]);
        }
        if (!(ref2_ > 0)) throw Error("micro cost undefined for a zero-norm reference current");
    }

    std::size_t cells() const { return e_[0].size(); }
    double reference_norm2() const { return ref2_; }
    double delta(std::size_t c) const { return delta_[c]; }

    // Squared mismatch summed in cell order.
    double error(const BitGenome& g) const
    {
        double acc = 0;
        for (std::size_t c = 0; c < e_[0].size(); ++c) acc += e_[g.get(c) ? 1 : 0][c];
        return acc;
    }
    double error(const StateMatrix& st) const
    {
        double acc = 0;
        for (std::size_t c = 0; c < e_[0].size(); ++c) acc += e_[st.s[c]][c];
        return acc;
    }
    double psi(double error_sum) const { return std::sqrt(std::max(0.0, error_sum)) / std::sqrt(ref2_); }

private:
    std::vector<double> delta_;
    std::array<std::vector<double>, 2> e_;
    double ref2_ = 0;
};

inline double micro_cost(const StateMatrix& st, const SurfaceCurrent& ref, const CellCurrentModel& model)
{
    const SurfaceCurrent j = model.current(st);
    require(j.size() == ref.size(), "reference current does not match the aperture");
    double acc = 0, ref2 = 0;
    for (std::size_t c = 0; c < j.size(); ++c) {
        acc += std::norm(ref.coeffs[c] - j.coeffs[c]);
        ref2 += std::norm(ref.coeffs[c]);
    }
    if (!(ref2 > 0)) throw Error("micro cost undefined for a zero-norm reference current");
    return std::sqrt(acc) / std::sqrt(ref2);
}

inline double micro_cost(const StateMatrix& st, const SurfaceCurrent& ref, const AtomTwin& twin,
                         const AtomDescriptor& g, const ScenarioSpec& spec)
{
    return micro_cost(st, ref, CellCurrentModel(twin, g, spec, ref.iota));
}

namespace ga_detail {

struct Child {
    BitGenome genome;
    int parent = -1; // population index the child was derived from, -1 for an elite copy
    int elite_of = -1;
};

inline double effective_mutation(const GaConfig& cfg, std::size_t bits)
{
    return cfg.mutation_rate < 0 ? 1.0 / static_cast<double>(bits) : cfg.mutation_rate;
}

inline std::vector<int> rank_order(std::span<const double> fitness)
{
    std::vector<int> idx(fitness.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });
    return idx;
}

inline int tournament(std::span<const double> fitness, Rng& rng)
{
    const int a = static_cast<int>(uniform_index(rng, fitness.size()));
    const int b = static_cast<int>(uniform_index(rng, fitness.size()));
    if (fitness[a] < fitness[b]) return a;
    if (fitness[b] < fitness[a]) return b;
    return std::min(a, b);
}

inline void mutate(BitGenome& g, double rate, Rng& rng)
{
    if (rate <= 0) return;
    const std::size_t n = g.size();
    if (rate >= 1) {
        for (std::size_t c = 0; c < n; ++c) g.flip(c);
        return;
    }
    const double lq = std::log1p(-rate);
    std::size_t pos = 0;
    for (;;) {
        const double skip = std::floor(std::log(1.0 - uniform01(rng)) / lq);
        if (!(skip < static_cast<double>(n - pos))) break;
        pos += static_cast<std::size_t>(skip);
        g.flip(pos);
        ++pos;
        if (pos >= n) break;
    }
}

inline std::vector<Child> breed(const Population& pop, std::span<const double> fitness, const GaConfig& cfg, Rng& rng)
{
    require(pop.size() == static_cast<std::size_t>(cfg.population) && fitness.size() == pop.size(),
            "population size does not match the configuration");
    const auto order = rank_order(fitness);
    std::vector<Child> next;
    next.reserve(pop.size());
    for (int e = 0; e < cfg.elitism; ++e) next.push_back({pop[order[e]], -1, order[e]});
    const double pm = effective_mutation(cfg, pop.front().size());
    while (next.size() < pop.size()) {
        const int p1 = tournament(fitness, rng);
        const int p2 = tournament(fitness, rng);
        BitGenome child = pop[p1];
        if (uniform01(rng) < cfg.crossover_rate) {
            for (std::size_t k = 0; k < child.word_count(); ++k) {
                std::uint64_t mask = rng();
                if (k + 1 == child.word_count()) mask &= child.tail_mask();
                child.word(k) ^= (pop[p1].word(k) ^ pop[p2].word(k)) & mask;
            }
        }
        mutate(child, pm, rng);
        next.push_back({std::move(child), p1, -1});
    }
    return next;
}

} // namespace ga_detail

// Tournament-2 selection, uniform crossover, bit-flip mutation, elitism.
inline Population ga_step(const Population& pop, std::span<const double> fitness, const GaConfig& cfg, Rng& rng)
{
    cfg.validate();
    auto kids = ga_detail::breed(pop, fitness, cfg, rng);
    Population out;
    out.reserve(kids.size());
    for (auto& k : kids) out.push_back(std::move(k.genome));
    return out;
}

struct FitnessRecord {
    std::vector<double> best_psi;
    std::vector<double> mean_psi;
    StateMatrix best;
    long long evaluations = 0;
};

struct ConfigureResult {
    StateMatrix states;
    double psi = 0; // recomputed exactly for the returned states
    FitnessRecord record;
};

inline ConfigureResult configure(const SurfaceCurrent& ref, const CellCurrentModel& model, const GaConfig& cfg,
                                 const std::optional<StateMatrix>& initial = std::nullopt)
{
    cfg.validate();
    const MismatchTable table(ref, model);
    const std::size_t bits = table.cells();
    Rng rng(cfg.seed);

    Population pop;
    pop.reserve(static_cast<std::size_t>(cfg.population));
    if (initial) {
        require(initial->m == model.rows() && initial->n == model.cols(), "initial state does not match the aperture");
        pop.push_back(BitGenome::from_states(*initial));
    }
    while (pop.size() < static_cast<std::size_t>(cfg.population)) {
        BitGenome g(bits);
        for (std::size_t k = 0; k < g.word_count(); ++k) g.word(k) = rng() & (k + 1 == g.word_count() ? g.tail_mask() : ~std::uint64_t{0});
        pop.push_back(std::move(g));
    }
    std::vector<double> fit(pop.size());
    for (std::size_t l = 0; l < pop.size(); ++l) fit[l] = table.error(pop[l]);

    ConfigureResult res;
    res.record.evaluations = static_cast<long long>(pop.size());
    double best_err = std::numeric_limits<double>::infinity();
    BitGenome best;
    const double thr_err = cfg.fitness_threshold * cfg.fitness_threshold * table.reference_norm2();

    for (int it = 0;; ++it) {
        double sum = 0;
        for (std::size_t l = 0; l < pop.size(); ++l) {
            sum += table.psi(fit[l]);
            if (fit[l] < best_err) {
                best_err = fit[l];
                best = pop[l];
            }
        }
        res.record.best_psi.push_back(table.psi(best_err));
        res.record.mean_psi.push_back(sum / static_cast<double>(pop.size()));
        if (best_err <= thr_err || it + 1 >= cfg.max_iters) break;

        auto kids = ga_detail::breed(pop, fit, cfg, rng);
        Population next;
        std::vector<double> nfit(kids.size());
        next.reserve(kids.size());
        for (std::size_t l = 0; l < kids.size(); ++l) {
            auto& k = kids[l];
            if (k.elite_of >= 0) {
                nfit[l] = fit[static_cast<std::size_t>(k.elite_of)];
            } else {
                // Incremental update over the bits that differ from the parent.
                const BitGenome& par = pop[static_cast<std::size_t>(k.parent)];
                double f = fit[static_cast<std::size_t>(k.parent)];
                for (std::size_t w = 0; w < k.genome.word_count(); ++w) {
                    std::uint64_t d = k.genome.word(w) ^ par.word(w);
                    while (d) {
                        const std::size_t c = w * 64 + static_cast<std::size_t>(std::countr_zero(d));
                        d &= d - 1;
                        f += k.genome.get(c) ? table.delta(c) : -table.delta(c);
                    }
                }
                nfit[l] = f;
                ++res.record.evaluations;
            }
            next.push_back(std::move(k.genome));
        }
        pop = std::move(next);
        fit = std::move(nfit);
    }
    res.states = best.to_states(model.rows(), model.cols());
    res.record.best = res.states;
    res.psi = table.psi(table.error(res.states));
    return res;
}

inline ConfigureResult configure(const SurfaceCurrent& ref, const AtomTwin& twin, const AtomDescriptor& g,
                                 const ScenarioSpec& spec, const GaConfig& cfg,
                                 const std::optional<StateMatrix>& initial = std::nullopt)
{
    return configure(ref, CellCurrentModel(twin, g, spec, ref.iota), cfg, initial);
}

inline constexpr std::size_t brute_force_max_cells = 20;

// Exhaustive search; ties go to the lexicographically smallest state.
inline StateMatrix brute_force_configure(const SurfaceCurrent& ref, const CellCurrentModel& model)
{
    const std::size_t n = ref.size();
    if (n > brute_force_max_cells)
        throw ValidationError("aperture too large for exhaustive search (" + std::to_string(n) + " cells > " +
                              std::to_string(brute_force_max_cells) + ")");
    const MismatchTable table(ref, model);
    StateMatrix st(model.rows(), model.cols());
    StateMatrix best = st;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << n); ++k) {
        for (std::size_t c = 0; c < n; ++c) st.s[c] = static_cast<std::uint8_t>((k >> (n - 1 - c)) & 1u);
        const double e = table.error(st);
        if (e < best_err) {
            best_err = e;
            best = st;
        }
    }
    return best;
}

inline double exact_psi(const StateMatrix& st, const SurfaceCurrent& ref, const CellCurrentModel& model)
{
    const MismatchTable table(ref, model);
    return table.psi(table.error(st));
}

struct PhaseErrorMap {
    int m = 0, n = 0;
    std::vector<double> sigma;        // rad, wrapped to (-pi, pi]
    std::vector<std::uint8_t> valid;  // 0 where either coefficient is zero
    double min_deg = 0, max_deg = 0, max_abs_deg = 0;
};

inline PhaseErrorMap local_phase_error(const SurfaceCurrent& ref, const SurfaceCurrent& real)
{
    require(ref.m == real.m && ref.n == real.n && ref.size() == real.size(), "current dimensions do not match");
    PhaseErrorMap out;
    out.m = ref.m;
    out.n = ref.n;
    out.sigma.assign(ref.size(), 0.0);
    out.valid.assign(ref.size(), 0);
    bool any = false;
    for (std::size_t c = 0; c < ref.size(); ++c) {
        if (ref.coeffs[c] == cplx(0, 0) || real.coeffs[c] == cplx(0, 0)) continue;
        out.valid[c] = 1;
        out.sigma[c] = wrap_phase(std::arg(ref.coeffs[c]) - std::arg(real.coeffs[c]));
        const double d = rad2deg(out.sigma[c]);
        if (!any) {
            out.min_deg = out.max_deg = d;
            any = true;
        }
        out.min_deg = std::min(out.min_deg, d);
        out.max_deg = std::max(out.max_deg, d);
        out.max_abs_deg = std::max(out.max_abs_deg, std::abs(d));
    }
    return out;
}

} // namespace rpems
