// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "common.hpp"

namespace rpems {

enum class QuantizerMode {
    paired,  // (a_s, chi_s) tied by state: two options per cell
    product  // full magnitude x phase product: four options per cell
};

struct QipmConfig {
    int max_iters = 100;
    double conv_threshold = 1e-4;
    double svd_rel_threshold = 1e-3;
    std::uint64_t seed = 0;
    QuantizerMode quantizer = QuantizerMode::paired;

    void validate() const
    {
        require(max_iters >= 1, "qipm.max_iters must be >= 1");
        require(conv_threshold > 0, "qipm.conv_threshold must be > 0");
        require(svd_rel_threshold > 0 && svd_rel_threshold < 1,
                "qipm.svd_rel_threshold must lie in (0, 1)");
    }
};

struct GaConfig {
    int population = 20;
    int max_iters = 10000;
    double fitness_threshold = 1e-3;
    double crossover_rate = 0.9;
    double mutation_rate = -1.0; // negative: 1/(M*N)
    int elitism = 1;
    std::uint64_t seed = 0;
    bool warm_start = false;

    void validate() const
    {
        require(population >= 2, "ga.population must be >= 2");
        require(max_iters >= 1, "ga.max_iters must be >= 1");
        require(fitness_threshold >= 0, "ga.fitness_threshold must be >= 0");
        require(crossover_rate >= 0 && crossover_rate <= 1, "ga.crossover_rate must lie in [0, 1]");
        require(mutation_rate <= 1, "ga.mutation_rate must lie in [0, 1]");
        require(elitism >= 0 && elitism < population, "ga.elitism must lie in [0, population)");
    }
};

struct AtomConfig {
    int budget = 5000;
    int population = 24;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(budget >= 1, "atom.budget must be >= 1");
        require(population >= 4, "atom.population must be >= 4");
    }
};

enum class TwinKind { oracle, kriging };

struct SurrogateConfig {
    TwinKind twin = TwinKind::kriging;
    int samples = 2000;
    double box_rel = 0.02;     // half-width of the training box around g_opt
    int selection_subset = 256;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(samples >= 2, "surrogate.samples must be >= 2");
        require(box_rel > 0 && box_rel < 0.2, "surrogate.box_rel must lie in (0, 0.2)");
        require(selection_subset >= 8, "surrogate.selection_subset must be >= 8");
    }
};

struct OperatorConfig {
    double memory_budget_mb = 2048.0;

    void validate() const { require(memory_budget_mb > 0, "operator.memory_budget_mb must be > 0"); }
};

} // namespace rpems
